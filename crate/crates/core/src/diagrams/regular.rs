//! Regular couples: generated from the trivial couple by inserting
//! `(1,1)` mini-couples at leaf pairs and `(2,0)` mini-trees at nodes.

use std::collections::{BTreeMap, HashSet};

use super::couple::{enum_couples_capped, Couple, Term};
use super::tree::COMBINATORIAL_CAP;
use crate::error::{Error, Result};

fn sigma(position: usize) -> i8 {
    if position == 1 {
        -1
    } else {
        1
    }
}

/// Admissible `(branch position, trunk position)` choices of an order-2 insertion:
/// the trunk must carry the signature of the node it replaces.
const INSERTION_SLOTS: [(usize, usize); 5] = [(0, 0), (0, 2), (1, 1), (2, 0), (2, 2)];

fn fresh_label(p: &Term, m: &Term) -> usize {
    fn max_label(t: &Term) -> usize {
        match t {
            Term::Leaf(l) => *l,
            Term::Node(c) => c.iter().map(max_label).max().unwrap_or(0),
        }
    }
    max_label(p).max(max_label(m)) + 1
}

/// Applies `f` to every subterm, collecting all rewritten whole terms.
fn rewrite_each(t: &Term, f: &mut impl FnMut(&Term) -> Vec<Term>) -> Vec<Term> {
    let mut out = f(t);
    if let Term::Node(c) = t {
        for j in 0..3 {
            for sub in rewrite_each(&c[j], f) {
                let mut cc = (**c).clone();
                cc[j] = sub;
                out.push(Term::Node(Box::new(cc)));
            }
        }
    }
    out
}

fn replace_leaf(t: &Term, label: usize, with: &mut Vec<Term>) -> Term {
    match t {
        Term::Leaf(l) if *l == label => with.remove(0),
        Term::Leaf(_) => t.clone(),
        Term::Node(c) => Term::node(replace_leaf(&c[0], label, with), replace_leaf(&c[1], label, with), replace_leaf(&c[2], label, with)),
    }
}

/// All couples obtained from `c` by one `(1,1)` insertion or one `(2,0)`
/// insertion (in either tree).
pub fn insertions(c: &Couple) -> Result<Vec<Couple>> {
    let (p, m) = c.to_terms();
    let base = fresh_label(&p, &m);
    let mut out = Vec::new();
    // (1,1): both leaves of a pair become branching nodes; middles pair,
    // outer leaves cross-pair in either order.
    for (i, _) in c.pairs().iter().enumerate() {
        let (a, b, x) = (base, base + 1, base + 2);
        for swap in [false, true] {
            let first = Term::node(Term::Leaf(a), Term::Leaf(x), Term::Leaf(b));
            let second = if swap {
                Term::node(Term::Leaf(b), Term::Leaf(x), Term::Leaf(a))
            } else {
                Term::node(Term::Leaf(a), Term::Leaf(x), Term::Leaf(b))
            };
            let mut with = vec![first, second];
            let np = replace_leaf(&p, i, &mut with);
            let nm = replace_leaf(&m, i, &mut with);
            out.push(Couple::from_terms(&np, &nm)?);
        }
    }
    // (2,0): any node S becomes r' with an order-1 child n' at position j
    // whose trunk child at position s is S.
    let mut order2 = |sub: &Term| -> Vec<Term> {
        let mut v = Vec::new();
        for &(j, s) in &INSERTION_SLOTS {
            let rp: Vec<usize> = (0..3).filter(|&q| q != j).collect();
            let np: Vec<usize> = (0..3).filter(|&q| q != s).collect();
            for swap in [false, true] {
                let targets = if swap { [np[1], np[0]] } else { [np[0], np[1]] };
                // r' leaf at q pairs with n' leaf at q': opposite signatures.
                if (0..2).any(|t| sigma(rp[t]) != -sigma(j) * sigma(targets[t])) {
                    continue;
                }
                let labels = [base, base + 1];
                let mut inner = [Term::Leaf(0), Term::Leaf(0), Term::Leaf(0)];
                inner[s] = sub.clone();
                let mut outer = [Term::Leaf(0), Term::Leaf(0), Term::Leaf(0)];
                for t in 0..2 {
                    outer[rp[t]] = Term::Leaf(labels[t]);
                    inner[targets[t]] = Term::Leaf(labels[t]);
                }
                outer[j] = Term::Node(Box::new(inner));
                v.push(Term::Node(Box::new(outer)));
            }
        }
        v
    };
    for np in rewrite_each(&p, &mut order2) {
        out.push(Couple::from_terms(&np, &m)?);
    }
    for nm in rewrite_each(&m, &mut order2) {
        out.push(Couple::from_terms(&p, &nm)?);
    }
    Ok(out)
}

fn leaf_labels(t: &Term) -> Option<[usize; 3]> {
    match t {
        Term::Node(c) => match (&c[0], &c[1], &c[2]) {
            (Term::Leaf(a), Term::Leaf(b), Term::Leaf(d)) => Some([*a, *b, *d]),
            _ => None,
        },
        Term::Leaf(_) => None,
    }
}

fn collect_nodes<'a>(t: &'a Term, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Term)>) {
    if let Term::Node(c) = t {
        out.push((path.clone(), t));
        for (j, s) in c.iter().enumerate() {
            path.push(j);
            collect_nodes(s, path, out);
            path.pop();
        }
    }
}

fn replace_at(t: &Term, path: &[usize], with: &Term) -> Term {
    match (path.split_first(), t) {
        (None, _) => with.clone(),
        (Some((&j, rest)), Term::Node(c)) => {
            let mut cc = (**c).clone();
            cc[j] = replace_at(&c[j], rest, with);
            Term::Node(Box::new(cc))
        }
        (Some(_), Term::Leaf(_)) => unreachable!("paths come from collect_nodes"),
    }
}

fn same_pair_set(a: [usize; 2], b: [usize; 2]) -> bool {
    a[0] != a[1] && ((a[0] == b[0] && a[1] == b[1]) || (a[0] == b[1] && a[1] == b[0]))
}

/// All couples obtained from `c` by excising one inserted mini-couple.
pub fn reductions(c: &Couple) -> Result<Vec<Couple>> {
    let (p, m) = c.to_terms();
    let mut nodes = Vec::new();
    for (side, t) in [&p, &m].into_iter().enumerate() {
        let mut v = Vec::new();
        collect_nodes(t, &mut Vec::new(), &mut v);
        nodes.extend(v.into_iter().map(|(path, n)| (side, path, n)));
    }
    let edit = |edits: &[(usize, &[usize], &Term)]| -> Result<Couple> {
        let mut res = [p.clone(), m.clone()];
        for &(side, path, with) in edits {
            res[side] = replace_at(&res[side], path, with);
        }
        Couple::from_terms(&res[0], &res[1])
    };
    let mut out = Vec::new();
    // (1,1) excision: two all-leaf nodes whose middles pair and whose
    // outer leaves cross-pair; both collapse to one new leaf pair.
    for (x, (sx, px, nx)) in nodes.iter().enumerate() {
        let Some([a, b, d]) = leaf_labels(nx) else { continue };
        for (sy, py, ny) in &nodes[x + 1..] {
            let Some([a2, b2, d2]) = leaf_labels(ny) else { continue };
            if b == b2 && same_pair_set([a, d], [a2, d2]) {
                let leaf = Term::Leaf(b);
                out.push(edit(&[(*sx, px, &leaf), (*sy, py, &leaf)])?);
            }
        }
    }
    // (2,0) excision: r' with an order-1 child n' whose two non-trunk leaves
    // cross-pair with the two leaves of r'; r' collapses to the trunk.
    for (side, path, r) in &nodes {
        let Term::Node(rc) = r else { continue };
        for &(j, s) in &INSERTION_SLOTS {
            let Term::Node(nc) = &rc[j] else { continue };
            let rp: Vec<usize> = (0..3).filter(|&q| q != j).collect();
            let np: Vec<usize> = (0..3).filter(|&q| q != s).collect();
            let (Term::Leaf(u), Term::Leaf(v)) = (&rc[rp[0]], &rc[rp[1]]) else { continue };
            let (Term::Leaf(x), Term::Leaf(y)) = (&nc[np[0]], &nc[np[1]]) else { continue };
            if same_pair_set([*u, *v], [*x, *y]) {
                out.push(edit(&[(*side, path, &nc[s])])?);
            }
        }
    }
    Ok(out)
}

/// True iff repeated excision of mini-couples reaches the trivial couple.
pub fn is_regular(c: &Couple) -> bool {
    if c.order() % 2 == 1 {
        return false;
    }
    let mut cur = c.clone();
    while !cur.is_trivial() {
        match reductions(&cur) {
            Ok(next) if !next.is_empty() => cur = next.into_iter().next().expect("non-empty"),
            _ => return false,
        }
    }
    true
}

/// Regular couples of total order ≤ `max_order`, by forward generation,
/// keyed by order and sorted canonically.
pub fn generate_regular(max_order: usize) -> Result<BTreeMap<usize, Vec<Couple>>> {
    if max_order > COMBINATORIAL_CAP {
        return Err(Error::CapExceeded { order: max_order, cap: COMBINATORIAL_CAP });
    }
    let mut seen: HashSet<Couple> = HashSet::new();
    let mut frontier = vec![Couple::trivial()];
    seen.insert(Couple::trivial());
    while let Some(c) = frontier.pop() {
        for next in insertions(&c)? {
            if next.order() <= max_order && seen.insert(next.clone()) {
                frontier.push(next);
            }
        }
    }
    let mut out: BTreeMap<usize, Vec<Couple>> = BTreeMap::new();
    for c in seen {
        out.entry(c.order()).or_default().push(c);
    }
    for v in out.values_mut() {
        v.sort_by_key(Couple::key);
    }
    Ok(out)
}

/// The two regular couples of orders `(1,1)`.
pub fn mini_couples_11() -> Result<Vec<Couple>> {
    Ok(enum_couples_capped(1, 1, 2)?.into_iter().filter(is_regular).collect())
}

/// The regular couples of orders `(2,0)`.
pub fn mini_couples_20() -> Result<Vec<Couple>> {
    Ok(enum_couples_capped(2, 0, 2)?.into_iter().filter(is_regular).collect())
}
