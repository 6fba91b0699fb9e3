//! Couples: a `+` tree and a `-` tree with a sign-respecting leaf pairing.

use serde::{Deserialize, Serialize};

use super::tree::{enum_trees_capped, Sign, SignedTree, COMBINATORIAL_CAP};
use crate::error::{Error, Result};

/// Leaves are numbered globally: leaves of the `+` tree in preorder, then
/// leaves of the `-` tree in preorder. `partner[g]` is the leaf paired with `g`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Couple {
    plus: SignedTree,
    minus: SignedTree,
    partner: Vec<usize>,
}

/// Position of a leaf or node inside a couple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub tree: Sign,
    pub node: usize,
}

/// Rewritable form used by the insertion and excision operations; leaves
/// carry pair labels, each label occurring exactly twice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Term {
    Leaf(usize),
    Node(Box<[Term; 3]>),
}

impl Term {
    pub(crate) fn node(a: Term, b: Term, c: Term) -> Term {
        Term::Node(Box::new([a, b, c]))
    }

    fn flatten(&self, code: &mut Vec<bool>, labels: &mut Vec<usize>) {
        match self {
            Term::Leaf(l) => {
                code.push(false);
                labels.push(*l);
            }
            Term::Node(c) => {
                code.push(true);
                c.iter().for_each(|t| t.flatten(code, labels));
            }
        }
    }
}

fn to_term(tree: &SignedTree, i: usize, leaf_label: &mut impl FnMut(usize) -> usize) -> Term {
    match tree.node(i).children {
        None => Term::Leaf(leaf_label(i)),
        Some([a, b, c]) => Term::node(to_term(tree, a, leaf_label), to_term(tree, b, leaf_label), to_term(tree, c, leaf_label)),
    }
}

impl Couple {
    /// The order-0 couple: two single leaves paired with each other.
    pub fn trivial() -> Couple {
        Couple { plus: SignedTree::leaf(Sign::Plus), minus: SignedTree::leaf(Sign::Minus), partner: vec![1, 0] }
    }

    /// Builds a couple from trees and (plus-tree-or-minus-tree global) leaf pairs.
    pub fn new(plus: SignedTree, minus: SignedTree, pairs: &[(usize, usize)]) -> Result<Couple> {
        if plus.root_sign() != Sign::Plus || minus.root_sign() != Sign::Minus {
            return Err(Error::InvalidArgument("couple needs a + rooted and a - rooted tree".into()));
        }
        plus.validate()?;
        minus.validate()?;
        let total = plus.leaves().len() + minus.leaves().len();
        let mut partner = vec![usize::MAX; total];
        for &(a, b) in pairs {
            if a >= total || b >= total || a == b || partner[a] != usize::MAX || partner[b] != usize::MAX {
                return Err(Error::InvalidArgument(format!("invalid leaf pair ({a}, {b})")));
            }
            partner[a] = b;
            partner[b] = a;
        }
        if partner.contains(&usize::MAX) {
            return Err(Error::InvalidArgument("pairing is not perfect".into()));
        }
        let c = Couple { plus, minus, partner };
        for g in 0..total {
            if c.leaf_sign(g) == c.leaf_sign(c.partner[g]) {
                return Err(Error::InvalidArgument(format!("leaves {g} and {} have equal signs", c.partner[g])));
            }
        }
        Ok(c)
    }

    pub fn plus(&self) -> &SignedTree {
        &self.plus
    }

    pub fn minus(&self) -> &SignedTree {
        &self.minus
    }

    pub fn tree(&self, sign: Sign) -> &SignedTree {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    /// `(n₊, n₋)`.
    pub fn orders(&self) -> (usize, usize) {
        (self.plus.order(), self.minus.order())
    }

    pub fn order(&self) -> usize {
        self.plus.order() + self.minus.order()
    }

    pub fn is_trivial(&self) -> bool {
        self.order() == 0
    }

    pub fn leaf_count(&self) -> usize {
        self.partner.len()
    }

    pub fn partner(&self, g: usize) -> usize {
        self.partner[g]
    }

    /// Tree and node index of global leaf `g`.
    pub fn leaf_site(&self, g: usize) -> Site {
        let lp = self.plus.leaves();
        if g < lp.len() {
            Site { tree: Sign::Plus, node: lp[g] }
        } else {
            Site { tree: Sign::Minus, node: self.minus.leaves()[g - lp.len()] }
        }
    }

    pub fn leaf_sign(&self, g: usize) -> Sign {
        let s = self.leaf_site(g);
        self.tree(s.tree).node(s.node).sign
    }

    /// Pairs as `(+ leaf, - leaf)`, sorted by the `+` leaf.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.partner.len())
            .filter(|&g| self.leaf_sign(g) == Sign::Plus)
            .map(|g| (g, self.partner[g]))
            .collect()
    }

    /// Deterministic ordering key: both shape codes, then the pairing.
    pub fn key(&self) -> (Vec<bool>, Vec<bool>, Vec<usize>) {
        (self.plus.code(), self.minus.code(), self.partner.clone())
    }

    /// Swaps the two trees (each with all signatures reversed).
    pub fn mirror(&self) -> Couple {
        let (plus, minus) = (self.minus.flipped(), self.plus.flipped());
        let (lp, lm) = (self.plus.leaves().len(), self.minus.leaves().len());
        let map = |g: usize| if g < lp { g + lm } else { g - lp };
        let mut partner = vec![0; lp + lm];
        for (g, &p) in self.partner.iter().enumerate() {
            partner[map(g)] = map(p);
        }
        Couple { plus, minus, partner }
    }

    pub(crate) fn to_terms(&self) -> (Term, Term) {
        let label: Vec<usize> = {
            let mut label = vec![usize::MAX; self.partner.len()];
            for (i, (a, b)) in self.pairs().into_iter().enumerate() {
                label[a] = i;
                label[b] = i;
            }
            label
        };
        let lp = self.plus.leaves().len();
        let mut g = 0;
        let plus = to_term(&self.plus, 0, &mut |_| {
            g += 1;
            label[g - 1]
        });
        let mut g = lp;
        let minus = to_term(&self.minus, 0, &mut |_| {
            g += 1;
            label[g - 1]
        });
        (plus, minus)
    }

    pub(crate) fn from_terms(plus: &Term, minus: &Term) -> Result<Couple> {
        let (mut code_p, mut labels) = (Vec::new(), Vec::new());
        plus.flatten(&mut code_p, &mut labels);
        let mut code_m = Vec::new();
        minus.flatten(&mut code_m, &mut labels);
        let mut first: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut pairs = Vec::new();
        for (g, &l) in labels.iter().enumerate() {
            match first.remove(&l) {
                Some(a) => pairs.push((a, g)),
                None => {
                    first.insert(l, g);
                }
            }
        }
        if !first.is_empty() {
            return Err(Error::InvalidArgument("unpaired leaf label".into()));
        }
        Couple::new(SignedTree::from_code(&code_p, Sign::Plus)?, SignedTree::from_code(&code_m, Sign::Minus)?, &pairs)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Every couple of orders `(n_plus, n_minus)`: all shape pairs and all
/// sign-respecting perfect matchings, in deterministic order.
pub fn enum_couples(n_plus: usize, n_minus: usize) -> Result<Vec<Couple>> {
    enum_couples_capped(n_plus, n_minus, COMBINATORIAL_CAP)
}

pub fn enum_couples_capped(n_plus: usize, n_minus: usize, cap: usize) -> Result<Vec<Couple>> {
    let order = n_plus + n_minus;
    if order > cap {
        return Err(Error::CapExceeded { order, cap });
    }
    let perms = permutations(order + 1);
    let mut out = Vec::new();
    for tp in enum_trees_capped(n_plus, Sign::Plus, cap)? {
        for tm in enum_trees_capped(n_minus, Sign::Minus, cap)? {
            let signs: Vec<Sign> = tp
                .leaves()
                .iter()
                .map(|&i| tp.node(i).sign)
                .chain(tm.leaves().iter().map(|&i| tm.node(i).sign))
                .collect();
            let pos: Vec<usize> = (0..signs.len()).filter(|&g| signs[g] == Sign::Plus).collect();
            let neg: Vec<usize> = (0..signs.len()).filter(|&g| signs[g] == Sign::Minus).collect();
            debug_assert_eq!(pos.len(), neg.len());
            for p in &perms {
                let mut partner = vec![0; signs.len()];
                for (a, &j) in pos.iter().zip(p) {
                    partner[*a] = neg[j];
                    partner[neg[j]] = *a;
                }
                out.push(Couple { plus: tp.clone(), minus: tm.clone(), partner });
            }
        }
    }
    Ok(out)
}

/// All couples with total order exactly `n`.
pub fn enum_couples_of_order(n: usize) -> Result<Vec<Couple>> {
    enum_couples_of_order_capped(n, COMBINATORIAL_CAP)
}

pub fn enum_couples_of_order_capped(n: usize, cap: usize) -> Result<Vec<Couple>> {
    let mut out = Vec::new();
    for a in (0..=n).rev() {
        out.extend(enum_couples_capped(a, n - a, cap)?);
    }
    Ok(out)
}
