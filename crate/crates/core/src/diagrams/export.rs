//! Plain-text graph format for couples and molecules.
//!
//! ```text
//! couple <n+> <n->
//! node <tree> <index> <sign> <leaf|branch>
//! edge <tree> <parent> <child>
//! pair <leaf> <leaf>
//! ```
//! and
//! ```text
//! molecule <atoms> <bonds>
//! atom <id> <tree> <node> <sign>
//! bond <from> <to> <kind>
//! ```
//! Leaves in `pair` lines use the global numbering of [`Couple`].

use std::fmt::Write;

use super::couple::Couple;
use super::molecule::Molecule;
use super::tree::Sign;

pub fn couple_to_text(c: &Couple) -> String {
    let mut s = String::new();
    let (a, b) = c.orders();
    writeln!(s, "couple {a} {b}").unwrap();
    for sign in [Sign::Plus, Sign::Minus] {
        let tree = c.tree(sign);
        for (i, n) in tree.nodes().iter().enumerate() {
            writeln!(s, "node {sign} {i} {} {}", n.sign, if n.is_leaf() { "leaf" } else { "branch" }).unwrap();
        }
        for (i, n) in tree.nodes().iter().enumerate() {
            for ch in n.children.iter().flatten() {
                writeln!(s, "edge {sign} {i} {ch}").unwrap();
            }
        }
    }
    for (p, m) in c.pairs() {
        writeln!(s, "pair {p} {m}").unwrap();
    }
    s
}

pub fn molecule_to_text(m: &Molecule) -> String {
    let mut s = String::new();
    writeln!(s, "molecule {} {}", m.atoms.len(), m.bonds.len()).unwrap();
    for (i, a) in m.atoms.iter().enumerate() {
        writeln!(s, "atom {i} {} {} {}", a.site.tree, a.site.node, a.sign).unwrap();
    }
    for b in &m.bonds {
        writeln!(s, "bond {} {} {}", b.from, b.to, b.kind.tag()).unwrap();
    }
    s
}
