//! Molecules: multigraphs on the branching nodes of a couple.

use serde::{Deserialize, Serialize};

use super::couple::{Couple, Site};
use super::tree::Sign;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    ParentChild,
    LeafPair,
    RootRoot,
}

impl BondKind {
    pub fn tag(self) -> &'static str {
        match self {
            BondKind::ParentChild => "parent_child",
            BondKind::LeafPair => "leaf_pair",
            BondKind::RootRoot => "root_root",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub site: Site,
    pub sign: Sign,
}

/// Directed bond `from -> to`.
///
/// Orientation: a parent-child bond points along the `+` end of the shared
/// wave vector (parent to child when the child has signature `+`); a leaf-pair
/// bond points from the parent of the `+` leaf to the parent of the `-` leaf;
/// the root bond points from the `+` tree side to the `-` tree side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub from: usize,
    pub to: usize,
    pub kind: BondKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl Molecule {
    /// Incidences at atom `i`; a self-loop counts twice.
    pub fn degree(&self, i: usize) -> usize {
        self.bonds.iter().map(|b| usize::from(b.from == i) + usize::from(b.to == i)).sum()
    }

    pub fn count(&self, kind: BondKind) -> usize {
        self.bonds.iter().filter(|b| b.kind == kind).count()
    }
}

/// Atoms are the branching nodes of the `+` tree in preorder, then those of
/// the `-` tree. The two root incidences are joined by one `root_root` bond;
/// when a tree is a single leaf, its root incidence passes through the leaf
/// pairing to the parent of its partner leaf.
pub fn build_molecule(c: &Couple) -> Molecule {
    let mut atoms = Vec::new();
    let mut atom_of = [Vec::new(), Vec::new()];
    for (t, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        let tree = c.tree(sign);
        atom_of[t] = vec![usize::MAX; tree.len()];
        for i in tree.branching() {
            atom_of[t][i] = atoms.len();
            atoms.push(Atom { site: Site { tree: sign, node: i }, sign: tree.node(i).sign });
        }
    }
    let side = |s: Sign| usize::from(s == Sign::Minus);
    let mut bonds = Vec::new();
    for (t, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        let tree = c.tree(sign);
        for i in tree.branching() {
            for &ch in &tree.node(i).children.expect("branching") {
                if tree.node(ch).is_leaf() {
                    continue;
                }
                let (p, q) = (atom_of[t][i], atom_of[t][ch]);
                let (from, to) = if tree.node(ch).sign == Sign::Plus { (p, q) } else { (q, p) };
                bonds.push(Bond { from, to, kind: BondKind::ParentChild });
            }
        }
    }
    let parent_atom = |g: usize| -> Option<usize> {
        let s = c.leaf_site(g);
        c.tree(s.tree).node(s.node).parent.map(|p| atom_of[side(s.tree)][p])
    };
    for (a, b) in c.pairs() {
        if let (Some(from), Some(to)) = (parent_atom(a), parent_atom(b)) {
            bonds.push(Bond { from, to, kind: BondKind::LeafPair });
        }
    }
    let (plus, minus) = (c.plus(), c.minus());
    let root_end = |sign: Sign| -> Option<usize> {
        let tree = c.tree(sign);
        if tree.is_trivial() {
            let g = if sign == Sign::Plus { 0 } else { plus.leaves().len() };
            parent_atom(c.partner(g))
        } else {
            Some(atom_of[side(sign)][0])
        }
    };
    if !(plus.is_trivial() && minus.is_trivial()) {
        if let (Some(from), Some(to)) = (root_end(Sign::Plus), root_end(Sign::Minus)) {
            bonds.push(Bond { from, to, kind: BondKind::RootRoot });
        }
    }
    Molecule { atoms, bonds }
}
