//! Signed ternary trees.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the order of enumerated combinatorial objects.
pub const COMBINATORIAL_CAP: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Signature of child `position` (0, 1, 2) under a node of this sign.
    pub fn child(self, position: usize) -> Sign {
        if position == 1 {
            self.flip()
        } else {
            self
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeNode {
    pub sign: Sign,
    pub parent: Option<usize>,
    pub children: Option<[usize; 3]>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Rooted ternary tree stored as an arena with nodes in preorder (root 0).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedTree {
    nodes: Vec<TreeNode>,
}

impl SignedTree {
    pub fn leaf(sign: Sign) -> Self {
        SignedTree { nodes: vec![TreeNode { sign, parent: None, children: None }] }
    }

    /// Builds a tree from its preorder code (`true` = branching node).
    pub fn from_code(code: &[bool], root: Sign) -> Result<Self> {
        let mut nodes = Vec::with_capacity(code.len());
        let mut pos = 0;
        build(code, &mut pos, root, None, &mut nodes)?;
        if pos != code.len() {
            return Err(Error::InvalidArgument("tree code has trailing symbols".into()));
        }
        Ok(SignedTree { nodes })
    }

    pub fn code(&self) -> Vec<bool> {
        self.nodes.iter().map(|n| !n.is_leaf()).collect()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_sign(&self) -> Sign {
        self.nodes[0].sign
    }

    /// Number of branching nodes.
    pub fn order(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn branching(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_leaf()).collect()
    }

    /// Same shape with every signature reversed.
    pub fn flipped(&self) -> SignedTree {
        SignedTree {
            nodes: self.nodes.iter().map(|n| TreeNode { sign: n.sign.flip(), ..n.clone() }).collect(),
        }
    }

    /// Number of nodes in the subtree of `i`, counting branching nodes only.
    pub fn branching_size(&self, i: usize) -> usize {
        match self.nodes[i].children {
            None => 0,
            Some(c) => 1 + c.iter().map(|&j| self.branching_size(j)).sum::<usize>(),
        }
    }

    /// Checks the preorder layout and the signature rule.
    pub fn validate(&self) -> Result<()> {
        let code = self.code();
        let rebuilt = SignedTree::from_code(&code, self.root_sign())?;
        if rebuilt != *self {
            return Err(Error::InvalidArgument("tree violates the preorder layout or signature rule".into()));
        }
        Ok(())
    }
}

fn build(code: &[bool], pos: &mut usize, sign: Sign, parent: Option<usize>, nodes: &mut Vec<TreeNode>) -> Result<usize> {
    let Some(&branching) = code.get(*pos) else {
        return Err(Error::InvalidArgument("tree code ends early".into()));
    };
    *pos += 1;
    let id = nodes.len();
    nodes.push(TreeNode { sign, parent, children: None });
    if branching {
        let mut c = [0; 3];
        for (j, slot) in c.iter_mut().enumerate() {
            *slot = build(code, pos, sign.child(j), Some(id), nodes)?;
        }
        nodes[id].children = Some(c);
    }
    Ok(id)
}

/// Preorder codes of all ternary shapes with `n` branching nodes, ordered
/// by the sizes of the left, middle and right subtrees.
pub fn tree_codes(n: usize) -> Vec<Vec<bool>> {
    if n == 0 {
        return vec![vec![false]];
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n - a {
            let c = n - 1 - a - b;
            for x in tree_codes(a) {
                for y in tree_codes(b) {
                    for z in tree_codes(c) {
                        let mut code = vec![true];
                        code.extend(&x);
                        code.extend(&y);
                        code.extend(&z);
                        out.push(code);
                    }
                }
            }
        }
    }
    out
}

/// All signed trees of order `n` with the given root signature.
pub fn enum_trees(n: usize, root: Sign) -> Result<Vec<SignedTree>> {
    enum_trees_capped(n, root, COMBINATORIAL_CAP)
}

pub fn enum_trees_capped(n: usize, root: Sign, cap: usize) -> Result<Vec<SignedTree>> {
    if n > cap {
        return Err(Error::CapExceeded { order: n, cap });
    }
    tree_codes(n).iter().map(|c| SignedTree::from_code(c, root)).collect()
}
