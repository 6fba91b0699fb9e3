//! Diagram expansion of the second moment: signed ternary trees, couples,
//! regular couples, molecules, tree-ordered time integrals and decorated sums.

pub mod couple;
pub mod export;
pub mod molecule;
pub mod regular;
pub mod time_integral;
pub mod tree;
pub mod value;

pub use couple::{enum_couples, enum_couples_of_order, Couple, Site};
pub use molecule::{build_molecule, Bond, BondKind, Molecule};
pub use regular::{generate_regular, insertions, is_regular, reductions};
pub use time_integral::{domain_volume, node_rates, time_integral};
pub use tree::{enum_trees, tree_codes, Sign, SignedTree, COMBINATORIAL_CAP};
pub use value::{couple_value, truncated_moment, truncated_moment_by_order, DiagramConfig, LATTICE_CAP};
