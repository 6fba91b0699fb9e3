//! Discrete weakly nonlinear Schrödinger dynamics on a periodic box and its
//! kinetic limit.

pub mod census;
pub mod diagrams;
pub mod ensemble;
pub mod error;
pub mod evolver;
pub mod fft;
pub mod fields;
pub mod kinetic;
pub mod lattice;
pub mod stats;

pub use error::{Error, Result};
pub use census::{crossover_scan, CensusRow, PairCensus, WindowQuery};
pub use ensemble::{run_ensemble, EnsembleOutput, MomentTable};
pub use evolver::{evolve, EvolveConfig, Scheme};
pub use fields::{NoiseLaw, SpectrumFamily, WaveField};
pub use kinetic::{collision, solve_wke, DeltaBroadening, KineticGrid, Trajectory, WkeConfig};
pub use lattice::{resonance, BoxSpec, ModeSet, WaveVector};
