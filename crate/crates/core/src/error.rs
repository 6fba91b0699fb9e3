use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode count {count} exceeds the configured limit {limit}")]
    TooManyModes { count: u64, limit: u64 },

    #[error("compute budget exceeded: estimated cost {estimated} operations, budget {budget}")]
    BudgetExceeded { estimated: u128, budget: u128 },

    #[error("momentum constraint k1 - k2 + k3 = k violated")]
    MomentumViolation,

    #[error("spectrum table queried at |k| = {query}, outside the tabulated range [{lo}, {hi}]")]
    Extrapolation { query: f64, lo: f64, hi: f64 },

    #[error("non-finite field encountered at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("kinetic solution blew up at step {step}: sup-norm {sup} exceeds bound {bound}")]
    BlowUp { step: usize, sup: f64, bound: f64 },

    #[error("expansion order {order} exceeds the configured cap {cap}")]
    CapExceeded { order: usize, cap: usize },

    #[error("moment at mode {mode} has imaginary residue {value:e}")]
    ImaginaryResidue { mode: usize, value: f64 },

    #[error("ensemble member {member} (seed {seed}) failed: {source}")]
    Member {
        member: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed field record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
