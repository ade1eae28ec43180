//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Heavy-traffic balance sum(lambda_i / mu_i) = 1 fails.
    #[error("balance violation: sum(lambda_i/mu_i) = {sum} differs from 1 by more than {tol}")]
    BalanceViolation { sum: f64, tol: f64 },

    #[error("non-positive rate: {what}[{index}] = {value}")]
    NonPositiveRate {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("negative abandonment rate: theta[{index}] = {value}")]
    NegativeAbandonment { index: usize, value: f64 },

    /// Building the n-th system produced a non-positive arrival or service rate.
    #[error("rate underflow at n = {n}: {what}[{index}] = {value} <= 0")]
    RateUnderflow {
        n: u64,
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid cost spec: {0}")]
    InvalidCostSpec(String),

    #[error("negative queue component: phi_hat[{index}] = {value}")]
    NegativeQueue { index: usize, value: f64 },

    #[error("simplex violation: {0}")]
    SimplexViolation(String),

    #[error("unsupported cost spec for Holder bound: {0}")]
    UnsupportedSpec(String),

    #[error("policy iteration did not converge: last improvement {last_delta} after {iters} sweeps")]
    NoConvergence { last_delta: f64, iters: usize },

    #[error("singular linear system: zero pivot at row {row}")]
    SingularLinearSystem { row: usize },

    /// theta_round requires the component sum to be an integer.
    #[error("non-integer total {total} passed to theta_round")]
    NonIntegerTotal { total: f64 },

    /// The nonpreemptive pick rule found no eligible class although a queue
    /// is nonempty; indicates an invariant bug upstream.
    #[error("empty candidate set K0 with nonempty queues: phi = {phi:?}, targets = {targets:?}")]
    EmptyK0 { phi: Vec<i64>, targets: Vec<f64> },

    #[error("mollifier requires a convex cost; {cost_id} is not flagged convex in u")]
    NonConvexCost { cost_id: String },

    #[error("cmu-theta rule requires theta_i > 0 for every class; theta[{index}] = 0")]
    ZeroTheta { index: usize },

    /// A simulated state violated a structural invariant; the simulation aborts.
    #[error("invariant breach at t = {t}: {what}; state dump: {dump}")]
    InvariantBreach { t: f64, what: String, dump: String },

    /// The scheduling policy returned an inadmissible assignment.
    #[error("policy contract violation at t = {t}: {what}")]
    PolicyContractViolation { t: f64, what: String },

    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
