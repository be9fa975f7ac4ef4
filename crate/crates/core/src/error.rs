use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series did not converge after {terms} shells at {context}")]
    NonConvergence { terms: usize, context: String },

    #[error("quadrature on [{lower}, {upper}] did not reach tolerance {tolerance:e} (estimated error {error:e})")]
    Quadrature {
        lower: f64,
        upper: f64,
        tolerance: f64,
        error: f64,
    },

    #[error("empty window: fewer than two samples")]
    EmptyWindow,

    #[error("non-positive price {price} at t = {time}")]
    NonPositivePrice { time: f64, price: f64 },

    #[error("timestamps are not strictly increasing at t = {time}")]
    NonMonotoneTime { time: f64 },

    #[error("bridge estimator requires intra-window path data")]
    MissingBridge,

    #[error("variance is degenerate ({0})")]
    DegenerateVariance(f64),

    #[error("resource limit exceeded: {requested} path-steps requested, cap is {cap}")]
    ResourceLimit { requested: u128, cap: u128 },

    #[error("estimator {0} has no samples in this summary")]
    MissingSamples(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
