use thiserror::Error;

/// Errors reported by the design, detection and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate constellation: codewords {0} and {1} coincide in every dimension")]
    DegenerateConstellation(usize, usize),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid factor graph: {0}")]
    InvalidGraph(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no modulation order {0} in the AIPD table")]
    MissingOrder(u32),

    #[error("factor graph `{0}` cannot be partitioned into covering column groups")]
    NotGroupable(String),

    #[error("rate {rate} bits is infeasible for {layers} layers with orders {orders:?}")]
    InfeasibleRate {
        rate: u32,
        layers: usize,
        orders: Vec<u32>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("search space of {size} joint hypotheses exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("SER samples are flat; no exponential decay can be fitted")]
    FlatSerCurve,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
