use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fock dimension {0}: cutoff must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported gate `{0}`")]
    UnsupportedGate(String),

    #[error("product dimension {requested} exceeds the tensor cap of {cap}")]
    ResourceLimit { requested: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "cutoff {cutoff} too small for delta={delta}: {leakage:.3e} of the norm is truncated \
         (allowed {allowed:.3e}); a cutoff of about {required} is needed"
    )]
    CutoffTooSmall {
        cutoff: usize,
        delta: f64,
        leakage: f64,
        allowed: f64,
        required: usize,
    },

    #[error("cutoff search exceeded the cap of {cap} for delta={delta}")]
    CutoffSearchExhausted { delta: f64, cap: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(
        "quadrature did not converge: {coarse_nodes} nodes gave {coarse:.12}, \
         {fine_nodes} nodes gave {fine:.12}"
    )]
    NotConverged {
        coarse_nodes: usize,
        fine_nodes: usize,
        coarse: f64,
        fine: f64,
    },

    #[error("momentum density integrates to {integral:.8} (tolerance 1e-4); refine the grid")]
    GridResolution { integral: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
