use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },

    #[error("loading `{field}` must be non-negative, got {value}")]
    NegativeLoading { field: &'static str, value: f64 },

    #[error("asset count must be at least 1, got {0}")]
    BadCount(usize),

    #[error("sample of {cells} cells exceeds the memory budget of {budget} cells")]
    AllocationTooLarge { cells: usize, budget: usize },

    #[error("{what}: argument {value} outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error(
        "quadrature did not stabilise: last relative change {relative_change:e} with {nodes} nodes"
    )]
    QuadratureUnconverged { nodes: usize, relative_change: f64 },

    #[error("invalid quadrature settings: {0}")]
    BadQuadrature(String),

    #[error("invalid tranche grid: {0}")]
    BadGrid(String),

    #[error("limit is indeterminate: {0}")]
    Indeterminate(&'static str),

    #[error("sample covariance is singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },

    #[error("binary samples are all identical")]
    DegenerateMarginal,

    #[error("not enough samples: {got} < {needed}")]
    InsufficientSamples { got: usize, needed: usize },

    #[error("invalid asset: {0}")]
    BadAsset(String),
}
