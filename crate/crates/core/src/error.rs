use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values but the grid has {expected} nodes")]
    FieldLength { expected: usize, got: usize },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("non-finite reaction term at node {node} (x = {x:?})")]
    Domain { node: usize, x: [f64; 2] },
    #[error("coefficient field is not uniformly elliptic at node {node}: min A(x):z(x)z = {value}")]
    NotElliptic { node: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular matrix (zero pivot in column {column})")]
    Singular { column: usize },
    #[error("non-finite energy encountered at node {node}")]
    NonFiniteEnergy { node: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
