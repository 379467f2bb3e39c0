use core::fmt;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid dimensions or extents violate their constraints.
    InvalidGrid(&'static str),
    /// Metric is not positive definite (or not invertible) at a node.
    DegenerateMetric { node: usize, det: f64 },
    /// Two inputs disagree on their sizes.
    ShapeMismatch { expected: usize, found: usize },
    /// The spatial weight fails its gradient or convexity condition.
    WeightInvalid { reason: &'static str, value: f64 },
    /// Argument outside the domain of a function.
    Domain { what: &'static str, value: f64 },
    /// Exponent in a weight evaluation exceeds the safe range.
    ParameterOverflow { exponent: f64 },
    /// A linear solve failed or left a large residual.
    Solver { residual: f64 },
    /// Input violates an operation precondition.
    Precondition(&'static str),
    /// A source preset cannot meet the admissibility bounds.
    Admissibility { alpha: f64, beta: f64 },
    /// Quadrature requested over an empty region.
    EmptyRegion,
    /// Dense oracle refused because the problem is too large.
    OracleTooLarge { unknowns: usize, limit: usize },
    /// Index or parameter out of its allowed range.
    OutOfRange { what: &'static str, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::DegenerateMetric { node, det } => {
                write!(f, "degenerate metric at node {node} (det = {det:e})")
            }
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected} values, found {found}")
            }
            Error::WeightInvalid { reason, value } => {
                write!(f, "spatial weight invalid: {reason} (value {value:e})")
            }
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::ParameterOverflow { exponent } => {
                write!(f, "weight exponent {exponent:e} exceeds the safe range")
            }
            Error::Solver { residual } => {
                write!(f, "linear solve failed (relative residual {residual:e})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Admissibility { alpha, beta } => write!(
                f,
                "source not admissible: achieved alpha {alpha:e}, beta {beta:e}"
            ),
            Error::EmptyRegion => write!(f, "quadrature over an empty region"),
            Error::OracleTooLarge { unknowns, limit } => write!(
                f,
                "dense oracle refused: {unknowns} unknowns exceeds limit {limit}"
            ),
            Error::OutOfRange { what, value } => write!(f, "{what} out of range: {value}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
