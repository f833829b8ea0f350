use thiserror::Error;

/// Errors raised by mesh construction, assembly, solvers and audits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}; only 2 and 3 are implemented")]
    UnsupportedDimension(usize),

    #[error("degenerate element {element}: volume {volume:e} below tolerance {tolerance:e}")]
    DegenerateElement {
        element: usize,
        volume: f64,
        tolerance: f64,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("refinement failed to reach a conforming mesh; offending elements {elements:?}")]
    Refinement { elements: Vec<usize> },

    #[error("invalid data on element {element:?}: {message}")]
    InvalidData {
        element: Option<usize>,
        message: String,
    },

    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),

    #[error("invalid operand: {0}")]
    InvalidOperand(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (final relative residual {final_residual:e})")]
    SolverFailure {
        iterations: usize,
        final_residual: f64,
        history: Vec<f64>,
    },

    #[error("fixed-point iteration did not converge in {iterations} steps (last update {last_update:e})")]
    FixedPointFailure {
        iterations: usize,
        last_update: f64,
        history: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("oscillation undefined: region does not meet the mesh")]
    EmptyRegion,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(element: Option<usize>, message: impl Into<String>) -> Self {
        Error::InvalidData {
            element,
            message: message.into(),
        }
    }
}
