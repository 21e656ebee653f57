use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input: bad shapes, domains, parameters.
    Config,
    /// A numerical routine failed to produce a trustworthy answer.
    Numerical,
    /// The inputs are valid but violate a method's preconditions.
    Precondition,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry produced by {0}")]
    NonFinite(&'static str),

    #[error("matrix exponential: 1-norm {norm:e} exceeds the scaling budget")]
    ScalingBudget { norm: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("generator is defective (eigenvector condition number {condition:e})")]
    Defective { condition: f64 },

    #[error("spectral function is singular at eigenvalue {index} ({value})")]
    SingularEigenvalue { index: usize, value: String },

    #[error("Hamiltonian is not Hermitian at g = {g} (deviation {deviation:e})")]
    NonHermitian { g: f64, deviation: f64 },

    #[error("zero eigenvalue has degeneracy {degeneracy}; stationary state is not unique")]
    DegenerateStationary { degeneracy: usize },

    #[error("gap ratio {ratio:e} is too small; the slow two-mode regime does not exist")]
    GapTooSmall { ratio: f64 },

    #[error("second eigenvalue has imaginary part {imag:e}; metastable split needs a real gap")]
    ComplexGap { imag: f64 },

    #[error("operator {what} is not Hermitian within tolerance (deviation {deviation:e})")]
    NotHermitianOperator { what: &'static str, deviation: f64 },

    #[error("channel {channel} out of range 1..={count}")]
    ChannelOutOfRange { channel: usize, count: usize },

    #[error("fidelity magnitude {magnitude:e} too small for a stable logarithm")]
    FidelityUnderflow { magnitude: f64 },

    #[error("finite-difference stencil failed after {halvings} step reductions")]
    StencilFailure { halvings: usize },

    #[error("eigenvalue branch tracking ambiguous (overlap {overlap:.3})")]
    BranchTracking { overlap: f64 },

    #[error("asymptotic rate routes disagree: eigenvalue route {route1:e}, resolvent route {route2:e}")]
    RouteMismatch { route1: f64, route2: f64 },

    #[error("negative QFI estimate {value:e} beyond the clamping tolerance")]
    NegativeQfi { value: f64 },

    #[error("record enumeration needs {records} records, budget is {budget}")]
    EnumerationBudget { records: u128, budget: u128 },

    #[error("time step {dt:e} too large for the Kraus square root; maximum admissible is {max_dt:e}")]
    KrausStep { dt: f64, max_dt: f64 },

    #[error("record enumeration and transfer map disagree by {difference:e}")]
    PathMismatch { difference: f64 },

    #[error("trajectory norm increased (non-contractive effective Hamiltonian)")]
    NormIncrease,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            NotSquare { .. }
            | Dimension(_)
            | NonHermitian { .. }
            | ChannelOutOfRange { .. }
            | InvalidParameter(_) => ErrorKind::Config,
            DegenerateStationary { .. }
            | GapTooSmall { .. }
            | ComplexGap { .. }
            | EnumerationBudget { .. }
            | KrausStep { .. }
            | Defective { .. }
            | SingularEigenvalue { .. } => ErrorKind::Precondition,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
