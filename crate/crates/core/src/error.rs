use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("{name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("spatial dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("grid has {lengths} lengths but {cells} cell counts")]
    AxisMismatch { lengths: usize, cells: usize },
    #[error("axis {axis}: length must be positive, got {value}")]
    BadLength { axis: usize, value: f64 },
    #[error("axis {axis}: at least 2 cells required, got {cells}")]
    TooFewCells { axis: usize, cells: usize },
    #[error("field {field}: expected {expected} cells, found {found}")]
    FieldSize {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-positive initial density in {field} at cell {cell} (value {value})")]
    NonPositiveDensity {
        field: &'static str,
        cell: usize,
        value: f64,
    },
    #[error("negative initial signal at cell {cell} (value {value})")]
    NegativeSignal { cell: usize, value: f64 },
    #[error("non-finite value in {field} at cell {cell}")]
    NonFinite { field: &'static str, cell: usize },
    #[error("profile has {found} axis entries, grid has {expected}")]
    ProfileAxes { expected: usize, found: usize },
    #[error("gaussian width must be positive, got {0}")]
    BadWidth(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("p must exceed 1, got {0}")]
    BadExponent(f64),
    #[error("eps must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("amplitude bound M must be finite and nonnegative, got {0}")]
    BadAmplitude(f64),
    #[error("admissibility violated: M = {m} is not below the admissible bound {bound}")]
    NotAdmissible { m: f64, bound: f64 },
    #[error("argument {s} outside the weight domain [0, {m}]")]
    Domain { s: f64, m: f64 },
    #[error("negative radicand {0} in the identity residual")]
    NegativeRadicand(f64),
    #[error("above threshold: M = {m} must be below {bound}")]
    AboveThreshold { m: f64, bound: f64 },
    #[error("no positive exponent solves the equality for M = {m}, eps = {eps}")]
    NoRoot { m: f64, eps: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("positivity violation in {field} at cell {cell} (value {value}); reduce dt or switch to upwind")]
    Positivity {
        field: &'static str,
        cell: usize,
        value: f64,
    },
    #[error("non-finite value in {field} at cell {cell}")]
    NonFinite { field: &'static str, cell: usize },
    #[error("stable time step {dt:e} fell below the floor of 1e-15 at t = {t}")]
    DtUnderflow { t: f64, dt: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("weight domain exceeded: chi * max w = {value} > M = {m}")]
    WeightDomain { value: f64, m: f64 },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("decay fit declined: {0}")]
    FitDeclined(String),
}
