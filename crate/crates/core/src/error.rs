use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("graded exponential needs strictly positive grades, found grade {grade}")]
    NonPositiveGrade { grade: i32 },
    #[error("observable has a term of odd explicit grade {grade}; only integer powers of hbar are supported")]
    OddObservableGrade { grade: i32 },
    #[error("series has no invertible leading coefficient")]
    NotInvertible,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("degree {degree} exceeds the cap {cap}")]
    DegreeCapExceeded { degree: u32, cap: u32 },
    #[error("point is not critical: gradient component {component} is {value}")]
    NotCritical { component: usize, value: String },
    #[error("Hessian is singular at the critical point")]
    SingularHessian,
    #[error("Newton iteration did not converge after {iterations} steps (|grad S| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("critical point is degenerate (Hessian condition number {condition:e})")]
    DegenerateCritical { condition: f64 },
    #[error("component {component} of V has a constant or linear term")]
    VHasLowDegree { component: usize },
    #[error("fiber Hessian is singular at base parameter {theta}")]
    DegenerateFiberHessian { theta: f64 },
    #[error("point is off the critical manifold (|grad S| = {residual:e})")]
    NotOnZ { residual: f64 },
    #[error("action varies along the critical manifold (spread {spread:e})")]
    NonConstantActionOnZ { spread: f64 },
    #[error("point does not lie on the slice (residual {residual:e})")]
    NotOnSlice { residual: f64 },
    #[error("slice is not transverse to the orbit")]
    NonTransverse,
    #[error("integrand is not invariant under the group action: {0}")]
    NotInvariant(String),
    #[error("gauge map degenerates on the orbit: {0}")]
    DegenerateOnOrbit(String),
    #[error("integrand does not decay inside the search box")]
    NoDecay,
    #[error("quadrature error estimate {estimate:e} above tolerance {tol:e}")]
    ToleranceNotMet { estimate: f64, tol: f64 },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("extrapolation is unstable: {0}")]
    ExtrapolationUnstable(String),
    #[error("matrix kernel is not spanned by constants")]
    WrongKernel,
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown variable `{name}` at line {line}, column {column}")]
    UnknownVariable { name: String, line: usize, column: usize },
    #[error("exponent at line {line}, column {column} is not a nonnegative integer")]
    NonIntegerExponent { line: usize, column: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
