use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("forbidden rescaling weight alpha = {alpha} for n = {n}: dist(-alpha, Sigma(n)) = {gap} is below {tol}")]
    ForbiddenAlpha { n: usize, alpha: f64, gap: f64, tol: f64 },

    #[error("quadrature of degree {available} cannot resolve products up to degree {required}")]
    QuadratureResolution { required: usize, available: usize },

    #[error("potential not evaluable at t = {t}: {reason}")]
    NotEvaluable { t: f64, reason: String },

    #[error("integrator failure at tau = {tau}: {reason}")]
    IntegratorFailure { tau: f64, reason: String },

    #[error("frame rank collapse at tau = {tau}: Gram condition number {condition:.3e}")]
    RankCollapse { tau: f64, condition: f64 },

    #[error("range and kernel nearly parallel at tau = {tau}: minimal angle {angle:.3e}")]
    Transversality { tau: f64, angle: f64 },

    #[error("asymptotic condition violated at tau_min = {tau_min}: e^(2 tau) sup|V| = {value:.3e}")]
    AsymptoticCondition { tau_min: f64, value: f64 },

    #[error("time ordering violated: {0}")]
    TimeOrdering(String),

    #[error("tau = {tau} outside table range [{lo}, {hi}]")]
    OutOfGrid { tau: f64, lo: f64, hi: f64 },

    #[error("no bracket for zero {k} of j_{l} in search window")]
    BracketNotFound { l: usize, k: usize },

    #[error("scan range endpoint {lambda} is a root; shift the range")]
    EndpointRoot { lambda: f64 },

    #[error("iteration is not contracting (iterate differences grew for 3 consecutive steps at iteration {iteration})")]
    NonContraction { iteration: usize },

    #[error("maximum number of iterations ({max_iter}) exceeded; last defect {defect:.3e}")]
    MaxIterations { max_iter: usize, defect: f64 },

    #[error("singular Jacobian at truncation level (reciprocal condition {rcond:.3e})")]
    SingularJacobian { rcond: f64 },

    #[error("outer iteration stagnated at defect {defect:.3e}")]
    Stagnation { defect: f64 },

    #[error("nonlinearity argument {value:.3e} exceeds validity bound {bound:.3e}")]
    Overflow { value: f64, bound: f64 },

    #[error("unknown manufactured problem '{0}'")]
    UnknownProblem(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Dichotomy,
    Solver,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidArgument(_) | DimensionMismatch(_) | ForbiddenAlpha { .. } | QuadratureResolution { .. }
            | NotEvaluable { .. } | TimeOrdering(_) | OutOfGrid { .. } | UnknownProblem(_)
            | EndpointRoot { .. } => ErrorClass::Input,
            IntegratorFailure { .. } | RankCollapse { .. } | Transversality { .. } | AsymptoticCondition { .. } => {
                ErrorClass::Dichotomy
            }
            BracketNotFound { .. } | NonContraction { .. } | MaxIterations { .. } | SingularJacobian { .. }
            | Stagnation { .. } | Overflow { .. } => ErrorClass::Solver,
            Serialization(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
