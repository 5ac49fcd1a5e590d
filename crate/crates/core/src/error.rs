use opa_lp::LpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpaError {
    #[error("invalid ranking profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("breakpoint {0} is not a grid point")]
    NonGridBreakpoint(f64),
    #[error("domain mismatch: expected [0, {expected}], found [0, {found}]")]
    DomainMismatch { expected: f64, found: f64 },
    #[error("samples are not concave: slope rises at segment {segment}")]
    NonConcaveSamples { segment: usize },
    #[error("utility ambiguity set is empty{}", cell_suffix(.cell))]
    AmbiguitySetEmpty { cell: Option<(usize, usize)> },
    #[error("all {0} questions have been asked")]
    SessionExhausted(usize),
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("session is inconsistent; resolve it with an inconsistency-tolerant model")]
    SessionInconsistent,
    #[error("utility values of expert {i}, attribute {j} sum to zero")]
    ZeroUtilitySum { i: usize, j: usize },
    #[error("error bound needs at least two ranks")]
    BoundUndefined,
    #[error("perturbed rank {value} lies outside [0, {max}]")]
    PerturbedRankOutOfDomain { value: f64, max: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver fault: {0}")]
    SolverFault(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn cell_suffix(cell: &Option<(usize, usize)>) -> String {
    match cell {
        Some((i, j)) => format!(" for expert {}, attribute {}", i + 1, j + 1),
        None => String::new(),
    }
}

impl OpaError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            OpaError::InvalidProfile(_) => "INVALID_PROFILE",
            OpaError::InvalidArg(_) => "INVALID_ARG",
            OpaError::InvalidConfig(_) => "INVALID_CONFIG",
            OpaError::NonGridBreakpoint(_) => "NON_GRID_BREAKPOINT",
            OpaError::DomainMismatch { .. } => "DOMAIN_MISMATCH",
            OpaError::NonConcaveSamples { .. } => "NON_CONCAVE_SAMPLES",
            OpaError::AmbiguitySetEmpty { .. } => "AMBIGUITY_SET_EMPTY",
            OpaError::SessionExhausted(_) => "SESSION_EXHAUSTED",
            OpaError::NoPendingQuestion => "NO_PENDING_QUESTION",
            OpaError::SessionInconsistent => "SESSION_INCONSISTENT",
            OpaError::ZeroUtilitySum { .. } => "ZERO_UTILITY_SUM",
            OpaError::BoundUndefined => "BOUND_UNDEFINED",
            OpaError::PerturbedRankOutOfDomain { .. } => "PERTURBED_RANK_OUT_OF_DOMAIN",
            OpaError::Infeasible(_) => "INFEASIBLE",
            OpaError::SolverFault(_) => "SOLVER_FAULT",
            OpaError::Lp(e) => e.code(),
        }
    }

    /// True for errors caused by the caller's input rather than the solver.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            OpaError::Lp(_) | OpaError::SolverFault(_) | OpaError::Infeasible(_) | OpaError::AmbiguitySetEmpty { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, OpaError>;
