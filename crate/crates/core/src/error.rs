use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("polynomial must have degree >= 1 after trimming (got {0} coefficients)")]
    DegreeTooLow(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("orbit escaped: |z| = {modulus:e} exceeds the overflow sentinel")]
    Overflow { modulus: f64 },

    #[error("system is not expanding: {0}")]
    NotExpanding(String),

    #[error("no repelling fixed point of the first generator")]
    NoRepellingFixedPoint,

    #[error("pressure has no sign change on [0, t_max]: P(0) = {0}")]
    NoSignChange(f64),

    #[error("preimage tree would need {needed} terms, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("point cloud is degenerate (all points coincide)")]
    DegenerateCloud,

    #[error("point cloud too small: {got} points, need at least {need}")]
    InsufficientPoints { got: usize, need: usize },

    #[error("inverse branches collided at z = {z} (separation {separation:e})")]
    BranchCollision { z: Complex64, separation: f64 },

    #[error("Newton iteration diverged while continuing a periodic point near {z}")]
    NewtonDivergence { z: Complex64 },

    #[error("derivative inconclusive at z = {z}: |value| = {value:e} <= tail bound {tail:e}")]
    Inconclusive { z: Complex64, value: f64, tail: f64 },

    #[error("inclusion predicate is not monotone in t: true at {true_at}, false at {false_at}")]
    PredicateNonMonotone { true_at: f64, false_at: f64 },

    #[error("vertices do not form an equilateral triangle (side lengths {0:?})")]
    BadVertices([f64; 3]),

    #[error("|a| = {0} is excluded (must differ from 0 and 1)")]
    BadModulus(f64),
}

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DegreeTooLow(_) => "DegreeTooLow",
            Error::NonFinite(_) => "NonFinite",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::Overflow { .. } => "Overflow",
            Error::NotExpanding(_) => "NotExpanding",
            Error::NoRepellingFixedPoint => "NoRepellingFixedPoint",
            Error::NoSignChange(_) => "NoSignChange",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::DegenerateCloud => "DegenerateCloud",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::BranchCollision { .. } => "BranchCollision",
            Error::NewtonDivergence { .. } => "NewtonDivergence",
            Error::Inconclusive { .. } => "Inconclusive",
            Error::PredicateNonMonotone { .. } => "PredicateNonMonotone",
            Error::BadVertices(_) => "BadVertices",
            Error::BadModulus(_) => "BadModulus",
        }
    }

    /// True for errors caused by malformed input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DegreeTooLow(_)
                | Error::NonFinite(_)
                | Error::BadVertices(_)
                | Error::BadModulus(_)
                | Error::InsufficientPoints { .. }
        )
    }
}
