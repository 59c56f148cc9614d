use thiserror::Error;

pub type Result<T, E = HazardError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HazardError {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("time {t} lies beyond the tabulated grid end {end}; extrapolation is not supported")]
    BeyondGrid { t: f64, end: f64 },

    #[error("invalid hazard shape: {0}")]
    InvalidShape(String),

    #[error("unreachable cumulative hazard: requested {requested}, supremum is {supremum}")]
    UnreachableCumulativeHazard { requested: f64, supremum: f64 },

    #[error("defective mechanism not supported: `{0}` has a bounded cumulative hazard")]
    DefectiveMechanism(String),

    #[error("quadrature did not reach tolerance {tolerance} (estimated error {estimate})")]
    QuadratureNotConverged { tolerance: f64, estimate: f64 },

    #[error("weight of atom `{label}` must be positive and finite, got {weight}")]
    NonPositiveWeight { label: String, weight: f64 },

    #[error("duplicate mechanism label `{0}`")]
    DuplicateLabel(String),

    #[error("weights sum to {0}, outside [1 - 1e-9, 1 + 1e-9]")]
    WeightSum(f64),

    #[error("a mechanism distribution needs at least one atom")]
    EmptyDistribution,

    #[error("invalid law parameters: {0}")]
    InvalidLaw(String),

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    #[error("risk set empty at t = {0}: every atom has zero survival")]
    RiskSetEmpty(f64),

    #[error("risk set exhausted at t = {0}: aggregate survival is zero")]
    RiskSetExhausted(f64),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("covariate entries must be finite")]
    NonFiniteCovariate,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("perturbation invalid at epsilon = {epsilon}, grid index {index} (t = {t}): {condition}")]
    PerturbationValidity {
        epsilon: f64,
        index: usize,
        t: f64,
        condition: String,
    },

    #[error("invalid counterexample spec: {0}")]
    InvalidCounterexample(String),

    #[error(
        "eta = {eta} exceeds the reference atom weight {weight}; the replaced measure would not be nonnegative"
    )]
    EtaExceedsAtom { eta: f64, weight: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("ill-conditioned weight matrix (condition number {0:e})")]
    IllConditioned(f64),

    #[error("internal consistency failure: {0}")]
    ConsistencyFailure(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
}
