use thiserror::Error;

/// Errors raised by model construction, exact computations and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state space is empty")]
    EmptyStateSpace,
    #[error("row {row} of the {what} kernel sums to {sum}, expected {expected}")]
    RowSumViolation {
        what: &'static str,
        row: usize,
        sum: f64,
        expected: &'static str,
    },
    #[error("kernel entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("state {0} has no offspring law")]
    MissingOffspringLaw(usize),
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("green function diverges: spectral radius estimate {radius} is not below {threshold}")]
    DivergentGreen { radius: f64, threshold: f64 },
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("offspring law has zero mean")]
    ZeroMeanOffspring,
    #[error("not a norming region: states {unreachable:?} cannot reach it")]
    NotNormingRegion { unreachable: Vec<usize> },
    #[error("the set B is empty")]
    EmptySet,
    #[error("unknown label {0}")]
    UnknownLabel(u64),
    #[error("forest does not hit B")]
    NoEntrance,
    #[error("invalid spine: {0}")]
    InvalidSpine(String),
    #[error("measure is not excessive: (nu Q)({state}) exceeds nu({state}) by {excess}")]
    NotExcessive { state: usize, excess: f64 },
    #[error("measure vanishes at state {0}")]
    ZeroMassState(usize),
    #[error("entrance measure has zero total mass")]
    ZeroEntranceMass,
    #[error("backward path did not terminate within the caps (nu has an invariant part)")]
    BackwardNotAlmostSurelyFinite,
    #[error("intensity operator is not sub-Markovian: m({state}) = {mean} > 1")]
    NotSubMarkovian { state: usize, mean: f64 },
    #[error("enumeration budget of {0} shapes exceeded")]
    BudgetExceeded(usize),
    #[error("encoding mismatch: {0}")]
    EncodingMismatch(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Errors that signal a violated numeric precondition of the model.
    pub fn is_numeric_precondition(&self) -> bool {
        matches!(
            self,
            Error::DivergentGreen { .. }
                | Error::NotExcessive { .. }
                | Error::NotSubMarkovian { .. }
                | Error::NotNormingRegion { .. }
                | Error::ZeroMeanOffspring
                | Error::ZeroEntranceMass
                | Error::ZeroMassState(_)
                | Error::SolveFailure(_)
                | Error::BackwardNotAlmostSurelyFinite
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
