use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("negative timestamp {0}")]
    NegativeTimestamp(i64),
    #[error("user {0} follows itself")]
    SelfFollow(u64),
    #[error("beauty {0} outside [0, 1]")]
    BeautyOutOfRange(f64),
    #[error("duplicate photo id {0}")]
    DuplicatePhoto(u64),
    #[error("unknown user {0}")]
    UnknownUser(u64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("quality probabilities sum to {0}, expected 1")]
    TripleNotNormalized(f64),
    #[error("grade {0} outside 1..=5")]
    InvalidGrade(i64),
    #[error("ratings matrix is incomplete: {0}")]
    IncompleteRatings(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("non-finite or negative value {0}")]
    InvalidValue(f64),
    #[error("{0} is undefined for zero variance")]
    ZeroVariance(&'static str),
    #[error("all values are zero")]
    AllZero,
    #[error("{0} is undefined: denominator is zero")]
    ZeroDenominator(&'static str),
    #[error("covariate {0} cannot be balanced: treated group has zero variance and a different mean")]
    Unbalanceable(usize),
    #[error("control group ({control}) must be at least twice the treated group ({treated})")]
    ControlTooSmall { treated: usize, control: usize },
    #[error("balancing pruned the control group to {control}, below the treated size {treated}; restart with a different seed control group")]
    BalanceRestart { treated: usize, control: usize },
    #[error("K={k} exceeds the number of points {n}")]
    TooManyClusters { k: usize, n: usize },
    #[error("user {0} has no beauty profile")]
    NoProfile(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
