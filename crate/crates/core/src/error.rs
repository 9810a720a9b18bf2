use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid bound problem: {0}")]
    InvalidProblem(String),

    /// A line search or inversion exhausted its iteration budget, or the
    /// objective stopped being finite.
    #[error("optimizer did not converge in {stage} after {iterations} iterations")]
    OptimizerDidNotConverge {
        stage: &'static str,
        iterations: usize,
    },

    #[error("subset is empty")]
    EmptySubset,

    #[error("index {index} is out of range for a study of {len} parameters")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("faithfulness level {0} is outside [1/2, 1]")]
    InvalidFaithfulness(f64),

    #[error("replicate average for parameter {index} is exactly zero")]
    DegenerateAverage { index: usize },

    #[error("invalid study: {0}")]
    InvalidStudy(String),

    #[error("confidence scores are required but missing")]
    MissingScores,

    #[error("all confidence scores are equal; no thresholds can be formed")]
    DegenerateScores,

    #[error("at least 2 replicates are required, got {0}")]
    InsufficientReplicates(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
