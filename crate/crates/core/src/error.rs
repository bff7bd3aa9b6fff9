use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidModel(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("leading coefficient must be 1 for a unit lower-triangular solve, got {0}")]
    NotUnitLeading(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("optimizer produced no finite fitness after {evaluations} evaluations")]
    NonFiniteFitness { evaluations: usize },

    #[error("closed loop is unstable: {0}")]
    Unstable(String),

    #[error("unknown benchmark problem {0} (expected 1..=10)")]
    UnknownBenchmark(usize),

    #[error("unknown case study `{0}`")]
    UnknownCaseStudy(String),
}
