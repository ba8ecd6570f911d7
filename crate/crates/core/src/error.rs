use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("category scheme needs at least one proper category")]
    EmptyScheme,
    #[error("duplicate category name `{0}`")]
    DuplicateCategory(String),
    #[error("task `{task_id}` response #{position}: answer index {answer} is outside 0..{categories}")]
    InvalidAnswer {
        task_id: String,
        position: usize,
        answer: usize,
        categories: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("Dirichlet parameter #{index} = {value} is not finite and positive")]
    InvalidParameter { index: usize, value: f64 },
    #[error("invalid soft label: {0}")]
    InvalidSoftLabel(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("{groups} groups cannot fill {splits} non-empty splits")]
    NotEnoughGroups { groups: usize, splits: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("ambiguity is undefined for a single proper category")]
    AmbiguityUndefined,
    #[error("task `{0}` has no simulated soft label")]
    MissingTrueLabel(String),
    #[error("task `{0}` has no responses")]
    EmptyResponses(String),
    #[error("loss became NaN at iteration {iteration} (example #{example})")]
    NanLoss { iteration: usize, example: usize },
}
