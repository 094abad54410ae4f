use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid model: {0}")]
    Model(String),
    #[error("linear solver stagnated: {0}")]
    LinearSolveBreakdown(String),
    #[error("maximum iterations exceeded ({0})")]
    MaxIterationsExceeded(usize),
    #[error("invalid control setup: {0}")]
    Control(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("test field rejected: {0}")]
    PoolField(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
