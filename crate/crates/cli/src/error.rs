use asmplan::backend::TransportError;
use asmplan::evalharness::EvalError;
use asmplan::kgraph::KgError;
use asmplan::linebalance::BalanceError;
use asmplan::orchestrator::{PlanError, ReasonerError};
use asmplan::retrieval::RetrievalError;
use asmplan::scenegraph::SceneError;
use thiserror::Error;

/// Failure of one command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or backend configuration.
    #[error("{0}")]
    Usage(String),
    /// An input file could not be read or parsed.
    #[error("{0}")]
    Input(String),
    /// The command ran but produced no acceptable result.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Transport(TransportError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Failed(_) => 3,
            CliError::Transport(_) => 4,
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Transport(other),
        }
    }
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BalanceError> for CliError {
    fn from(e: BalanceError) -> Self {
        match e {
            BalanceError::TooLarge { .. } | BalanceError::ZeroBudget => CliError::Usage(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Weights { .. } => CliError::Usage(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Transport(t) => t.into(),
            RetrievalError::Graph(g) => g.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Transport(t) | PlanError::Reasoner(ReasonerError::Transport(t)) => t.into(),
            PlanError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}
