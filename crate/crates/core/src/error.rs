use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters or inconsistent shapes supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to read {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at round {round}, client {client}, step {step}: loss = {loss}")]
    Divergence {
        round: usize,
        client: usize,
        step: usize,
        loss: f64,
    },

    /// The loss evaluated to NaN or infinity outside of a federated round.
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(f64),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn ingest(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
