use std::path::PathBuf;

use saddle_core::diffusion::DiffusionError;
use saddle_core::objective::ObjectiveError;
use saddle_core::optim::OptimError;
use saddle_core::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown scenario `{0}` (see `saddle-scope list`)")]
    UnknownScenario(String),
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("scenario `{scenario}` has no parameter `{key}`")]
    UnknownKey { scenario: String, key: String },
    #[error("parameter `{key}` = `{value}`: {message}")]
    BadValue { key: String, value: String, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Serialize(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Serialize(e.to_string())
    }
}
