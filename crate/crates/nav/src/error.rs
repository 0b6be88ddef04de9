use std::path::PathBuf;

use ogm_cbf_core::controller::ControllerError;
use ogm_cbf_core::ogm::OgmError;
use ogm_cbf_core::shaping::FieldError;
use ogm_cbf_core::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum NavError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("mapping: {0}")]
    Ogm(#[from] OgmError),
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("episode ended at step {ended} before step {requested}")]
    StepNotReached { requested: usize, ended: usize },
}

impl NavError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> NavError {
        let path = path.into();
        move |source| NavError::Io { path, source }
    }
}
