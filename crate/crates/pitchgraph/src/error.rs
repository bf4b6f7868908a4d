use std::path::PathBuf;

/// Everything a pipeline run can fail with. [`PipelineError::exit_code`] maps
/// dependency problems to 2 and all other failures to 1.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Core(#[from] pitchgraph_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}` needs the `{missing}` artifact at {}; run `pitchgraph {missing}` first", path.display())]
    Dependency { stage: &'static str, missing: &'static str, path: PathBuf },
    #[error("cache directory {} is locked by another run (remove {} if that run is gone)", .0.parent().unwrap_or(.0).display(), .0.display())]
    Locked(PathBuf),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Dependency { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        PipelineError::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
