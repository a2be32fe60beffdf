use thiserror::Error;

/// Failures of a command or experiment run, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Every problem found in a configuration, one per entry.
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// A library call failed; `stage` names the step that was running.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: freetrans::Error,
    },

    /// A computed check did not hold.
    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 0 pass, 1 assertion failure, 2 configuration error, 3 numeric error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 1,
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } if source.is_configuration() => 2,
            CliError::Stage { .. } | CliError::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a stage name to library errors.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
}

impl<T> StageExt<T> for freetrans::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage: stage.to_string(), source })
    }
}
