use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or range violation, prefixed with the offending field path.
    #[error("config error at {0}")]
    Config(String),

    #[error("numerical error in stage `{stage}`: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: bec_core::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Output { .. } => 3,
        }
    }
}

/// Wraps a core error, keeping the innermost stage tag or falling back to `stage`.
pub fn numerical(stage: &'static str) -> impl Fn(bec_core::Error) -> CliError {
    move |e| match e {
        bec_core::Error::Stage { stage, source } => CliError::Numerical {
            stage: stage.to_string(),
            source: *source,
        },
        other => CliError::Numerical {
            stage: stage.to_string(),
            source: other,
        },
    }
}
