use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use tracelens_core::ingest::IngestError;
use tracelens_core::synth::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad flags, bad config, or input that fails validation.
    Usage,
    Io,
    /// A result failed its own consistency checks.
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Io => 3,
            ErrorKind::Internal => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Offending config key, for spec validation failures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, message: message.into(), path: None, key: None }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Internal, message: message.into(), path: None, key: None }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError { kind: ErrorKind::Io, message: err.to_string(), path: Some(path.to_path_buf()), key: None }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Single-line JSON for standard error.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a CliError,
            exit_code: i32,
        }
        serde_json::to_string(&Line { error: self, exit_code: self.exit_code() }).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}: {}", p.display(), self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { path, source } => CliError::io(&path, source),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { path, source } => CliError::io(&path, source),
            SynthError::InvalidSpec { key, message } => {
                CliError { kind: ErrorKind::Usage, message: format!("`{key}`: {message}"), path: None, key: Some(key) }
            }
            other => CliError::usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
