use std::io;
use std::path::{Path, PathBuf};

use credit_audit_core::Error as CoreError;
use serde_json::json;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("missing input {}: {detail}", path.display())]
    MissingInput { path: PathBuf, detail: String },
    #[error("missing rate table {}: {detail}", path.display())]
    MissingRate { path: PathBuf, detail: String },
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn parse(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Opening an input: a missing file is a missing input, anything else
    /// an IO failure.
    pub fn open(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            CliError::MissingInput {
                path: path.to_path_buf(),
                detail: "file not found".into(),
            }
        } else {
            CliError::io(format!("reading {}", path.display()), source)
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(CoreError::MissingRate(_)) | CliError::MissingRate { .. } => "MissingRate",
            CliError::Core(_) => "InvariantViolation",
            CliError::MissingInput { .. } => "MissingInput",
            CliError::Parse { .. } => "ParseError",
            CliError::Config(_) => "InvalidConfig",
            CliError::Validation(_) => "ValidationFailed",
            CliError::Io { .. } => "IoError",
            CliError::Internal(_) => "Internal",
        }
    }

    /// 0 success, 1 invariant or validation failure, 2 missing input,
    /// 3 internal error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::MissingRate(_))
            | CliError::MissingRate { .. }
            | CliError::MissingInput { .. } => 2,
            CliError::Core(_) | CliError::Parse { .. } | CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Io { .. } | CliError::Internal(_) => 3,
        }
    }

    /// Single-line JSON object written to stderr.
    pub fn to_json(&self) -> String {
        let path = match self {
            CliError::MissingInput { path, .. } | CliError::MissingRate { path, .. } | CliError::Parse { path, .. } => {
                Some(path.display().to_string())
            }
            _ => None,
        };
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
                "path": path,
            }
        })
        .to_string()
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("json: {e}"))
    }
}
