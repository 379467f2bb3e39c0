use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::ConfigIssue;

#[derive(Debug)]
pub enum LabError {
    Config(Vec<ConfigIssue>),
    Io { path: PathBuf, source: io::Error },
    /// A numerical module failed; `module` names it, `context` says where.
    Core { module: &'static str, context: String, source: carlab_core::Error },
    Csv { path: PathBuf, message: String },
    Usage(String),
}

impl LabError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        LabError::Io { path: path.to_path_buf(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Config(_) => "config",
            LabError::Io { .. } => "io",
            LabError::Core { .. } => "core",
            LabError::Csv { .. } => "csv",
            LabError::Usage(_) => "usage",
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            LabError::Config(issues) => {
                v["issues"] = issues.iter().map(|i| serde_json::json!({ "keys": i.keys, "message": i.message })).collect();
            }
            LabError::Core { module, context, .. } => {
                v["module"] = (*module).into();
                v["context"] = context.clone().into();
            }
            _ => {}
        }
        v
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(issues) => {
                write!(f, "{} configuration error(s)", issues.len())?;
                for i in issues {
                    write!(f, "; {i}")?;
                }
                Ok(())
            }
            LabError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            LabError::Core { module, context, source } => write!(f, "{module} ({context}): {source}"),
            LabError::Csv { path, message } => write!(f, "{}: {message}", path.display()),
            LabError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for LabError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            LabError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Attaches module and context to core results.
pub trait CoreContext<T> {
    fn ctx(self, module: &'static str, context: impl Into<String>) -> Result<T, LabError>;
}

impl<T> CoreContext<T> for carlab_core::Result<T> {
    fn ctx(self, module: &'static str, context: impl Into<String>) -> Result<T, LabError> {
        self.map_err(|source| LabError::Core { module, context: context.into(), source })
    }
}
