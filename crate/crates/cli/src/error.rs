use rkl::error::Error;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: data error: {cause}")]
    Data { module: &'static str, cause: String },
    #[error("{module}: numeric failure: {cause}")]
    Numeric { module: &'static str, cause: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Numeric { .. } => 4,
        }
    }

    /// Classify a library error raised inside `module`.
    pub fn from_core(module: &'static str, err: Error) -> Self {
        let cause = err.to_string();
        match err {
            Error::InvalidParameter { .. } => CliError::Config(format!("{module}: {cause}")),
            Error::InvalidDataset(_) | Error::DimensionMismatch { .. } | Error::Parse { .. } | Error::Io(_) => {
                CliError::Data { module, cause }
            }
            Error::StalePlan { .. }
            | Error::InfeasibleRadius { .. }
            | Error::UnstableTimeStep { .. }
            | Error::NotConverged { .. } => CliError::Numeric { module, cause },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, module, cause) = match self {
            CliError::Config(c) => ("config", "cli", c.as_str()),
            CliError::Data { module, cause } => ("data", *module, cause.as_str()),
            CliError::Numeric { module, cause } => ("numeric", *module, cause.as_str()),
        };
        json!({ "error": { "kind": kind, "module": module, "cause": cause, "exit_code": self.exit_code() } })
    }
}

/// Attach a module name to library results.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for rkl::error::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(module, e))
    }
}
