use serde::{Deserialize, Serialize};

/// Pipeline step an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Stability,
    Reasoning,
    Density,
    Selection,
    Store,
    Bench,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Error body shared by the library, the CLI and the REST API.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{stage}/{code}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub code: String,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, code: impl Into<String>, message: impl Into<String>) -> Self {
        PipelineError { stage, code: code.into(), message: message.into() }
    }

    pub fn not_found(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(stage, "not_found", message)
    }
}
