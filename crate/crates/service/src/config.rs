//! Pipeline configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use placewise_core::density::{BlendConfig, KdeConfig, DEFAULT_MIN_SEPARATION};
use placewise_core::reasoning::{DEFAULT_RADIUS, DEFAULT_RECEPTACLE_LABELS};
use placewise_core::stability::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Stage};

pub const DEFAULT_SAMPLE_K: usize = 10;
pub const DEFAULT_RESOLUTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonerKind {
    #[default]
    Rule,
    Llm,
    LlmWithFallback,
    /// No receptacle reasoning; candidates follow the stability reward alone.
    StabilityOnly,
}

impl std::str::FromStr for ReasonerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown reasoner `{s}`; expected rule, llm, llm_with_fallback or stability_only"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Falls back to the endpoint environment variable, then the public default.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    /// Directory holding `system.txt` and `user.txt`; built-in prompts otherwise.
    pub prompt_dir: Option<PathBuf>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings { endpoint: None, model: None, timeout_secs: 30.0, retries: 1, prompt_dir: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sim: SimConfig,
    pub kde: KdeConfig,
    pub blend: BlendConfig,
    pub reasoner: ReasonerKind,
    pub sample_k: usize,
    pub min_separation: f64,
    pub seed: u64,
    /// Candidate lattice spacing, also used for exported density grids.
    pub resolution: f64,
    /// Distance from a chosen receptacle within which a point counts as reasonable.
    pub radius: f64,
    pub receptacle_labels: Vec<String>,
    pub llm: LlmSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sim: SimConfig::default(),
            kde: KdeConfig::default(),
            blend: BlendConfig::default(),
            reasoner: ReasonerKind::Rule,
            sample_k: DEFAULT_SAMPLE_K,
            min_separation: DEFAULT_MIN_SEPARATION,
            seed: 0,
            resolution: DEFAULT_RESOLUTION,
            radius: DEFAULT_RADIUS,
            receptacle_labels: DEFAULT_RECEPTACLE_LABELS.iter().map(|s| s.to_string()).collect(),
            llm: LlmSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| PipelineError::new(Stage::Config, "invalid_config", m);
        self.sim.validate().map_err(|e| cfg(e.to_string()))?;
        self.kde.validate().map_err(|e| cfg(e.to_string()))?;
        self.blend.validate().map_err(|e| cfg(e.to_string()))?;
        if self.sample_k == 0 {
            return Err(cfg("sample_k must be at least 1".into()));
        }
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return Err(cfg(format!("min_separation must be non-negative, got {}", self.min_separation)));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(cfg(format!("resolution must be positive, got {}", self.resolution)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(cfg(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.llm.timeout_secs.is_finite() && self.llm.timeout_secs > 0.0) {
            return Err(cfg(format!("llm.timeout_secs must be positive, got {}", self.llm.timeout_secs)));
        }
        Ok(())
    }

    /// Parses `text` as JSON when it starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let bad = |m: String| PipelineError::new(Stage::Config, "invalid_config", m);
        let cfg: PipelineConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| bad(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| bad(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::new(Stage::Config, "io", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Per-request adjustments accepted by the plan endpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanOverrides {
    pub beta: Option<f64>,
    pub sample_k: Option<usize>,
    pub seed: Option<u64>,
    pub reasoner: Option<ReasonerKind>,
    pub bandwidth: Option<f64>,
    pub min_separation: Option<f64>,
}

impl PlanOverrides {
    pub fn apply(&self, base: &PipelineConfig) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = base.clone();
        if let Some(b) = self.beta {
            cfg.blend.beta = b;
        }
        if let Some(k) = self.sample_k {
            cfg.sample_k = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.reasoner {
            cfg.reasoner = r;
        }
        if let Some(h) = self.bandwidth {
            cfg.kde.bandwidth = h;
        }
        if let Some(m) = self.min_separation {
            cfg.min_separation = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
