//! Which receptacles suit the task, and which stable points are near them.

mod llm;
mod rule;
mod summary;

pub use llm::{
    extract_ids, llm_reason, parse_chat_response, ChatCompletion, ChatMessage, ChatRequest, ChatTransport,
    HttpTransport, PromptConfig, RemoteChatClient, DEFAULT_ENDPOINT, DEFAULT_MODEL, DEFAULT_TIMEOUT, ENV_API_KEY,
    ENV_ENDPOINT, ENV_MODEL,
};
pub use rule::{resolve_similarity, rule_reason, similarity_attribute};
pub use summary::{
    receptacle_aabb, summarize_scene, tier_aabbs, ObjectDescriptor, PlacementDescriptor, SceneSummary, SummaryOptions,
    DEFAULT_RECEPTACLE_LABELS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};
use crate::scene::{Scene, TaskDescription};
use crate::stability::StableSet;

pub const DEFAULT_RADIUS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasoningError {
    #[error("scene has no receptacle candidates")]
    NoReceptacles,
    #[error("remote reasoner failed after {attempts} attempt(s): {message}")]
    Remote { message: String, attempts: u32 },
    #[error("completion names no known receptacle: {completion:?}")]
    Parse { completion: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("reasoner configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReasonerMetrics {
    /// Seconds.
    pub wall_time: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleDecision {
    /// Best first.
    pub receptacle_ids: Vec<String>,
    pub rationale: String,
    /// `rule`, `llm`, or `rule_fallback`.
    pub reasoner: String,
    pub metrics: ReasonerMetrics,
}

/// LLM decision, or the rule decision when the remote call or its parse fails
/// and `fallback` is set; the swallowed error is returned alongside. Token
/// counts of a failed remote call are not kept.
pub fn reason_with_fallback(
    client: &RemoteChatClient,
    summary: &SceneSummary,
    task: &TaskDescription,
    prompt: &PromptConfig,
    fallback: bool,
) -> Result<(ReceptacleDecision, Option<ReasoningError>), ReasoningError> {
    match llm_reason(client, summary, task, prompt) {
        Ok(d) => Ok((d, None)),
        Err(e @ (ReasoningError::Remote { .. } | ReasoningError::Parse { .. })) if fallback => {
            log::warn!("falling back to rule reasoner: {e}");
            Ok((rule_fallback(summary, task, &e)?, Some(e)))
        }
        Err(e) => Err(e),
    }
}

/// Rule decision labelled as standing in for a failed remote reasoner.
pub fn rule_fallback(
    summary: &SceneSummary,
    task: &TaskDescription,
    cause: &ReasoningError,
) -> Result<ReceptacleDecision, ReasoningError> {
    let mut d = rule_reason(summary, task)?;
    d.reasoner = "rule_fallback".into();
    d.rationale = format!("{} (remote reasoner unavailable: {cause})", d.rationale);
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleEntry {
    pub point: Vec3,
    /// 1 near a chosen receptacle, else 0.
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleSet {
    pub entries: Vec<ReceptacleEntry>,
    pub receptacle_ids: Vec<String>,
    pub radius: f64,
}

impl ReceptacleSet {
    pub fn count_reasonable(&self) -> usize {
        self.entries.iter().filter(|e| e.reward > 0.0).count()
    }
}

/// Marks each stable point whose distance to any chosen receptacle bound is within `radius`.
pub fn receptacle_points(
    stable: &StableSet,
    decision: &ReceptacleDecision,
    scene: &Scene,
    radius: f64,
) -> Result<ReceptacleSet, ReasoningError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ReasoningError::Contract(format!("radius must be positive, got {radius}")));
    }
    let bounds: Vec<Aabb> = decision
        .receptacle_ids
        .iter()
        .map(|id| receptacle_aabb(scene, id).ok_or_else(|| ReasoningError::Contract(format!("unknown receptacle {id}"))))
        .collect::<Result<_, _>>()?;
    let entries = stable
        .points()
        .map(|p| {
            let near = bounds.iter().any(|b| b.distance_to(p) <= radius);
            ReceptacleEntry { point: *p, reward: if near { 1.0 } else { 0.0 } }
        })
        .collect();
    Ok(ReceptacleSet { entries, receptacle_ids: decision.receptacle_ids.clone(), radius })
}
