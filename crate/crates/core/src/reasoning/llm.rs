//! Remote chat-completion reasoner.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::summary::SceneSummary;
use super::{ReasonerMetrics, ReasoningError, ReceptacleDecision};
use crate::scene::TaskDescription;

pub const ENV_API_KEY: &str = "PLACEWISE_LLM_API_KEY";
pub const ENV_ENDPOINT: &str = "PLACEWISE_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "PLACEWISE_LLM_MODEL";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const DEFAULT_SYSTEM: &str = include_str!("../../prompts/system.txt");
const DEFAULT_USER: &str = include_str!("../../prompts/user.txt");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatCompletion {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One request/response exchange. Implementations must be safe to share
/// across threads; each call is independent.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest, timeout: Duration) -> Result<ChatCompletion, String>;
}

/// Chat-completions over HTTP with a bearer credential.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, ReasoningError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| ReasoningError::Config(format!("http client: {e}")))?;
        Ok(HttpTransport { endpoint: endpoint.into(), api_key, client })
    }
}

/// Pulls the message text and token usage out of a chat-completions response body.
pub fn parse_chat_response(body: &Value) -> Result<ChatCompletion, String> {
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())?;
    let usage = |k: &str| body.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(ChatCompletion {
        content: content.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
    })
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest, timeout: Duration) -> Result<ChatCompletion, String> {
        let mut req = self.client.post(&self.endpoint).timeout(timeout).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| format!("status {status}: {e}"))?;
        if !status.is_success() {
            return Err(format!("status {status}: {body}"));
        }
        parse_chat_response(&body)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub system: String,
    pub user: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig { system: DEFAULT_SYSTEM.to_string(), user: DEFAULT_USER.to_string() }
    }
}

impl PromptConfig {
    /// Reads `system.txt` and `user.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, ReasoningError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| ReasoningError::Config(format!("{}: {e}", dir.join(name).display())))
        };
        Ok(PromptConfig { system: read("system.txt")?, user: read("user.txt")? })
    }

    pub fn render(&self, summary: &SceneSummary, task: &TaskDescription) -> Vec<ChatMessage> {
        let fill = |t: &str| {
            t.replace("{summary}", &summary_text(summary))
                .replace("{task}", &task.text)
                .replace("{candidates}", &summary.receptacles.join(", "))
        };
        vec![
            ChatMessage { role: "system".into(), content: fill(&self.system) },
            ChatMessage { role: "user".into(), content: fill(&self.user) },
        ]
    }
}

fn summary_text(summary: &SceneSummary) -> String {
    let objects: Vec<Value> = summary
        .objects
        .iter()
        .map(|o| {
            json!({"id": o.id, "label": o.label, "attributes": o.attributes,
                   "center": o.center.map(round_mm), "size": o.size.map(round_mm)})
        })
        .collect();
    json!({"objects": objects, "placing": {"label": summary.placement.label, "attributes": summary.placement.attributes}})
        .to_string()
}

fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#' || c == '-'
}

/// Known ids in order of first appearance, matched on identifier boundaries.
pub fn extract_ids(completion: &str, candidates: &[String]) -> Vec<String> {
    let mut found: Vec<(usize, &String)> = Vec::new();
    for id in candidates {
        if id.is_empty() {
            continue;
        }
        let hit = completion.match_indices(id.as_str()).find(|(at, _)| {
            let before = completion[..*at].chars().next_back();
            let after = completion[at + id.len()..].chars().next();
            !before.is_some_and(is_id_char) && !after.is_some_and(is_id_char)
        });
        if let Some((at, _)) = hit {
            found.push((at, id));
        }
    }
    found.sort_by_key(|(at, _)| *at);
    found.into_iter().map(|(_, id)| id.clone()).collect()
}

pub struct RemoteChatClient {
    transport: Box<dyn ChatTransport>,
    pub model: String,
    pub timeout: Duration,
    /// Extra attempts after a transport failure.
    pub retries: u32,
}

impl RemoteChatClient {
    pub fn new(transport: Box<dyn ChatTransport>, model: impl Into<String>) -> Self {
        RemoteChatClient { transport, model: model.into(), timeout: DEFAULT_TIMEOUT, retries: 1 }
    }

    /// HTTP client from the environment; the credential is only read from there.
    pub fn from_env(endpoint: Option<&str>, model: Option<&str>) -> Result<Self, ReasoningError> {
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        let endpoint = endpoint
            .map(str::to_string)
            .or_else(|| std::env::var(ENV_ENDPOINT).ok())
            .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
        let model =
            model.map(str::to_string).or_else(|| std::env::var(ENV_MODEL).ok()).unwrap_or_else(|| DEFAULT_MODEL.into());
        if key.is_none() && endpoint == DEFAULT_ENDPOINT {
            return Err(ReasoningError::Config(format!("{ENV_API_KEY} is not set")));
        }
        Ok(Self::new(Box::new(HttpTransport::new(endpoint, key)?), model))
    }

    pub fn chat(&self, messages: Vec<ChatMessage>) -> Result<ChatCompletion, ReasoningError> {
        let request = ChatRequest { model: self.model.clone(), messages, temperature: 0.0 };
        let attempts = self.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.transport.complete(&request, self.timeout) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    log::warn!("chat attempt {attempt}/{attempts} failed: {e}");
                    last = e;
                }
            }
        }
        Err(ReasoningError::Remote { message: last, attempts })
    }
}

pub fn llm_reason(
    client: &RemoteChatClient,
    summary: &SceneSummary,
    task: &TaskDescription,
    prompt: &PromptConfig,
) -> Result<ReceptacleDecision, ReasoningError> {
    if summary.receptacles.is_empty() {
        return Err(ReasoningError::NoReceptacles);
    }
    let start = Instant::now();
    let completion = client.chat(prompt.render(summary, task))?;
    let ids = extract_ids(&completion.content, &summary.receptacles);
    if ids.is_empty() {
        return Err(ReasoningError::Parse { completion: completion.content });
    }
    Ok(ReceptacleDecision {
        receptacle_ids: ids,
        rationale: completion.content.trim().to_string(),
        reasoner: "llm".into(),
        metrics: ReasonerMetrics {
            wall_time: start.elapsed().as_secs_f64(),
            prompt_tokens: completion.prompt_tokens,
            completion_tokens: completion.completion_tokens,
        },
    })
}
