//! Scene to ranked placement candidates, and re-simulation of a chosen one.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use placewise_core::density::{
    build_density, sample_candidates, BlendConfig, CandidateList, DensityError, DensityGrid, GridSpec, WeightedPoints,
};
use placewise_core::reasoning::{
    llm_reason, reason_with_fallback, receptacle_aabb, receptacle_points, rule_fallback, rule_reason,
    summarize_scene, PromptConfig, ReasonerMetrics, ReasoningError, ReceptacleDecision, ReceptacleEntry,
    ReceptacleSet, RemoteChatClient, SummaryOptions,
};
use placewise_core::scene::{generate_candidates, GridOptions, Scene, TaskDescription, ZMode};
use placewise_core::stability::{
    builtin_backend, is_stable, simulate_placement, OrientationTrace, QuasiStaticBackend, StableSet, SweepOutcome,
};
use placewise_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ReasonerKind};
use crate::error::{PipelineError, Stage};

const SWEEP_CACHE_CAPACITY: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Ok,
    /// The stability sweep kept no point.
    NoStablePlacement,
    /// Stable points exist but all carry zero weight.
    NoCandidates,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    /// Seconds spent in the sweep that produced the stable set; repeated plans
    /// on an unchanged scene reuse it and report its original cost.
    pub stability_seconds: f64,
    pub sweep_cached: bool,
    pub reasoning_seconds: f64,
    pub reasoning: ReasonerMetrics,
    pub density_seconds: f64,
    pub total_seconds: f64,
    /// Remote reasoner failure that the rule fallback covered.
    pub remote_error: Option<String>,
}

/// Where and how to fetch the density lattice of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRef {
    pub href: String,
    pub grid: GridSpec,
    pub support_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub run_id: String,
    pub status: PlanStatus,
    pub candidates: CandidateList,
    pub decision: Option<ReceptacleDecision>,
    pub stable_fraction: f64,
    pub stable_count: usize,
    pub point_count: usize,
    pub metrics: PlanMetrics,
    pub density: Option<DensityRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub rank: usize,
    pub point: Vec3,
    /// Re-simulated with the full perturbation schedule of the plan.
    pub stable: bool,
    /// `|q_w(final) - q_w(first)|` of the re-simulated trace.
    pub final_deviation: f64,
    pub max_deviation: f64,
    /// Within the plan radius of a ground-truth receptacle; `None` without ground truth.
    pub reasonable: Option<bool>,
}

/// Everything a plan produced, including what is needed to rebuild its density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanArtifacts {
    pub result: PlanResult,
    pub support: Option<WeightedPoints>,
    /// Sweep classification of each candidate, in rank order.
    pub candidate_stable: Vec<bool>,
}

pub struct CachedSweep {
    pub outcome: SweepOutcome,
    pub seconds: f64,
}

/// Runs plans. Shared across threads; sweeps of identical scene and
/// simulation settings are computed once.
pub struct Planner {
    backend: QuasiStaticBackend,
    chat: Option<RemoteChatClient>,
    chat_error: Option<String>,
    prompt: PromptConfig,
    cache: Mutex<HashMap<String, Arc<CachedSweep>>>,
}

impl Default for Planner {
    fn default() -> Self {
        Planner {
            backend: builtin_backend(),
            chat: None,
            chat_error: Some("no remote reasoner configured".into()),
            prompt: PromptConfig::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl Planner {
    /// Builds the remote client from the config and environment when possible.
    /// A missing credential is only an error once a plan asks for the LLM.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let mut p = Planner::default();
        if let Some(dir) = &cfg.llm.prompt_dir {
            p.prompt = PromptConfig::from_dir(dir).map_err(|e| PipelineError::new(Stage::Config, "prompt", e.to_string()))?;
        }
        match RemoteChatClient::from_env(cfg.llm.endpoint.as_deref(), cfg.llm.model.as_deref()) {
            Ok(mut c) => {
                c.timeout = Duration::from_secs_f64(cfg.llm.timeout_secs);
                c.retries = cfg.llm.retries;
                p.chat = Some(c);
                p.chat_error = None;
            }
            Err(e) => p.chat_error = Some(e.to_string()),
        }
        Ok(p)
    }

    pub fn with_chat_client(mut self, client: RemoteChatClient) -> Self {
        self.chat = Some(client);
        self.chat_error = None;
        self
    }

    pub fn with_prompt(mut self, prompt: PromptConfig) -> Self {
        self.prompt = prompt;
        self
    }

    /// Stability sweep over the surface-snapped lattice, memoized.
    pub fn sweep(&self, scene: &Scene, cfg: &PipelineConfig) -> Result<(Arc<CachedSweep>, bool), PipelineError> {
        let key = serde_json::to_string(&(scene, &cfg.sim, cfg.resolution)).expect("scene and config serialize");
        if let Some(hit) = self.cache.lock().expect("sweep cache lock").get(&key) {
            return Ok((hit.clone(), true));
        }
        let grid = generate_candidates(scene, &GridOptions::new(cfg.resolution, ZMode::SurfaceSnap))
            .map_err(|e| PipelineError::new(Stage::Ingest, "candidates", e.to_string()))?;
        let start = Instant::now();
        let outcome = if grid.is_empty() {
            SweepOutcome { stable: StableSet::default(), traces: Vec::new(), diagnostics: Default::default() }
        } else {
            placewise_core::stability::sweep_stability(&self.backend, scene, &grid, &cfg.sim)
                .map_err(|e| PipelineError::new(Stage::Stability, "sweep", e.to_string()))?
        };
        let entry = Arc::new(CachedSweep { outcome, seconds: start.elapsed().as_secs_f64() });
        let mut cache = self.cache.lock().expect("sweep cache lock");
        if cache.len() >= SWEEP_CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(key, entry.clone());
        Ok((entry, false))
    }

    fn reason(
        &self,
        scene: &Scene,
        task: &TaskDescription,
        cfg: &PipelineConfig,
        metrics: &mut PlanMetrics,
    ) -> Result<Option<ReceptacleDecision>, PipelineError> {
        let summary = summarize_scene(scene, &SummaryOptions { receptacle_labels: cfg.receptacle_labels.clone() });
        let fail = |e: ReasoningError| PipelineError::new(Stage::Reasoning, reasoning_code(&e), e.to_string());
        let decision = match (cfg.reasoner, &self.chat) {
            (ReasonerKind::StabilityOnly, _) => return Ok(None),
            (ReasonerKind::Rule, _) => rule_reason(&summary, task).map_err(fail)?,
            (ReasonerKind::Llm, Some(c)) => llm_reason(c, &summary, task, &self.prompt).map_err(fail)?,
            (ReasonerKind::LlmWithFallback, Some(c)) => {
                let (d, cause) = reason_with_fallback(c, &summary, task, &self.prompt, true).map_err(fail)?;
                metrics.remote_error = cause.map(|e| e.to_string());
                d
            }
            (ReasonerKind::Llm, None) => {
                let msg = self.chat_error.clone().unwrap_or_default();
                return Err(PipelineError::new(Stage::Reasoning, "llm_unavailable", msg));
            }
            (ReasonerKind::LlmWithFallback, None) => {
                let cause = ReasoningError::Config(self.chat_error.clone().unwrap_or_default());
                metrics.remote_error = Some(cause.to_string());
                rule_fallback(&summary, task, &cause).map_err(fail)?
            }
        };
        Ok(Some(decision))
    }

    pub fn plan(
        &self,
        scene: &Scene,
        task: &TaskDescription,
        cfg: &PipelineConfig,
    ) -> Result<PlanArtifacts, PipelineError> {
        cfg.validate()?;
        scene.validate().map_err(|e| PipelineError::new(Stage::Ingest, "invalid_scene", e.to_string()))?;
        let run_id = uuid::Uuid::new_v4().to_string();
        let mut metrics = PlanMetrics::default();

        let (sweep, cached) = self.sweep(scene, cfg)?;
        metrics.stability_seconds = sweep.seconds;
        metrics.sweep_cached = cached;
        let stable = &sweep.outcome.stable;
        let point_count = sweep.outcome.traces.len();
        let mut result = PlanResult {
            run_id,
            status: PlanStatus::Ok,
            candidates: CandidateList {
                candidates: Vec::new(),
                seed: cfg.seed,
                min_separation: cfg.min_separation,
                short: true,
            },
            decision: None,
            stable_fraction: sweep.outcome.diagnostics.stable_fraction(),
            stable_count: stable.len(),
            point_count,
            metrics: PlanMetrics::default(),
            density: None,
        };
        if stable.is_empty() {
            result.status = PlanStatus::NoStablePlacement;
            metrics.total_seconds = metrics.stability_seconds;
            result.metrics = metrics;
            return Ok(PlanArtifacts { result, support: None, candidate_stable: Vec::new() });
        }

        let start = Instant::now();
        let decision = self.reason(scene, task, cfg, &mut metrics)?;
        let (receptacles, blend) = match &decision {
            Some(d) => (
                receptacle_points(stable, d, scene, cfg.radius)
                    .map_err(|e| PipelineError::new(Stage::Reasoning, reasoning_code(&e), e.to_string()))?,
                cfg.blend,
            ),
            None => (
                ReceptacleSet {
                    entries: stable.points().map(|p| ReceptacleEntry { point: *p, reward: 0.0 }).collect(),
                    receptacle_ids: Vec::new(),
                    radius: cfg.radius,
                },
                BlendConfig { beta: 1.0 },
            ),
        };
        metrics.reasoning_seconds = start.elapsed().as_secs_f64();
        metrics.reasoning = decision.as_ref().map(|d| d.metrics.clone()).unwrap_or_default();
        result.decision = decision;

        let start = Instant::now();
        let density_err = |e: DensityError| PipelineError::new(Stage::Density, "density", e.to_string());
        let field = build_density(stable, &receptacles, &blend, &cfg.kde, None).map_err(density_err)?;
        let support = field.support.clone();
        match sample_candidates(&field, cfg.sample_k, cfg.min_separation, cfg.seed) {
            Ok(list) => result.candidates = list,
            Err(DensityError::NoCandidates) => result.status = PlanStatus::NoCandidates,
            Err(e) => return Err(density_err(e)),
        }
        metrics.density_seconds = start.elapsed().as_secs_f64();
        metrics.total_seconds = metrics.stability_seconds + metrics.reasoning_seconds + metrics.density_seconds;
        result.metrics = metrics;
        result.density = Some(DensityRef {
            href: format!("/runs/{}/density", result.run_id),
            grid: density_grid_spec(scene, cfg)?,
            support_size: support.len(),
        });

        let included: HashMap<[u64; 3], bool> = sweep
            .outcome
            .diagnostics
            .rows
            .iter()
            .map(|r| ([r.x.to_bits(), r.y.to_bits(), r.z.to_bits()], r.included))
            .collect();
        let candidate_stable = result
            .candidates
            .candidates
            .iter()
            .map(|c| included.get(&bits(&c.point)).copied().unwrap_or(false))
            .collect();
        Ok(PlanArtifacts { result, support: Some(support), candidate_stable })
    }

    /// Placement trial at one point with the plan's simulation settings.
    pub fn simulate(&self, scene: &Scene, point: &Vec3, cfg: &PipelineConfig) -> Result<OrientationTrace, PipelineError> {
        simulate_placement(&self.backend, scene, point, &cfg.sim)
            .map_err(|e| PipelineError::new(Stage::Selection, "simulation", e.to_string()))
    }

    /// Re-simulates the candidate of the given rank and scores it.
    pub fn evaluate_selection(
        &self,
        scene: &Scene,
        cfg: &PipelineConfig,
        result: &PlanResult,
        rank: usize,
        ground_truth: &[String],
    ) -> Result<PlacementOutcome, PipelineError> {
        let cand = result
            .candidates
            .candidates
            .iter()
            .find(|c| c.rank == rank)
            .ok_or_else(|| PipelineError::not_found(Stage::Selection, format!("run has no candidate of rank {rank}")))?;
        let trace = self.simulate(scene, &cand.point, cfg)?;
        let first = trace.samples.first().copied().unwrap_or(1.0);
        let last = trace.samples.last().copied().unwrap_or(first);
        let reasonable = if ground_truth.is_empty() {
            None
        } else {
            Some(near_any(scene, ground_truth, &cand.point, cfg.radius)?)
        };
        Ok(PlacementOutcome {
            rank,
            point: cand.point,
            stable: is_stable(&trace, &cfg.sim),
            final_deviation: (last - first).abs(),
            max_deviation: trace.max_deviation(),
            reasonable,
        })
    }
}

fn bits(p: &Vec3) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

fn reasoning_code(e: &ReasoningError) -> &'static str {
    match e {
        ReasoningError::NoReceptacles => "no_receptacles",
        ReasoningError::Remote { .. } => "remote",
        ReasoningError::Parse { .. } => "parse",
        ReasoningError::Contract(_) => "contract",
        ReasoningError::Config(_) => "config",
    }
}

/// True when `point` lies within `radius` of any listed receptacle bound.
pub fn near_any(scene: &Scene, ids: &[String], point: &Vec3, radius: f64) -> Result<bool, PipelineError> {
    for id in ids {
        let b = receptacle_aabb(scene, id)
            .ok_or_else(|| PipelineError::new(Stage::Ingest, "unknown_receptacle", format!("unknown receptacle {id}")))?;
        if b.distance_to(point) <= radius {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Lattice used for density export: the workspace at the candidate resolution.
pub fn density_grid_spec(scene: &Scene, cfg: &PipelineConfig) -> Result<GridSpec, PipelineError> {
    GridSpec::covering(&scene.workspace, cfg.resolution).map_err(|e| PipelineError::new(Stage::Density, "grid", e.to_string()))
}

/// Evaluates a stored support on its lattice.
pub fn render_density(support: &WeightedPoints, cfg: &PipelineConfig, spec: GridSpec) -> Result<DensityGrid, PipelineError> {
    let field = placewise_core::density::DensityField::new(support.clone(), cfg.kde)
        .and_then(|f| f.with_grid(spec))
        .map_err(|e| PipelineError::new(Stage::Density, "grid", e.to_string()))?;
    Ok(field.grid.expect("grid was requested"))
}
