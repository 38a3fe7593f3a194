//! Scenario suites: repeated plans with automatic rank-1 selection.

use std::path::{Path, PathBuf};

use placewise_core::reasoning::receptacle_aabb;
use placewise_core::scene::{parse_scene, ParseMode, Scene, SimilarityHint, TaskDescription};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ReasonerKind};
use crate::error::{PipelineError, Stage};
use crate::pipeline::{PlanStatus, Planner};

pub const DEFAULT_REPETITIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioManifest {
    pub id: String,
    /// Scene document, relative to the manifest file.
    pub scene: PathBuf,
    pub task: String,
    #[serde(default)]
    pub similarity_hint: SimilarityHint,
    #[serde(default)]
    pub ground_truth: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub manifest: ScenarioManifest,
    pub scene: Scene,
}

impl Scenario {
    pub fn task(&self) -> TaskDescription {
        TaskDescription::new(self.manifest.task.clone()).with_hint(self.manifest.similarity_hint)
    }
}

fn bench_err(code: &str, message: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Bench, code, message)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, PipelineError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| bench_err("io", format!("{}: {e}", p.display())));
    let manifest: ScenarioManifest = serde_json::from_str(&read(path)?)
        .map_err(|e| bench_err("invalid_scenario", format!("{}: {e}", path.display())))?;
    let scene_path = path.parent().unwrap_or(Path::new(".")).join(&manifest.scene);
    let scene = parse_scene(&read(&scene_path)?, ParseMode::Strict)
        .map_err(|e| PipelineError::new(Stage::Ingest, "invalid_scene", format!("{}: {e}", scene_path.display())))?
        .scene;
    if manifest.ground_truth.is_empty() {
        return Err(bench_err("invalid_scenario", format!("scenario {} declares no ground truth", manifest.id)));
    }
    if let Some(bad) = manifest.ground_truth.iter().find(|id| receptacle_aabb(&scene, id).is_none()) {
        return Err(bench_err("invalid_scenario", format!("scenario {}: unknown ground-truth receptacle {bad}", manifest.id)));
    }
    Ok(Scenario { manifest, scene })
}

/// Every `*.json` manifest in `dir`, in file-name order.
pub fn load_suite(dir: &Path) -> Result<Vec<Scenario>, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|e| bench_err("io", format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(bench_err("empty_suite", format!("no scenario manifests in {}", dir.display())));
    }
    paths.iter().map(|p| load_scenario(p)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub repetitions: usize,
    pub sta_sr: f64,
    pub rea_sr: f64,
    pub stable_fraction: f64,
    pub candidates_min: usize,
    pub candidates_max: usize,
    /// Rank-1 re-simulations that disagree with the sweep classification.
    pub disagreements: usize,
    pub tokens_mean: f64,
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub repetitions: usize,
    pub sample_k: usize,
    pub base_seed: u64,
    pub reasoner: ReasonerKind,
    pub config: PipelineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metadata: BenchMetadata,
    pub rows: Vec<ScenarioRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON with the wall-time columns removed.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.timing = None;
        }
        r.to_json()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>5} {:>7} {:>7} {:>8} {:>18} {:>8}\n",
            "scenario", "reps", "Sta.", "Rea.", "P_s/P", "time (s)", "tokens"
        );
        for r in &self.rows {
            let time = r.timing.as_ref().map_or("-".to_string(), |t| format!("{:.3} ± {:.3}", t.mean_seconds, t.std_seconds));
            out.push_str(&format!(
                "{:<24} {:>5} {:>7.3} {:>7.3} {:>8.3} {:>18} {:>8.1}\n",
                r.scenario, r.repetitions, r.sta_sr, r.rea_sr, r.stable_fraction, time, r.tokens_mean
            ));
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Plans every scenario `repetitions` times with seed `cfg.seed + rep`,
/// re-simulates the rank-1 candidate and aggregates the outcomes.
pub fn run_benchmark(
    planner: &Planner,
    suite: &[Scenario],
    repetitions: usize,
    cfg: &PipelineConfig,
) -> Result<BenchReport, PipelineError> {
    if repetitions == 0 {
        return Err(bench_err("invalid_repetitions", "repetitions must be at least 1"));
    }
    cfg.validate()?;
    let mut rows = Vec::with_capacity(suite.len());
    for sc in suite {
        let task = sc.task();
        let (mut stable, mut reasonable, mut disagreements) = (0usize, 0usize, 0usize);
        let (mut cmin, mut cmax) = (usize::MAX, 0usize);
        let mut times = Vec::with_capacity(repetitions);
        let mut tokens = Vec::with_capacity(repetitions);
        let mut fraction = 0.0;
        for rep in 0..repetitions {
            let run_cfg = PipelineConfig { seed: cfg.seed.wrapping_add(rep as u64), ..cfg.clone() };
            let art = planner.plan(&sc.scene, &task, &run_cfg)?;
            let res = &art.result;
            fraction = res.stable_fraction;
            let n = res.candidates.candidates.len();
            cmin = cmin.min(n);
            cmax = cmax.max(n);
            times.push(res.metrics.total_seconds);
            tokens.push((res.metrics.reasoning.prompt_tokens + res.metrics.reasoning.completion_tokens) as f64);
            if res.status != PlanStatus::Ok || n == 0 {
                log::warn!("{} rep {rep}: {:?}, nothing to select", sc.manifest.id, res.status);
                continue;
            }
            let outcome = planner.evaluate_selection(&sc.scene, &run_cfg, res, 1, &sc.manifest.ground_truth)?;
            stable += usize::from(outcome.stable);
            reasonable += usize::from(outcome.reasonable == Some(true));
            if art.candidate_stable.first() != Some(&outcome.stable) {
                disagreements += 1;
            }
        }
        let (mean, std) = mean_std(&times);
        let reps = repetitions as f64;
        rows.push(ScenarioRow {
            scenario: sc.manifest.id.clone(),
            repetitions,
            sta_sr: stable as f64 / reps,
            rea_sr: reasonable as f64 / reps,
            stable_fraction: fraction,
            candidates_min: cmin,
            candidates_max: cmax,
            disagreements,
            tokens_mean: tokens.iter().sum::<f64>() / reps,
            timing: Some(Timing { mean_seconds: mean, std_seconds: std }),
        });
    }
    Ok(BenchReport {
        metadata: BenchMetadata {
            repetitions,
            sample_k: cfg.sample_k,
            base_seed: cfg.seed,
            reasoner: cfg.reasoner,
            config: cfg.clone(),
        },
        rows,
    })
}
