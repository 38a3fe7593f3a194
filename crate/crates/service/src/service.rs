//! Scene registry, planning and selection over a shared run store.

use placewise_core::scene::{parse_scene, scene_to_document, ParseMode, SimilarityHint, TaskDescription};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{PipelineConfig, PlanOverrides};
use crate::error::{PipelineError, Stage};
use crate::pipeline::{density_grid_spec, render_density, PlacementOutcome, PlanResult, Planner};
use crate::store::{Placement, RunRecord, RunStore};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub task: String,
    #[serde(default)]
    pub similarity_hint: SimilarityHint,
    #[serde(default)]
    pub overrides: PlanOverrides,
    /// Receptacle ids used to score the reasonableness of a later selection.
    #[serde(default)]
    pub ground_truth: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub scene_id: String,
    /// The scene in its document form.
    pub scene: Value,
    pub placed: Option<Placement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFormat {
    Text,
    Binary,
}

impl std::str::FromStr for DensityFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        match s {
            "text" => Ok(DensityFormat::Text),
            "binary" => Ok(DensityFormat::Binary),
            _ => Err(PipelineError::new(Stage::Density, "bad_format", format!("unknown density format `{s}`"))),
        }
    }
}

impl DensityFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            DensityFormat::Text => "text/csv",
            DensityFormat::Binary => "application/octet-stream",
        }
    }
}

pub struct Service {
    pub planner: Planner,
    pub store: RunStore,
    pub config: PipelineConfig,
}

impl Service {
    pub fn new(planner: Planner, store: RunStore, config: PipelineConfig) -> Self {
        Service { planner, store, config }
    }

    pub fn add_scene(&self, document: &str) -> Result<String, PipelineError> {
        let parsed = parse_scene(document, ParseMode::Strict)
            .map_err(|e| PipelineError::new(Stage::Ingest, "invalid_scene", e.to_string()))?;
        self.store.add_scene(parsed.scene)
    }

    pub fn scene_view(&self, scene_id: &str) -> Result<SceneView, PipelineError> {
        let entry = self.store.scene(scene_id)?;
        let scene = serde_json::from_str(&scene_to_document(&entry.scene)).expect("documents are JSON");
        Ok(SceneView { scene_id: entry.scene_id, scene, placed: entry.placed })
    }

    /// Plans on a stored scene and persists the run.
    pub fn plan_scene(&self, scene_id: &str, req: &PlanRequest) -> Result<PlanResult, PipelineError> {
        let entry = self.store.scene(scene_id)?;
        let cfg = req.overrides.apply(&self.config)?;
        let task = TaskDescription::new(req.task.clone()).with_hint(req.similarity_hint);
        let art = self.planner.plan(&entry.scene, &task, &cfg)?;
        let result = art.result.clone();
        let record = RunRecord::new(Some(entry.scene_id), entry.scene, task, req.ground_truth.clone(), cfg, art);
        self.store.add_run(record)?;
        Ok(result)
    }

    /// Re-simulates the chosen candidate and marks the run placed. A run can be placed once.
    pub fn execute_selection(&self, run_id: &str, rank: usize) -> Result<PlacementOutcome, PipelineError> {
        let run = self.store.run(run_id)?;
        if run.outcome.is_some() {
            return Err(PipelineError::new(Stage::Selection, "already_placed", format!("run {run_id} was already placed")));
        }
        let outcome = self.planner.evaluate_selection(&run.scene, &run.config, &run.result, rank, &run.ground_truth)?;
        self.store.record_selection(run_id, outcome.clone())?;
        Ok(outcome)
    }

    pub fn density(&self, run_id: &str, format: DensityFormat) -> Result<Vec<u8>, PipelineError> {
        let run = self.store.run(run_id)?;
        let support = run
            .support
            .as_ref()
            .ok_or_else(|| PipelineError::not_found(Stage::Density, format!("run {run_id} has no density")))?;
        let spec = match &run.result.density {
            Some(d) => d.grid,
            None => density_grid_spec(&run.scene, &run.config)?,
        };
        let grid = render_density(support, &run.config, spec)?;
        Ok(match format {
            DensityFormat::Text => grid.to_text().into_bytes(),
            DensityFormat::Binary => grid.to_binary(),
        })
    }
}
