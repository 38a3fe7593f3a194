//! Append-only run store: one JSON event per line, replayed on open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use placewise_core::density::WeightedPoints;
use placewise_core::scene::{Scene, TaskDescription};
use placewise_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Stage};
use crate::pipeline::{PlacementOutcome, PlanArtifacts, PlanResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub run_id: String,
    pub rank: usize,
    pub point: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    pub scene: Scene,
    pub placed: Option<Placement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scene_id: Option<String>,
    pub scene: Scene,
    pub task: TaskDescription,
    #[serde(default)]
    pub ground_truth: Vec<String>,
    pub config: PipelineConfig,
    pub result: PlanResult,
    pub support: Option<WeightedPoints>,
    pub candidate_stable: Vec<bool>,
    pub outcome: Option<PlacementOutcome>,
}

impl RunRecord {
    pub fn new(
        scene_id: Option<String>,
        scene: Scene,
        task: TaskDescription,
        ground_truth: Vec<String>,
        config: PipelineConfig,
        artifacts: PlanArtifacts,
    ) -> Self {
        RunRecord {
            run_id: artifacts.result.run_id.clone(),
            scene_id,
            scene,
            task,
            ground_truth,
            config,
            result: artifacts.result,
            support: artifacts.support,
            candidate_stable: artifacts.candidate_stable,
            outcome: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Scene { scene_id: String, scene: Scene },
    Run { record: Box<RunRecord> },
    Selection { run_id: String, outcome: PlacementOutcome },
}

#[derive(Default)]
struct State {
    scenes: BTreeMap<String, SceneEntry>,
    runs: HashMap<String, RunRecord>,
    file: Option<File>,
}

impl State {
    fn apply(&mut self, event: Event) -> Result<(), String> {
        match event {
            Event::Scene { scene_id, scene } => {
                self.scenes.insert(scene_id.clone(), SceneEntry { scene_id, scene, placed: None });
            }
            Event::Run { record } => {
                self.runs.insert(record.run_id.clone(), *record);
            }
            Event::Selection { run_id, outcome } => {
                let run = self.runs.get_mut(&run_id).ok_or_else(|| format!("selection for unknown run {run_id}"))?;
                if let Some(sid) = &run.scene_id {
                    if let Some(s) = self.scenes.get_mut(sid) {
                        s.placed = Some(Placement { run_id: run_id.clone(), rank: outcome.rank, point: outcome.point });
                    }
                }
                run.outcome = Some(outcome);
            }
        }
        Ok(())
    }
}

/// Scenes, runs and selections, optionally backed by a JSONL file. Writes are
/// serialized by one lock.
pub struct RunStore {
    path: Option<PathBuf>,
    state: Mutex<State>,
}

fn store_err(message: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Store, "store", message)
}

impl RunStore {
    pub fn in_memory() -> Self {
        RunStore { path: None, state: Mutex::new(State::default()) }
    }

    /// Opens or creates the file at `path` and replays its events.
    pub fn open(path: &Path) -> Result<Self, PipelineError> {
        let mut state = State::default();
        if path.exists() {
            let f = File::open(path).map_err(|e| store_err(format!("{}: {e}", path.display())))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| store_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line)
                    .map_err(|e| store_err(format!("{} line {}: {e}", path.display(), i + 1)))?;
                state.apply(event).map_err(|m| store_err(format!("{} line {}: {m}", path.display(), i + 1)))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| store_err(format!("{}: {e}", path.display())))?;
        state.file = Some(file);
        Ok(RunStore { path: Some(path.to_path_buf()), state: Mutex::new(state) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn commit(state: &mut State, event: Event) -> Result<(), PipelineError> {
        if let Some(f) = state.file.as_mut() {
            let mut line = serde_json::to_string(&event).map_err(|e| store_err(e.to_string()))?;
            line.push('\n');
            f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| store_err(e.to_string()))?;
        }
        state.apply(event).map_err(store_err)
    }

    pub fn add_scene(&self, scene: Scene) -> Result<String, PipelineError> {
        let scene_id = uuid::Uuid::new_v4().to_string();
        let mut st = self.state.lock().expect("store lock");
        Self::commit(&mut st, Event::Scene { scene_id: scene_id.clone(), scene })?;
        Ok(scene_id)
    }

    pub fn scene(&self, scene_id: &str) -> Result<SceneEntry, PipelineError> {
        let st = self.state.lock().expect("store lock");
        st.scenes
            .get(scene_id)
            .cloned()
            .ok_or_else(|| PipelineError::not_found(Stage::Ingest, format!("unknown scene {scene_id}")))
    }

    pub fn add_run(&self, record: RunRecord) -> Result<(), PipelineError> {
        let mut st = self.state.lock().expect("store lock");
        if st.runs.contains_key(&record.run_id) {
            return Err(store_err(format!("run {} already stored", record.run_id)));
        }
        Self::commit(&mut st, Event::Run { record: Box::new(record) })
    }

    pub fn run(&self, run_id: &str) -> Result<RunRecord, PipelineError> {
        let st = self.state.lock().expect("store lock");
        st.runs.get(run_id).cloned().ok_or_else(|| PipelineError::not_found(Stage::Store, format!("unknown run {run_id}")))
    }

    pub fn run_ids(&self) -> Vec<String> {
        let st = self.state.lock().expect("store lock");
        let mut ids: Vec<String> = st.runs.keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Records the outcome unless the run already has one.
    pub fn record_selection(&self, run_id: &str, outcome: PlacementOutcome) -> Result<(), PipelineError> {
        let mut st = self.state.lock().expect("store lock");
        let run = st.runs.get(run_id).ok_or_else(|| PipelineError::not_found(Stage::Selection, format!("unknown run {run_id}")))?;
        if run.outcome.is_some() {
            return Err(PipelineError::new(Stage::Selection, "already_placed", format!("run {run_id} was already placed")));
        }
        Self::commit(&mut st, Event::Selection { run_id: run_id.to_string(), outcome })
    }
}
