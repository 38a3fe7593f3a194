//! Placement planning service: runs the pipeline, keeps run records, serves
//! the operator API and benchmarks scenario suites.

pub mod api;
pub mod bench;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod service;
pub mod store;

pub use config::{PipelineConfig, PlanOverrides, ReasonerKind};
pub use error::{PipelineError, Stage};
pub use pipeline::{PlacementOutcome, PlanArtifacts, PlanResult, PlanStatus, Planner};
pub use service::{DensityFormat, PlanRequest, Service};
pub use store::{RunRecord, RunStore};
