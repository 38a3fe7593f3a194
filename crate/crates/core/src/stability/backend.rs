use thiserror::Error;

use crate::geometry::{UnitQuat, Vec3};
use crate::scene::{Scene, SceneObject};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid backend input: {0}")]
    Invalid(String),
}

/// Simulator contract used by the stability sweep. States are values: every
/// operation returns a new state, so one run never observes another.
pub trait PhysicsBackend: Sync {
    type State: Clone + Send;

    /// Instantiates `object` with its origin at `point` and its canonical orientation.
    fn place(&self, scene: &Scene, object: &SceneObject, point: &Vec3) -> Result<Self::State, BackendError>;

    /// Advances one step. Must be deterministic in `state`.
    fn step(&self, state: &Self::State, dt: f64) -> Result<Self::State, BackendError>;

    /// Instantaneous rotation by `angle` about a horizontal `axis` through the centre of mass.
    fn tilt(&self, state: &Self::State, axis: &Vec3, angle: f64) -> Result<Self::State, BackendError>;

    fn orientation(&self, state: &Self::State) -> UnitQuat;

    fn at_rest(&self, state: &Self::State) -> bool;

    fn penetrating(&self, state: &Self::State) -> bool;
}
