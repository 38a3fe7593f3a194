//! Placement recommendation for semi-autonomous teleoperation.
//!
//! A declarative [`scene::Scene`] is swept with simulated placements to find
//! stable candidate points ([`stability`]); a reasoner picks the receptacles
//! that fit the task ([`reasoning`]); both rewards are blended into a
//! kernel density over the stable points and sampled into ranked candidates
//! for a human operator ([`density`]).

pub mod geometry;
pub mod planar;
pub mod polytope;
pub mod scene;
pub mod stability;
pub mod reasoning;
pub mod density;

pub use geometry::{Aabb, Pose, UnitQuat, Vec3};
