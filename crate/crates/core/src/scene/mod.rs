//! Scene representation: labelled objects built from primitive shapes, the
//! object to place, and the reachable workspace.

mod candidates;
mod document;

pub use candidates::{generate_candidates, CandidateGrid, GridOptions, GridSource, ZMode, DEFAULT_POINT_CAP};
pub use document::{parse_scene, scene_to_document, ParseMode, ParsedScene};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_finite, Aabb, Pose, Vec3};
use crate::polytope::{ConvexPolytope, CYLINDER_SEGMENTS};

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scene at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("resolution must be positive and finite, got {0}")]
    Resolution(f64),
    #[error("workspace is empty (min = max)")]
    EmptyWorkspace,
    #[error("lattice would contain {points} points, above the cap of {cap}; use a coarser resolution")]
    TooManyPoints { points: u64, cap: u64 },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Validation { path: path.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Box { half_extents: Vec3 },
    /// Axis along the local z of the shape frame.
    Cylinder { radius: f64, half_height: f64 },
    /// Accepted by the document format; the built-in backend rejects it.
    Sphere { radius: f64 },
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Box { .. } => "box",
            ShapeKind::Cylinder { .. } => "cylinder",
            ShapeKind::Sphere { .. } => "sphere",
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            ShapeKind::Box { half_extents } => half_extents.iter().copied().collect(),
            ShapeKind::Cylinder { radius, half_height } => vec![radius, half_height],
            ShapeKind::Sphere { radius } => vec![radius],
        }
    }

    fn volume(&self) -> f64 {
        match *self {
            ShapeKind::Box { half_extents: h } => 8.0 * h.x * h.y * h.z,
            ShapeKind::Cylinder { radius, half_height } => std::f64::consts::PI * radius * radius * 2.0 * half_height,
            ShapeKind::Sphere { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
        }
    }

    /// Principal moments of inertia per unit mass, in the shape frame.
    fn unit_inertia(&self) -> Vec3 {
        match *self {
            ShapeKind::Box { half_extents: h } => {
                let (a, b, c) = (4.0 * h.x * h.x, 4.0 * h.y * h.y, 4.0 * h.z * h.z);
                Vec3::new(b + c, a + c, a + b) / 12.0
            }
            ShapeKind::Cylinder { radius: r, half_height } => {
                let l2 = 4.0 * half_height * half_height;
                let side = (3.0 * r * r + l2) / 12.0;
                Vec3::new(side, side, r * r / 2.0)
            }
            ShapeKind::Sphere { radius } => Vec3::repeat(0.4 * radius * radius),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapePrimitive {
    pub kind: ShapeKind,
    /// Pose relative to the owning object frame.
    pub offset: Pose,
}

impl ShapePrimitive {
    pub fn new(kind: ShapeKind, offset: Pose) -> Self {
        ShapePrimitive { kind, offset }
    }

    /// World-space bound; cylinders use their circumscribing box.
    pub fn aabb(&self, world: &Pose) -> Aabb {
        let pose = world.compose(&self.offset);
        match self.kind {
            ShapeKind::Sphere { radius } => {
                let r = Vec3::repeat(radius);
                Aabb::new(pose.position - r, pose.position + r)
            }
            ShapeKind::Box { half_extents } => corners_aabb(&pose, &half_extents),
            ShapeKind::Cylinder { radius, half_height } => {
                corners_aabb(&pose, &Vec3::new(radius, radius, half_height))
            }
        }
    }

    /// Convex polytope in world space, `None` for curved shapes without a polytope form.
    pub fn polytope(&self, world: &Pose) -> Option<ConvexPolytope> {
        let local = match self.kind {
            ShapeKind::Box { half_extents } => ConvexPolytope::cuboid(&half_extents),
            ShapeKind::Cylinder { radius, half_height } => {
                ConvexPolytope::prism(radius, half_height, CYLINDER_SEGMENTS)
            }
            ShapeKind::Sphere { .. } => return None,
        };
        Some(local.transformed(&world.compose(&self.offset)))
    }
}

fn corners_aabb(pose: &Pose, half: &Vec3) -> Aabb {
    let local = Aabb::new(-half, *half);
    let corners = local.corners().map(|c| pose.transform_point(&c));
    Aabb::from_points(&corners).expect("eight corners")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub label: String,
    pub shapes: Vec<ShapePrimitive>,
    pub pose: Pose,
    /// Kilograms; ignored for static objects.
    pub mass: f64,
    pub is_static: bool,
    pub attributes: BTreeMap<String, String>,
}

impl SceneObject {
    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    /// Volume-weighted centroid of the shapes, in the object frame.
    pub fn local_center_of_mass(&self) -> Vec3 {
        let mut total = 0.0;
        let mut acc = Vec3::zeros();
        for s in &self.shapes {
            let v = s.kind.volume();
            total += v;
            acc += s.offset.position * v;
        }
        if total > 0.0 {
            acc / total
        } else {
            Vec3::zeros()
        }
    }

    /// Inertia tensor per unit mass about the centre of mass, object frame.
    pub fn local_unit_inertia(&self) -> nalgebra::Matrix3<f64> {
        let com = self.local_center_of_mass();
        let total: f64 = self.shapes.iter().map(|s| s.kind.volume()).sum();
        let mut inertia = nalgebra::Matrix3::zeros();
        for s in &self.shapes {
            let share = if total > 0.0 { s.kind.volume() / total } else { 0.0 };
            let rot = s.offset.orientation.as_unit().to_rotation_matrix();
            let principal = nalgebra::Matrix3::from_diagonal(&s.kind.unit_inertia());
            let local = rot.matrix() * principal * rot.matrix().transpose();
            let d = s.offset.position - com;
            let parallel = nalgebra::Matrix3::identity() * d.norm_squared() - d * d.transpose();
            inertia += (local + parallel) * share;
        }
        inertia
    }
}

/// Tight world-space bound of every shape of `obj` at its pose.
pub fn object_aabb(obj: &SceneObject) -> Aabb {
    obj.shapes
        .iter()
        .map(|s| s.aabb(&obj.pose))
        .reduce(|a, b| a.union(&b))
        .expect("validated objects have at least one shape")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub placement_object: SceneObject,
    pub workspace: Aabb,
    /// Magnitude in m/s², acting along -z.
    pub gravity: f64,
}

impl Scene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let ws = &self.workspace;
        check_finite(&ws.min).and(check_finite(&ws.max)).map_err(|e| invalid("workspace", e.to_string()))?;
        if ws.min == ws.max {
            return Err(SceneError::EmptyWorkspace);
        }
        if (0..3).any(|i| ws.min[i] > ws.max[i]) {
            return Err(invalid("workspace", "min must not exceed max"));
        }
        if ws.min.x >= ws.max.x || ws.min.y >= ws.max.y {
            return Err(invalid("workspace", "horizontal extent must be positive"));
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(invalid("gravity", "must be positive"));
        }
        let mut seen = HashSet::new();
        for (i, obj) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            validate_object(obj, &path)?;
            if !seen.insert(obj.id.as_str()) {
                return Err(invalid(format!("{path}.id"), format!("duplicate id `{}`", obj.id)));
            }
        }
        validate_object(&self.placement_object, "placement_object")?;
        if seen.contains(self.placement_object.id.as_str()) {
            return Err(invalid(
                "placement_object.id",
                format!("`{}` is already used by a scene object", self.placement_object.id),
            ));
        }
        if self.placement_object.is_static {
            return Err(invalid("placement_object.static", "the object to place cannot be static"));
        }
        Ok(())
    }
}

fn validate_object(obj: &SceneObject, path: &str) -> Result<(), SceneError> {
    if obj.id.is_empty() {
        return Err(invalid(format!("{path}.id"), "must not be empty"));
    }
    if obj.shapes.is_empty() {
        return Err(invalid(format!("{path}.shapes"), "at least one shape is required"));
    }
    check_finite(&obj.pose.position).map_err(|e| invalid(format!("{path}.pose.position"), e.to_string()))?;
    if !obj.is_static && !(obj.mass.is_finite() && obj.mass > 0.0) {
        return Err(invalid(format!("{path}.mass"), "dynamic objects need a positive mass"));
    }
    for (j, s) in obj.shapes.iter().enumerate() {
        let dims = s.kind.dims();
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid(
                format!("{path}.shapes[{j}].dims"),
                format!("{} dimensions must be positive, got {:?}", s.kind.name(), dims),
            ));
        }
        check_finite(&s.offset.position)
            .map_err(|e| invalid(format!("{path}.shapes[{j}].offset"), e.to_string()))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityHint {
    Color,
    Shape,
    ObjectProperty,
    Genre,
    #[default]
    None,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskDescription {
    pub text: String,
    #[serde(default)]
    pub similarity_hint: SimilarityHint,
}

impl TaskDescription {
    pub fn new(text: impl Into<String>) -> Self {
        TaskDescription { text: text.into(), similarity_hint: SimilarityHint::None }
    }

    pub fn with_hint(mut self, hint: SimilarityHint) -> Self {
        self.similarity_hint = hint;
        self
    }
}
