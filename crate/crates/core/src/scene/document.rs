//! JSON scene documents.
//!
//! ```json
//! {
//!   "workspace": {"min": [0, 0, 0], "max": [1, 1, 0.5]},
//!   "gravity": 9.81,
//!   "objects": [{
//!     "id": "table", "label": "Table", "static": true,
//!     "pose": {"position": [0.5, 0.5, -0.01], "orientation": [1, 0, 0, 0]},
//!     "shapes": [{"kind": "box", "dims": [0.5, 0.5, 0.01]}],
//!     "attributes": {"color": "white"}
//!   }],
//!   "placement_object": {"id": "cube", "label": "Block", "mass": 0.2,
//!     "shapes": [{"kind": "box", "dims": [0.05, 0.05, 0.05]}]}
//! }
//! ```
//!
//! `dims` are half-extents for boxes, `[radius, half_height]` for cylinders
//! and `[radius]` for spheres. Orientations are `[w, x, y, z]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Scene, SceneError, SceneObject, ShapeKind, ShapePrimitive, DEFAULT_GRAVITY};
use crate::geometry::{Aabb, Pose, UnitQuat, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Unknown keys are errors.
    #[default]
    Strict,
    /// Unknown keys are dropped and reported as warnings.
    Lenient,
}

#[derive(Clone, Debug)]
pub struct ParsedScene {
    pub scene: Scene,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    objects: Vec<ObjectDoc>,
    placement_object: ObjectDoc,
    workspace: WorkspaceDoc,
    #[serde(default = "default_gravity")]
    gravity: f64,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

#[derive(Serialize, Deserialize)]
struct WorkspaceDoc {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    id: String,
    label: String,
    #[serde(rename = "static", default)]
    is_static: bool,
    #[serde(default)]
    mass: f64,
    #[serde(default)]
    pose: PoseDoc,
    shapes: Vec<ShapeDoc>,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct PoseDoc {
    #[serde(default)]
    position: [f64; 3],
    #[serde(default = "identity_wxyz")]
    orientation: [f64; 4],
}

impl Default for PoseDoc {
    fn default() -> Self {
        PoseDoc { position: [0.0; 3], orientation: identity_wxyz() }
    }
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Serialize, Deserialize)]
struct ShapeDoc {
    kind: String,
    dims: Vec<f64>,
    #[serde(default)]
    offset: PoseDoc,
}

const TOP_KEYS: &[&str] = &["objects", "placement_object", "workspace", "gravity"];
const WORKSPACE_KEYS: &[&str] = &["min", "max"];
const OBJECT_KEYS: &[&str] = &["id", "label", "static", "mass", "pose", "shapes", "attributes"];
const POSE_KEYS: &[&str] = &["position", "orientation"];
const SHAPE_KEYS: &[&str] = &["kind", "dims", "offset"];

/// Walks the raw tree, rejecting or stripping keys the schema does not know.
struct KeyCheck {
    mode: ParseMode,
    warnings: Vec<String>,
}

impl KeyCheck {
    fn object(&mut self, v: &mut Value, allowed: &[&str], path: &str) -> Result<(), SceneError> {
        let Some(map) = v.as_object_mut() else { return Ok(()) };
        let unknown: Vec<String> = map.keys().filter(|k| !allowed.contains(&k.as_str())).cloned().collect();
        for key in unknown {
            let at = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            match self.mode {
                ParseMode::Strict => {
                    return Err(SceneError::Validation { path: at, message: "unknown key".into() });
                }
                ParseMode::Lenient => {
                    self.warnings.push(format!("ignored unknown key `{at}`"));
                    map.remove(&key);
                }
            }
        }
        Ok(())
    }

    fn scene_object(&mut self, v: &mut Value, path: &str) -> Result<(), SceneError> {
        self.object(v, OBJECT_KEYS, path)?;
        if let Some(pose) = v.get_mut("pose") {
            self.object(pose, POSE_KEYS, &format!("{path}.pose"))?;
        }
        if let Some(Value::Array(shapes)) = v.get_mut("shapes") {
            for (j, s) in shapes.iter_mut().enumerate() {
                let sp = format!("{path}.shapes[{j}]");
                self.object(s, SHAPE_KEYS, &sp)?;
                if let Some(off) = s.get_mut("offset") {
                    self.object(off, POSE_KEYS, &format!("{sp}.offset"))?;
                }
            }
        }
        Ok(())
    }

    fn document(&mut self, v: &mut Value) -> Result<(), SceneError> {
        self.object(v, TOP_KEYS, "")?;
        if let Some(ws) = v.get_mut("workspace") {
            self.object(ws, WORKSPACE_KEYS, "workspace")?;
        }
        if let Some(Value::Array(objs)) = v.get_mut("objects") {
            for (i, o) in objs.iter_mut().enumerate() {
                self.scene_object(o, &format!("objects[{i}]"))?;
            }
        }
        if let Some(p) = v.get_mut("placement_object") {
            self.scene_object(p, "placement_object")?;
        }
        Ok(())
    }
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str, mode: ParseMode) -> Result<ParsedScene, SceneError> {
    let mut raw: Value = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if !raw.is_object() {
        return Err(SceneError::Parse { path: "$".into(), message: "document must be an object".into() });
    }
    let mut check = KeyCheck { mode, warnings: Vec::new() };
    check.document(&mut raw)?;
    let doc: SceneDoc = serde_path_to_error::deserialize(raw).map_err(|e| SceneError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let scene = doc_to_scene(doc)?;
    scene.validate()?;
    Ok(ParsedScene { scene, warnings: check.warnings })
}

/// Renders a scene back to its document form.
pub fn scene_to_document(scene: &Scene) -> String {
    let doc = SceneDoc {
        objects: scene.objects.iter().map(object_to_doc).collect(),
        placement_object: object_to_doc(&scene.placement_object),
        workspace: WorkspaceDoc { min: vec_arr(&scene.workspace.min), max: vec_arr(&scene.workspace.max) },
        gravity: scene.gravity,
    };
    serde_json::to_string_pretty(&doc).expect("scene documents always serialize")
}

fn vec_arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn pose_to_doc(p: &Pose) -> PoseDoc {
    PoseDoc { position: vec_arr(&p.position), orientation: p.orientation.wxyz() }
}

fn object_to_doc(o: &SceneObject) -> ObjectDoc {
    ObjectDoc {
        id: o.id.clone(),
        label: o.label.clone(),
        is_static: o.is_static,
        mass: o.mass,
        pose: pose_to_doc(&o.pose),
        shapes: o
            .shapes
            .iter()
            .map(|s| ShapeDoc {
                kind: s.kind.name().to_string(),
                dims: s.kind.dims(),
                offset: pose_to_doc(&s.offset),
            })
            .collect(),
        attributes: o.attributes.clone(),
    }
}

fn doc_to_pose(p: &PoseDoc, path: &str) -> Result<Pose, SceneError> {
    let [w, x, y, z] = p.orientation;
    let orientation = UnitQuat::from_wxyz(w, x, y, z).map_err(|e| SceneError::Validation {
        path: format!("{path}.orientation"),
        message: e.to_string(),
    })?;
    Ok(Pose::new(Vec3::from(p.position), orientation))
}

fn doc_to_shape(s: &ShapeDoc, path: &str) -> Result<ShapePrimitive, SceneError> {
    let arity = |n: usize| -> Result<(), SceneError> {
        if s.dims.len() == n {
            Ok(())
        } else {
            Err(SceneError::Parse {
                path: format!("{path}.dims"),
                message: format!("`{}` expects {n} values, got {}", s.kind, s.dims.len()),
            })
        }
    };
    let kind = match s.kind.as_str() {
        "box" => {
            arity(3)?;
            ShapeKind::Box { half_extents: Vec3::new(s.dims[0], s.dims[1], s.dims[2]) }
        }
        "cylinder" => {
            arity(2)?;
            ShapeKind::Cylinder { radius: s.dims[0], half_height: s.dims[1] }
        }
        "sphere" => {
            arity(1)?;
            ShapeKind::Sphere { radius: s.dims[0] }
        }
        other => {
            return Err(SceneError::Parse {
                path: format!("{path}.kind"),
                message: format!("unknown shape kind `{other}` (expected box, cylinder or sphere)"),
            })
        }
    };
    Ok(ShapePrimitive { kind, offset: doc_to_pose(&s.offset, &format!("{path}.offset"))? })
}

fn doc_to_object(o: ObjectDoc, path: &str) -> Result<SceneObject, SceneError> {
    let shapes = o
        .shapes
        .iter()
        .enumerate()
        .map(|(j, s)| doc_to_shape(s, &format!("{path}.shapes[{j}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SceneObject {
        id: o.id,
        label: o.label,
        pose: doc_to_pose(&o.pose, &format!("{path}.pose"))?,
        shapes,
        mass: o.mass,
        is_static: o.is_static,
        attributes: o.attributes,
    })
}

fn doc_to_scene(doc: SceneDoc) -> Result<Scene, SceneError> {
    let objects = doc
        .objects
        .into_iter()
        .enumerate()
        .map(|(i, o)| doc_to_object(o, &format!("objects[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scene {
        objects,
        placement_object: doc_to_object(doc.placement_object, "placement_object")?,
        workspace: Aabb::new(Vec3::from(doc.workspace.min), Vec3::from(doc.workspace.max)),
        gravity: doc.gravity,
    })
}
