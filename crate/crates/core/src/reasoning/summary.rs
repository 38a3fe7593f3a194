use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};
use crate::scene::{object_aabb, Scene, SceneObject};

pub const DEFAULT_RECEPTACLE_LABELS: [&str; 3] = ["Rack", "Shelf", "Tray"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// An object is a receptacle when its label contains any of these, ignoring case.
    pub receptacle_labels: Vec<String>,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions { receptacle_labels: DEFAULT_RECEPTACLE_LABELS.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub id: String,
    pub label: String,
    pub attributes: BTreeMap<String, String>,
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl ObjectDescriptor {
    pub fn aabb(&self) -> Aabb {
        let c = Vec3::from(self.center);
        let h = Vec3::from(self.size) * 0.5;
        Aabb::new(c - h, c + h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementDescriptor {
    pub label: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub objects: Vec<ObjectDescriptor>,
    pub placement: PlacementDescriptor,
    /// Receptacle ids in scene order; each one names a descriptor in `objects`.
    pub receptacles: Vec<String>,
}

impl SceneSummary {
    pub fn object(&self, id: &str) -> Option<&ObjectDescriptor> {
        self.objects.iter().find(|o| o.id == id)
    }
}

fn descriptor(id: String, label: String, attributes: BTreeMap<String, String>, aabb: &Aabb) -> ObjectDescriptor {
    let c = aabb.center();
    let s = aabb.size();
    ObjectDescriptor { id, label, attributes, center: [c.x, c.y, c.z], size: [s.x, s.y, s.z] }
}

pub(crate) fn tier_id(parent: &str, k: usize) -> String {
    format!("{parent}#tier{k}")
}

/// Even split of the object bound along z into `attributes.tiers` slices,
/// bottom first. Empty when the attribute is absent or not a positive count.
pub fn tier_aabbs(obj: &SceneObject) -> Vec<(String, Aabb)> {
    let Some(n) = obj.attribute("tiers").and_then(|t| t.trim().parse::<usize>().ok()).filter(|n| *n > 0) else {
        return Vec::new();
    };
    let b = object_aabb(obj);
    let dz = (b.max.z - b.min.z) / n as f64;
    (1..=n)
        .map(|k| {
            let lo = b.min.z + dz * (k - 1) as f64;
            let hi = if k == n { b.max.z } else { b.min.z + dz * k as f64 };
            let aabb = Aabb::new(Vec3::new(b.min.x, b.min.y, lo), Vec3::new(b.max.x, b.max.y, hi));
            (tier_id(&obj.id, k), aabb)
        })
        .collect()
}

fn explicit_tiers(scene: &Scene, parent: &str) -> bool {
    let prefix = format!("{parent}#tier");
    scene.objects.iter().any(|o| o.id.starts_with(&prefix))
}

fn is_receptacle(label: &str, opts: &SummaryOptions) -> bool {
    let l = label.to_lowercase();
    opts.receptacle_labels.iter().any(|r| l.contains(&r.to_lowercase()))
}

/// Bound of a receptacle id as listed by [`summarize_scene`]: a scene object or
/// a generated tier of one.
pub fn receptacle_aabb(scene: &Scene, id: &str) -> Option<Aabb> {
    if let Some(o) = scene.object(id) {
        return Some(object_aabb(o));
    }
    let (parent, _) = id.split_once("#tier")?;
    let obj = scene.object(parent)?;
    tier_aabbs(obj).into_iter().find(|(tid, _)| tid == id).map(|(_, b)| b)
}

pub fn summarize_scene(scene: &Scene, opts: &SummaryOptions) -> SceneSummary {
    let mut objects = Vec::new();
    let mut receptacles = Vec::new();
    for o in &scene.objects {
        let receptacle = is_receptacle(&o.label, opts);
        let tiers = if receptacle && !explicit_tiers(scene, &o.id) { tier_aabbs(o) } else { Vec::new() };
        if tiers.is_empty() {
            objects.push(descriptor(o.id.clone(), o.label.clone(), o.attributes.clone(), &object_aabb(o)));
            if receptacle {
                receptacles.push(o.id.clone());
            }
            continue;
        }
        for (k, (id, aabb)) in tiers.into_iter().enumerate() {
            let mut attributes = o.attributes.clone();
            attributes.remove("tiers");
            attributes.insert("tier".into(), (k + 1).to_string());
            objects.push(descriptor(id.clone(), format!("{} tier {}", o.label, k + 1), attributes, &aabb));
            receptacles.push(id);
        }
    }
    let p = &scene.placement_object;
    SceneSummary {
        objects,
        placement: PlacementDescriptor { label: p.label.clone(), attributes: p.attributes.clone() },
        receptacles,
    }
}
