#![allow(dead_code)]

use placewise_core::scene::{parse_scene, ParseMode, Scene};
use serde_json::{json, Value};

pub fn static_box(id: &str, label: &str, center: [f64; 3], half: [f64; 3]) -> Value {
    json!({"id": id, "label": label, "static": true, "pose": {"position": center},
           "shapes": [{"kind": "box", "dims": half}]})
}

pub fn block(half: [f64; 3]) -> Value {
    json!({"id": "block", "label": "Block", "mass": 0.5, "shapes": [{"kind": "box", "dims": half}]})
}

pub fn scene(objects: Vec<Value>, placed: Value, min: [f64; 3], max: [f64; 3]) -> Scene {
    let doc = json!({"objects": objects, "placement_object": placed, "workspace": {"min": min, "max": max}});
    parse_scene(&doc.to_string(), ParseMode::Strict).expect("fixture parses").scene
}

/// Large table whose top face is the plane z = 0.
pub fn table() -> Value {
    static_box("table", "Table", [0.0, 0.0, -0.02], [0.5, 0.5, 0.02])
}

pub fn cube_on_table() -> Scene {
    scene(vec![table()], block([0.05, 0.05, 0.05]), [-0.2, -0.2, 0.0], [0.2, 0.2, 0.3])
}

/// A raised platform ending at x = 0 with its top at `height`, over a floor at z = 0.
pub fn step_scene(height: f64, placed: Value) -> Scene {
    scene(
        vec![
            static_box("floor", "Floor", [0.0, 0.0, -0.01], [0.5, 0.5, 0.01]),
            static_box("platform", "Platform", [-0.25, 0.0, height / 2.0], [0.25, 0.25, height / 2.0]),
        ],
        placed,
        [-0.2, -0.2, 0.0],
        [0.2, 0.2, 0.3],
    )
}

pub const RAIL_HEIGHT: f64 = 0.07;

/// Two rails on a base plate (top at z = 0) leaving a slot of width `gap` centred on x = 0.
pub fn slot_scene(gap: f64, placed: Value) -> Scene {
    let rail = 0.0025;
    let cx = gap / 2.0 + rail;
    scene(
        vec![
            static_box("base", "Base", [0.0, 0.0, -0.01], [0.2, 0.2, 0.01]),
            static_box("rail_a", "Rail", [-cx, 0.0, RAIL_HEIGHT / 2.0], [rail, 0.1, RAIL_HEIGHT / 2.0]),
            static_box("rail_b", "Rail", [cx, 0.0, RAIL_HEIGHT / 2.0], [rail, 0.1, RAIL_HEIGHT / 2.0]),
        ],
        placed,
        [-0.1, -0.1, 0.0],
        [0.1, 0.1, 0.3],
    )
}

pub fn plate(half_thickness: f64) -> Value {
    json!({"id": "plate", "label": "Plate", "mass": 0.3,
           "shapes": [{"kind": "box", "dims": [half_thickness, 0.06, 0.05]}]})
}
