use serde::{Deserialize, Serialize};

use super::{object_aabb, Scene, SceneError, SceneObject, ShapeKind};
use crate::geometry::{Pose, Vec3};
use crate::polytope::ConvexPolytope;

pub const DEFAULT_POINT_CAP: u64 = 1_000_000;

const EDGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    /// One point per column, resting on the highest support surface.
    #[default]
    SurfaceSnap,
    /// Every lattice node inside the workspace.
    FullLattice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    Lattice,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub points: Vec<Vec3>,
    pub resolution: f64,
    pub source: GridSource,
}

impl CandidateGrid {
    /// Wraps caller-supplied points. They must lie in the workspace and be distinct;
    /// the list is reordered lexicographically by (x, y, z).
    pub fn explicit(scene: &Scene, mut points: Vec<Vec3>) -> Result<Self, SceneError> {
        for (i, p) in points.iter().enumerate() {
            if !scene.workspace.contains(p, EDGE_TOL) {
                return Err(SceneError::Validation {
                    path: format!("points[{i}]"),
                    message: "outside the workspace".into(),
                });
            }
        }
        sort_lexicographic(&mut points);
        if let Some(w) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(SceneError::Validation { path: format!("points[{w}]"), message: "duplicate point".into() });
        }
        Ok(CandidateGrid { points, resolution: 0.0, source: GridSource::Explicit })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn sort_lexicographic(points: &mut [Vec3]) {
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub resolution: f64,
    pub z_mode: ZMode,
    pub point_cap: u64,
}

impl GridOptions {
    pub fn new(resolution: f64, z_mode: ZMode) -> Self {
        GridOptions { resolution, z_mode, point_cap: DEFAULT_POINT_CAP }
    }
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions::new(0.01, ZMode::SurfaceSnap)
    }
}

fn axis_count(span: f64, resolution: f64) -> u64 {
    (span / resolution + 1e-9).floor() as u64 + 1
}

/// Distance from the object origin down to its lowest point at its canonical orientation.
pub(crate) fn lower_extent(obj: &SceneObject) -> f64 {
    let mut at_origin = obj.clone();
    at_origin.pose = Pose::new(Vec3::zeros(), obj.pose.orientation);
    -object_aabb(&at_origin).min.z
}

/// Lattice of candidate placement points over the workspace.
pub fn generate_candidates(scene: &Scene, opts: &GridOptions) -> Result<CandidateGrid, SceneError> {
    let res = opts.resolution;
    if !(res.is_finite() && res > 0.0) {
        return Err(SceneError::Resolution(res));
    }
    scene.validate()?;
    let ws = &scene.workspace;
    let span = ws.size();
    let (nx, ny, nz) = (axis_count(span.x, res), axis_count(span.y, res), axis_count(span.z, res));
    let total = nx.saturating_mul(ny).saturating_mul(nz);
    if total > opts.point_cap {
        return Err(SceneError::TooManyPoints { points: total, cap: opts.point_cap });
    }
    let coord = |axis: usize, i: u64| ws.min[axis] + i as f64 * res;
    let mut points = Vec::new();
    match opts.z_mode {
        ZMode::FullLattice => {
            points.reserve(total as usize);
            for i in 0..nx {
                for j in 0..ny {
                    for k in 0..nz {
                        points.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
                    }
                }
            }
        }
        ZMode::SurfaceSnap => {
            let supports = SupportSurfaces::new(scene);
            let lift = lower_extent(&scene.placement_object);
            for i in 0..nx {
                for j in 0..ny {
                    let (x, y) = (coord(0, i), coord(1, j));
                    if let Some(z) = supports.highest_below(x, y, ws.max.z - lift + EDGE_TOL) {
                        let p = Vec3::new(x, y, z + lift);
                        if p.z >= ws.min.z - EDGE_TOL {
                            points.push(p);
                        }
                    }
                }
            }
        }
    }
    Ok(CandidateGrid { points, resolution: res, source: GridSource::Lattice })
}

enum Support {
    Poly(ConvexPolytope),
    Sphere { center: Vec3, radius: f64 },
}

/// Vertical ray-drop queries against every scene shape.
pub(crate) struct SupportSurfaces {
    shapes: Vec<Support>,
}

impl SupportSurfaces {
    pub(crate) fn new(scene: &Scene) -> Self {
        let mut shapes = Vec::new();
        for obj in &scene.objects {
            for s in &obj.shapes {
                match s.kind {
                    ShapeKind::Sphere { radius } => shapes.push(Support::Sphere {
                        center: obj.pose.compose(&s.offset).position,
                        radius,
                    }),
                    _ => shapes.push(Support::Poly(s.polytope(&obj.pose).expect("polytope shape"))),
                }
            }
        }
        SupportSurfaces { shapes }
    }

    /// Highest upward-facing surface height at `(x, y)` that is not above `ceiling`.
    pub(crate) fn highest_below(&self, x: f64, y: f64, ceiling: f64) -> Option<f64> {
        self.shapes
            .iter()
            .filter_map(|s| match s {
                Support::Poly(p) => column_top(p, x, y),
                Support::Sphere { center, radius } => {
                    let d2 = (x - center.x).powi(2) + (y - center.y).powi(2);
                    (d2 <= radius * radius).then(|| center.z + (radius * radius - d2).sqrt())
                }
            })
            .filter(|z| *z <= ceiling)
            .reduce(f64::max)
    }
}

/// Top of the vertical line through `(x, y)` clipped by the polytope's face slabs.
fn column_top(p: &ConvexPolytope, x: f64, y: f64) -> Option<f64> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for n in &p.face_normals {
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &p.vertices {
            let d = v.dot(n);
            a = a.min(d);
            b = b.max(d);
        }
        let c = n.x * x + n.y * y;
        if n.z.abs() < 1e-12 {
            if c < a - EDGE_TOL || c > b + EDGE_TOL {
                return None;
            }
            continue;
        }
        let (z0, z1) = ((a - c) / n.z, (b - c) / n.z);
        lo = lo.max(z0.min(z1));
        hi = hi.min(z0.max(z1));
    }
    // Grazing columns along a vertical face still count as supported.
    (lo <= hi + EDGE_TOL).then_some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{parse_scene, ParseMode};

    fn planar_scene(max: [f64; 3]) -> Scene {
        let text = format!(
            r#"{{"workspace": {{"min": [0, 0, 0], "max": {max:?}}},
                "objects": [{{"id": "t", "label": "Table", "static": true, "pose": {{"position": [0.05, 0.05, -0.01]}},
                              "shapes": [{{"kind": "box", "dims": [0.5, 0.5, 0.01]}}]}}],
                "placement_object": {{"id": "c", "label": "Cube", "mass": 0.1,
                                      "shapes": [{{"kind": "box", "dims": [0.02, 0.02, 0.02]}}]}}}}"#
        );
        parse_scene(&text, ParseMode::Strict).unwrap().scene
    }

    #[test]
    fn three_by_three_lattice() {
        let scene = planar_scene([0.1, 0.1, 0.0]);
        let grid = generate_candidates(&scene, &GridOptions::new(0.05, ZMode::FullLattice)).unwrap();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid.points[0], Vec3::new(0.0, 0.0, 0.0));
        assert_eq!(grid.points[1], Vec3::new(0.0, 0.05, 0.0));
    }

    #[test]
    fn degenerate_workspace_is_an_error() {
        let mut scene = planar_scene([0.1, 0.1, 0.0]);
        scene.workspace.max = scene.workspace.min;
        for mode in [ZMode::FullLattice, ZMode::SurfaceSnap] {
            let err = generate_candidates(&scene, &GridOptions::new(0.05, mode)).unwrap_err();
            assert_eq!(err, SceneError::EmptyWorkspace);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let scene = planar_scene([0.1, 0.1, 0.1]);
        let mut opts = GridOptions::new(0.001, ZMode::FullLattice);
        opts.point_cap = 1000;
        assert!(matches!(generate_candidates(&scene, &opts), Err(SceneError::TooManyPoints { .. })));
    }

    #[test]
    fn snap_rests_on_table_top() {
        let scene = planar_scene([0.1, 0.1, 0.1]);
        let grid = generate_candidates(&scene, &GridOptions::new(0.05, ZMode::SurfaceSnap)).unwrap();
        assert_eq!(grid.len(), 9);
        assert!(grid.points.iter().all(|p| (p.z - 0.02).abs() < 1e-12));
    }

    #[test]
    fn explicit_grid_rejects_duplicates_and_sorts() {
        let scene = planar_scene([0.1, 0.1, 0.1]);
        let g = CandidateGrid::explicit(&scene, vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(g.points[0], Vec3::zeros());
        assert!(CandidateGrid::explicit(&scene, vec![Vec3::zeros(), Vec3::zeros()]).is_err());
        assert!(CandidateGrid::explicit(&scene, vec![Vec3::new(1.0, 0.0, 0.0)]).is_err());
    }
}
