//! Convex polytopes in world space with separating-axis distance and
//! contact-manifold extraction. Boxes are exact; cylinders are regular prisms.

use crate::geometry::{Aabb, Pose, Vec2, Vec3};
use crate::planar;

/// Side count used when a cylinder is turned into a prism.
pub const CYLINDER_SEGMENTS: usize = 32;

const AXIS_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ConvexPolytope {
    pub vertices: Vec<Vec3>,
    /// One representative per family of parallel faces.
    pub face_normals: Vec<Vec3>,
    pub edge_dirs: Vec<Vec3>,
}

impl ConvexPolytope {
    pub fn cuboid(half: &Vec3) -> Self {
        let mut vertices = Vec::with_capacity(8);
        for &sz in &[-1.0, 1.0] {
            for &sy in &[-1.0, 1.0] {
                for &sx in &[-1.0, 1.0] {
                    vertices.push(Vec3::new(sx * half.x, sy * half.y, sz * half.z));
                }
            }
        }
        ConvexPolytope {
            vertices,
            face_normals: vec![Vec3::x(), Vec3::y(), Vec3::z()],
            edge_dirs: vec![Vec3::x(), Vec3::y(), Vec3::z()],
        }
    }

    /// Regular prism inscribed in a cylinder of `radius` along local z.
    pub fn prism(radius: f64, half_height: f64, segments: usize) -> Self {
        let mut vertices = Vec::with_capacity(2 * segments);
        let mut face_normals = vec![Vec3::z()];
        let mut edge_dirs = vec![Vec3::z()];
        let step = std::f64::consts::TAU / segments as f64;
        for &z in &[-half_height, half_height] {
            for k in 0..segments {
                let a = step * k as f64;
                vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
            }
        }
        for k in 0..segments {
            let mid = step * (k as f64 + 0.5);
            face_normals.push(Vec3::new(mid.cos(), mid.sin(), 0.0));
            edge_dirs.push(Vec3::new(-mid.sin(), mid.cos(), 0.0));
        }
        ConvexPolytope { vertices, face_normals, edge_dirs }
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        ConvexPolytope {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            face_normals: self.face_normals.iter().map(|n| pose.transform_vector(n)).collect(),
            edge_dirs: self.edge_dirs.iter().map(|e| pose.transform_vector(e)).collect(),
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("polytope has vertices")
    }

    fn project(&self, axis: &Vec3) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.vertices {
            let d = v.dot(axis);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}

/// Signed distance between two convex bodies along the best separating axis.
#[derive(Clone, Copy, Debug)]
pub struct Separation {
    /// Positive when apart, negative when overlapping (penetration depth).
    pub distance: f64,
    /// Unit axis pointing from `b` toward `a`.
    pub normal: Vec3,
}

/// Separating-axis test over face normals of both bodies and pairwise edge
/// cross products. Face axes win ties so resting contacts report face normals.
pub fn separation(a: &ConvexPolytope, b: &ConvexPolytope) -> Separation {
    let mut best = Separation { distance: f64::NEG_INFINITY, normal: Vec3::z() };
    let mut consider = |axis: Vec3| {
        let (amin, amax) = a.project(&axis);
        let (bmin, bmax) = b.project(&axis);
        let above = amin - bmax;
        let below = bmin - amax;
        let (d, n) = if above >= below { (above, axis) } else { (below, -axis) };
        if d > best.distance + 1e-12 {
            best = Separation { distance: d, normal: n };
        }
    };
    for n in a.face_normals.iter().chain(b.face_normals.iter()) {
        consider(*n);
    }
    for ea in &a.edge_dirs {
        for eb in &b.edge_dirs {
            let c = ea.cross(eb);
            let len = c.norm();
            if len > AXIS_EPS {
                consider(c / len);
            }
        }
    }
    best
}

fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Contact points between `a` and `b` along `sep.normal`: the overlap of the
/// two supporting features (face, edge or vertex) within `tol` of the contact plane.
pub fn contact_points(a: &ConvexPolytope, b: &ConvexPolytope, sep: &Separation, tol: f64) -> Vec<Vec3> {
    let n = sep.normal;
    let (amin, _) = a.project(&n);
    let (_, bmax) = b.project(&n);
    let (u, v) = plane_basis(&n);
    let to2 = |p: &Vec3| Vec2::new(p.dot(&u), p.dot(&v));
    let fa: Vec<Vec2> = a.vertices.iter().filter(|p| p.dot(&n) <= amin + tol).map(to2).collect();
    let fb: Vec<Vec2> = b.vertices.iter().filter(|p| p.dot(&n) >= bmax - tol).map(to2).collect();
    let mid = 0.5 * (amin + bmax);
    planar::intersect_convex(&fa, &fb, tol)
        .into_iter()
        .map(|q| n * mid + u * q.x + v * q.y)
        .collect()
}
