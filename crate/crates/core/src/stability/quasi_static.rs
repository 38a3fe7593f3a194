//! Built-in rigid-body backend. The placed object moves against a frozen
//! scene: it rests on its support polygon, tips about the support boundary,
//! or falls freely. Contacts come from the separating-axis manifold between
//! convex pieces, so boxes are exact and cylinders are fine prisms.

use std::sync::Arc;

use nalgebra::Matrix3;

use super::backend::{BackendError, PhysicsBackend};
use crate::geometry::{Aabb, Pose, UnitQuat, Vec2, Vec3};
use crate::planar::{convex_hull, query_boundary};
use crate::polytope::{contact_points, separation, ConvexPolytope};
use crate::scene::{Scene, SceneObject, ShapeKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiStaticParams {
    /// Gap below which two bodies are in contact, meters.
    pub contact_tolerance: f64,
    /// Overlap above which a pose counts as penetrating, meters.
    pub penetration_tolerance: f64,
    /// The centre of mass must sit this far inside the support polygon to rest.
    pub rest_margin: f64,
    /// Decay time constant of a recoverable tilt, in steps.
    pub return_steps: f64,
    /// Residual tilt below which a recovering object counts as at rest, radians.
    pub settle_angle: f64,
    pub max_substep_rotation: f64,
    pub max_substep_translation: f64,
}

impl Default for QuasiStaticParams {
    fn default() -> Self {
        QuasiStaticParams {
            contact_tolerance: 1e-5,
            penetration_tolerance: 1e-6,
            rest_margin: 1e-4,
            return_steps: 10.0,
            settle_angle: 1e-5,
            max_substep_rotation: 0.02,
            max_substep_translation: 0.002,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct QuasiStaticBackend {
    pub params: QuasiStaticParams,
}

impl QuasiStaticBackend {
    pub fn new(params: QuasiStaticParams) -> Self {
        QuasiStaticBackend { params }
    }
}

enum Collider {
    Poly { poly: ConvexPolytope, aabb: Aabb },
    Unsupported { aabb: Aabb, what: String },
}

struct World {
    colliders: Vec<Collider>,
    floor: f64,
    gravity: f64,
}

struct Body {
    shapes: Vec<ConvexPolytope>,
    com: Vec3,
    unit_inertia: Matrix3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Mode {
    Evaluate,
    Resting,
    Tipping { pivot: Vec3, axis: Vec3, omega: f64 },
    Falling { speed: f64, dir: Vec3 },
    Tilted { pre: Pose, axis: Vec3, angle: f64 },
    Returning { rest: Pose, tilted: Pose, elapsed: u32, angle: f64 },
    Jammed,
    Fallen,
}

#[derive(Clone)]
pub struct QuasiStaticState {
    world: Arc<World>,
    body: Arc<Body>,
    pose: Pose,
    mode: Mode,
    /// Preferred tipping direction when the support gives none.
    bias: Vec2,
    stalled: u8,
}

impl QuasiStaticState {
    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.pose.transform_point(&self.body.com)
    }

    pub fn has_fallen(&self) -> bool {
        self.mode == Mode::Fallen
    }
}

struct Contact {
    point: Vec3,
    normal: Vec3,
}

fn unsupported_pair(what: &str) -> BackendError {
    BackendError::UnsupportedGeometry(format!("no contact model for {what}"))
}

impl QuasiStaticBackend {
    fn body_polys(&self, body: &Body, pose: &Pose) -> Vec<ConvexPolytope> {
        body.shapes.iter().map(|p| p.transformed(pose)).collect()
    }

    /// Deepest overlap of the body at `pose` with any collider; zero when clear.
    fn penetration(&self, world: &World, body: &Body, pose: &Pose) -> Result<f64, BackendError> {
        let mut depth: f64 = 0.0;
        for bp in self.body_polys(body, pose) {
            let bb = bp.aabb();
            for c in &world.colliders {
                match c {
                    Collider::Poly { poly, aabb } => {
                        if aabb.overlaps(&bb, 0.0) {
                            depth = depth.max(-separation(&bp, poly).distance);
                        }
                    }
                    Collider::Unsupported { aabb, what } => {
                        if aabb.overlaps(&bb, self.params.contact_tolerance) {
                            return Err(unsupported_pair(what));
                        }
                    }
                }
            }
        }
        Ok(depth)
    }

    fn penetrates(&self, world: &World, body: &Body, pose: &Pose) -> Result<bool, BackendError> {
        Ok(self.penetration(world, body, pose)? > self.params.penetration_tolerance)
    }

    fn contacts(&self, world: &World, body: &Body, pose: &Pose) -> Result<Vec<Contact>, BackendError> {
        let tol = self.params.contact_tolerance;
        let mut out = Vec::new();
        for bp in self.body_polys(body, pose) {
            let bb = bp.aabb();
            for c in &world.colliders {
                match c {
                    Collider::Poly { poly, aabb } => {
                        if !aabb.overlaps(&bb, tol) {
                            continue;
                        }
                        let sep = separation(&bp, poly);
                        if sep.distance <= tol {
                            for point in contact_points(&bp, poly, &sep, tol) {
                                out.push(Contact { point, normal: sep.normal });
                            }
                        }
                    }
                    Collider::Unsupported { aabb, what } => {
                        if aabb.overlaps(&bb, tol) {
                            return Err(unsupported_pair(what));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn below_floor(&self, s: &QuasiStaticState, pose: &Pose) -> bool {
        let top = self
            .body_polys(&s.body, pose)
            .iter()
            .map(|p| p.aabb().max.z)
            .fold(f64::NEG_INFINITY, f64::max);
        top < s.world.floor
    }

    /// Largest fraction of the motion `f(1)` that stays clear, by bisection.
    fn clear_fraction(&self, s: &QuasiStaticState, motion: impl Fn(f64) -> Pose) -> Result<f64, BackendError> {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.penetrates(&s.world, &s.body, &motion(mid))? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Classifies the current contacts into resting, tipping or falling.
    fn evaluate(&self, s: &QuasiStaticState) -> Result<Mode, BackendError> {
        if self.below_floor(s, &s.pose) {
            return Ok(Mode::Fallen);
        }
        let contacts = self.contacts(&s.world, &s.body, &s.pose)?;
        let supported = contacts.iter().any(|c| c.normal.z > 0.05);
        if !supported {
            return Ok(if s.stalled >= 2 { Mode::Jammed } else { falling(&contacts) });
        }
        let support: Vec<&Contact> = contacts.iter().filter(|c| c.normal.z > -1e-9).collect();
        let flat: Vec<Vec2> = support.iter().map(|c| c.point.xy()).collect();
        let hull_idx = convex_hull(&flat, 1e-9);
        let hull: Vec<Vec2> = hull_idx.iter().map(|&i| flat[i]).collect();
        let com = s.center_of_mass();
        let q = query_boundary(&hull, &com.xy());
        if hull.len() >= 3 && q.depth >= self.params.rest_margin {
            return Ok(Mode::Resting);
        }
        if s.stalled >= 2 {
            return Ok(Mode::Jammed);
        }
        if s.stalled == 1 {
            return Ok(falling(&contacts));
        }
        let u = q.outward.unwrap_or_else(|| tie_break(&hull, &s.bias));
        let (i, j, t) = q.feature;
        let (a, b) = (support[hull_idx[i]].point, support[hull_idx[j]].point);
        let pivot = a + (b - a) * t;
        let axis = Vec3::z().cross(&Vec3::new(u.x, u.y, 0.0));
        Ok(Mode::Tipping { pivot, axis, omega: 0.0 })
    }

    fn tip(&self, s: &mut QuasiStaticState, pivot: Vec3, axis: Vec3, omega: f64, dt: f64) -> Result<(), BackendError> {
        let com = s.center_of_mass();
        if com.z < pivot.z {
            let contacts = self.contacts(&s.world, &s.body, &s.pose)?;
            s.mode = falling(&contacts);
            return Ok(());
        }
        let u = axis.cross(&Vec3::z());
        let r = com - pivot;
        let lever = r.dot(&u).max(self.params.rest_margin);
        let rot = s.pose.orientation.as_unit().to_rotation_matrix();
        let inertia = rot.matrix() * s.body.unit_inertia * rot.matrix().transpose();
        let perp = r - axis * r.dot(&axis);
        let i_axis = axis.dot(&(inertia * axis)) + perp.norm_squared();
        let omega = omega + s.world.gravity * lever / i_axis * dt;
        let dtheta = omega * dt;
        let n = (dtheta / self.params.max_substep_rotation).ceil().max(1.0) as usize;
        let sub = dtheta / n as f64;
        for _ in 0..n {
            let start = s.pose;
            let motion = |f: f64| start.rotated_about(&pivot, &rotation(&axis, sub * f));
            if self.penetrates(&s.world, &s.body, &motion(1.0))? {
                let f = self.clear_fraction(s, motion)?;
                s.pose = motion(f);
                s.stalled = if (sub * f).abs() < 1e-9 { s.stalled + 1 } else { 0 };
                s.mode = Mode::Evaluate;
                return Ok(());
            }
            s.pose = motion(1.0);
        }
        s.stalled = 0;
        s.mode = if self.below_floor(s, &s.pose) { Mode::Fallen } else { Mode::Tipping { pivot, axis, omega } };
        Ok(())
    }

    fn fall(&self, s: &mut QuasiStaticState, speed: f64, dir: Vec3, dt: f64) -> Result<(), BackendError> {
        let mut dir = dir;
        if dir.z > -1.0 {
            // Sliding: re-aim along whatever contacts remain.
            if let Mode::Falling { dir: d, .. } = falling(&self.contacts(&s.world, &s.body, &s.pose)?) {
                dir = d;
            }
        }
        let speed = speed + s.world.gravity * dt;
        let drop = speed * dt;
        let n = (drop / self.params.max_substep_translation).ceil().max(1.0) as usize;
        let sub = drop / n as f64;
        for _ in 0..n {
            let start = s.pose;
            let motion = |f: f64| Pose::new(start.position + dir * (sub * f), start.orientation);
            if self.penetrates(&s.world, &s.body, &motion(1.0))? {
                let f = self.clear_fraction(s, motion)?;
                s.pose = motion(f);
                s.stalled = if sub * f < 1e-9 { s.stalled + 1 } else { 0 };
                s.mode = Mode::Evaluate;
                return Ok(());
            }
            s.pose = motion(1.0);
        }
        s.stalled = 0;
        s.mode = if self.below_floor(s, &s.pose) { Mode::Fallen } else { Mode::Falling { speed, dir } };
        Ok(())
    }

    /// Settles a fresh tilt: either the tilted footprint still holds the
    /// centre of mass and the object rocks back, or it re-seats on the edge it
    /// tilted over and continues from there.
    fn resolve_tilt(&self, s: &mut QuasiStaticState, pre: Pose, axis: Vec3, angle: f64) -> Result<(), BackendError> {
        let tilted = s.pose;
        let com = s.center_of_mass();
        let rot = rotation(&axis, angle);
        let pre_contacts: Vec<Vec3> = self
            .contacts(&s.world, &s.body, &pre)?
            .into_iter()
            .filter(|c| c.normal.z > -1e-9)
            .map(|c| c.point)
            .collect();
        let supported = !pre_contacts.is_empty();
        if supported {
            let moved: Vec<Vec2> = pre_contacts.iter().map(|p| (com + rot.rotate(&(p - com))).xy()).collect();
            let hull_idx = convex_hull(&moved, 1e-9);
            let hull: Vec<Vec2> = hull_idx.iter().map(|&i| moved[i]).collect();
            let q = query_boundary(&hull, &com.xy());
            if hull.len() >= 3 && q.depth >= self.params.rest_margin {
                s.mode = Mode::Returning { rest: pre, tilted, elapsed: 0, angle: angle.abs() };
                return Ok(());
            }
            let (i, j, t) = q.feature;
            let (a, b) = (pre_contacts[hull_idx[i]], pre_contacts[hull_idx[j]]);
            let pivot = a + (b - a) * t;
            let motion = |f: f64| pre.rotated_about(&pivot, &rotation(&axis, angle * f));
            let f = if self.penetrates(&s.world, &s.body, &motion(1.0))? { self.clear_fraction(s, motion)? } else { 1.0 };
            s.pose = motion(f);
        } else if self.penetrates(&s.world, &s.body, &tilted)? {
            let c = pre.transform_point(&s.body.com);
            let motion = |f: f64| pre.rotated_about(&c, &rotation(&axis, angle * f));
            let f = self.clear_fraction(s, motion)?;
            s.pose = motion(f);
        }
        s.stalled = 0;
        s.mode = Mode::Evaluate;
        Ok(())
    }

    fn advance(&self, s: &mut QuasiStaticState, dt: f64) -> Result<(), BackendError> {
        match s.mode.clone() {
            Mode::Resting | Mode::Jammed | Mode::Fallen => Ok(()),
            Mode::Evaluate => {
                s.mode = self.evaluate(s)?;
                match s.mode {
                    Mode::Evaluate => unreachable!("evaluation always classifies"),
                    _ => self.advance(s, dt),
                }
            }
            Mode::Tipping { pivot, axis, omega } => self.tip(s, pivot, axis, omega, dt),
            Mode::Falling { speed, dir } => self.fall(s, speed, dir, dt),
            Mode::Tilted { pre, axis, angle } => self.resolve_tilt(s, pre, axis, angle),
            Mode::Returning { rest, tilted, elapsed, angle } => {
                let elapsed = elapsed + 1;
                let f = (-(elapsed as f64) / self.params.return_steps).exp();
                if f * angle < 1e-12 {
                    s.pose = rest;
                    s.mode = Mode::Resting;
                } else {
                    s.pose = Pose::new(
                        rest.position + (tilted.position - rest.position) * f,
                        rest.orientation.slerp(&tilted.orientation, f),
                    );
                    s.mode = Mode::Returning { rest, tilted, elapsed, angle };
                }
                Ok(())
            }
        }
    }
}

/// Gravity projected onto the contact planes it pushes into, so an
/// unsupported object slides off edges and along walls.
fn falling(contacts: &[Contact]) -> Mode {
    let mut dir = -Vec3::z();
    for _ in 0..2 {
        for c in contacts {
            let into = dir.dot(&c.normal);
            if into < 0.0 {
                dir -= c.normal * into;
            }
        }
    }
    if dir.norm() < 1e-6 {
        return Mode::Jammed;
    }
    Mode::Falling { speed: 0.0, dir: dir.normalize() }
}

fn rotation(axis: &Vec3, angle: f64) -> UnitQuat {
    UnitQuat::from_axis_angle(axis, angle).expect("nonzero axis")
}

/// Outward direction for a support with no preferred side: the last tilt
/// direction, else +x, then +y.
fn tie_break(hull: &[Vec2], bias: &Vec2) -> Vec2 {
    if hull.len() == 2 {
        let e = hull[1] - hull[0];
        let n = e.norm();
        if n > 1e-12 {
            let p = Vec2::new(-e.y, e.x) / n;
            let s = p.dot(bias);
            if s.abs() > 1e-12 {
                return p * s.signum();
            }
            return if p.x > 1e-12 || (p.x.abs() <= 1e-12 && p.y > 0.0) { p } else { -p };
        }
    }
    *bias
}

fn build_world(scene: &Scene) -> World {
    let mut colliders = Vec::new();
    for obj in &scene.objects {
        for s in &obj.shapes {
            match s.polytope(&obj.pose) {
                Some(poly) => {
                    let aabb = poly.aabb();
                    colliders.push(Collider::Poly { poly, aabb });
                }
                None => colliders.push(Collider::Unsupported {
                    aabb: s.aabb(&obj.pose),
                    what: format!("{} shape of '{}'", s.kind.name(), obj.id),
                }),
            }
        }
    }
    World { colliders, floor: scene.workspace.min.z, gravity: scene.gravity }
}

fn build_body(object: &SceneObject) -> Result<Body, BackendError> {
    let mut shapes = Vec::new();
    for s in &object.shapes {
        if let ShapeKind::Sphere { .. } = s.kind {
            return Err(BackendError::UnsupportedGeometry(format!(
                "sphere shape on placed object '{}'",
                object.id
            )));
        }
        shapes.push(s.polytope(&Pose::default()).expect("polytope shape"));
    }
    Ok(Body { shapes, com: object.local_center_of_mass(), unit_inertia: object.local_unit_inertia() })
}

impl PhysicsBackend for QuasiStaticBackend {
    type State = QuasiStaticState;

    fn place(&self, scene: &Scene, object: &SceneObject, point: &Vec3) -> Result<QuasiStaticState, BackendError> {
        if !point.iter().all(|c| c.is_finite()) {
            return Err(BackendError::Invalid("placement point is not finite".into()));
        }
        let body = build_body(object)?;
        let world = build_world(scene);
        let pose = Pose::new(*point, object.pose.orientation);
        let state = QuasiStaticState {
            world: Arc::new(world),
            body: Arc::new(body),
            pose,
            mode: Mode::Evaluate,
            bias: Vec2::x(),
            stalled: 0,
        };
        // Surfaces unsupported pairs at placement rather than mid-run.
        self.penetration(&state.world, &state.body, &state.pose)?;
        Ok(state)
    }

    fn step(&self, state: &QuasiStaticState, dt: f64) -> Result<QuasiStaticState, BackendError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(BackendError::Invalid(format!("step size {dt}")));
        }
        let mut s = state.clone();
        self.advance(&mut s, dt)?;
        Ok(s)
    }

    fn tilt(&self, state: &QuasiStaticState, axis: &Vec3, angle: f64) -> Result<QuasiStaticState, BackendError> {
        let n = axis.norm();
        if !(n.is_finite() && n > 1e-12) || axis.z.abs() > 1e-9 * n || !angle.is_finite() {
            return Err(BackendError::Invalid("tilt axis must be horizontal and nonzero".into()));
        }
        let axis = axis / n;
        let mut s = state.clone();
        if s.mode == Mode::Fallen {
            return Ok(s);
        }
        let pre = match &s.mode {
            // A tilt during recovery starts from the resting pose.
            Mode::Returning { rest, .. } => *rest,
            _ => s.pose,
        };
        let com = pre.transform_point(&s.body.com);
        s.pose = pre.rotated_about(&com, &rotation(&axis, angle));
        let lean = axis.cross(&Vec3::z()) * angle.signum();
        if lean.xy().norm() > 1e-12 {
            s.bias = lean.xy().normalize();
        }
        s.mode = Mode::Tilted { pre, axis, angle };
        Ok(s)
    }

    fn orientation(&self, state: &QuasiStaticState) -> UnitQuat {
        state.pose.orientation
    }

    fn at_rest(&self, state: &QuasiStaticState) -> bool {
        match &state.mode {
            Mode::Resting | Mode::Jammed => true,
            Mode::Returning { elapsed, angle, .. } => {
                angle * (-(*elapsed as f64) / self.params.return_steps).exp() <= self.params.settle_angle
            }
            _ => false,
        }
    }

    fn penetrating(&self, state: &QuasiStaticState) -> bool {
        // Unsupported pairs were rejected by `place`, so this cannot fail for a placed state.
        self.penetrates(&state.world, &state.body, &state.pose).unwrap_or(true)
    }
}
