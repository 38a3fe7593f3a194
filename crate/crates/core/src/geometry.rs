//! Small geometric vocabulary shared by every stage: points, canonical
//! quaternions, rigid poses and axis-aligned boxes.

use nalgebra::{Unit, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point or direction in world space, meters, +z up.
pub type Vec3 = Vector3<f64>;
/// A point in the horizontal plane.
pub type Vec2 = Vector2<f64>;

/// Quaternion norms further than this from 1 are rejected instead of renormalized.
const NORMALIZE_SLACK: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("vector component is not finite")]
    NonFinite,
    #[error("quaternion norm {0} is not close to 1")]
    NotUnit(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
}

pub fn check_finite(v: &Vec3) -> Result<(), GeometryError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

/// Unit quaternion kept in the hemisphere `w >= 0`, so the scalar component
/// of two equal rotations always compares equal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuat(UnitQuaternion<f64>);

impl UnitQuat {
    pub fn identity() -> Self {
        UnitQuat(UnitQuaternion::identity())
    }

    /// Builds from `[w, x, y, z]`. Inputs within a small slack of unit norm
    /// (hand-written documents) are renormalized.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = nalgebra::Quaternion::new(w, x, y, z);
        if !q.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = q.norm();
        if (n - 1.0).abs() > NORMALIZE_SLACK {
            return Err(GeometryError::NotUnit(n));
        }
        // Already-unit input is kept bit-for-bit so documents round-trip exactly.
        let unit = if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Self::from_unit(unit))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, GeometryError> {
        let axis = Unit::try_new(*axis, 1e-12).ok_or(GeometryError::ZeroAxis)?;
        Ok(Self::from_unit(UnitQuaternion::from_axis_angle(&axis, angle)))
    }

    pub fn from_unit(q: UnitQuaternion<f64>) -> Self {
        if q.w < 0.0 {
            UnitQuat(UnitQuaternion::new_unchecked(-q.into_inner()))
        } else {
            UnitQuat(q)
        }
    }

    /// Scalar component, in `[0, 1]`.
    pub fn w(&self) -> f64 {
        self.0.w
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.0.w, self.0.i, self.0.j, self.0.k]
    }

    pub fn as_unit(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &UnitQuat) -> UnitQuat {
        Self::from_unit(self.0 * other.0)
    }

    /// Angle of the rotation taking `self` to `other`, radians.
    pub fn angle_to(&self, other: &UnitQuat) -> f64 {
        self.0.angle_to(&other.0)
    }

    pub fn slerp(&self, other: &UnitQuat, t: f64) -> UnitQuat {
        Self::from_unit(self.0.slerp(&other.0, t))
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for UnitQuat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.wxyz().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        UnitQuat::from_wxyz(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

/// Rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Pose { position, orientation }
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose { position, orientation: UnitQuat::identity() }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation.rotate(v)
    }

    /// `self ∘ child`: places a pose expressed in this frame into the parent frame.
    pub fn compose(&self, child: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&child.position),
            orientation: self.orientation.compose(&child.orientation),
        }
    }

    /// Applies `rotation` about `pivot` to the whole pose.
    pub fn rotated_about(&self, pivot: &Vec3, rotation: &UnitQuat) -> Pose {
        Pose {
            position: pivot + rotation.rotate(&(self.position - pivot)),
            orientation: rotation.compose(&self.orientation),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Aabb> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut b = Aabb { min: first, max: first };
        for p in iter {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn half_extents(&self) -> Vec3 {
        self.size() * 0.5
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn overlaps(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] + tol && other.min[i] <= self.max[i] + tol)
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let excess = (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0);
            d2 += excess * excess;
        }
        d2.sqrt()
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb { min: self.min - m, max: self.max + m }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn canonical_quaternion_has_nonnegative_w() {
        let q = UnitQuat::from_wxyz(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q.wxyz(), [1.0, 0.0, 0.0, 0.0]);
        let r = UnitQuat::from_axis_angle(&Vec3::x(), 3.5).unwrap();
        assert!(r.w() >= 0.0);
    }

    #[test]
    fn far_from_unit_is_rejected() {
        assert!(matches!(UnitQuat::from_wxyz(2.0, 0.0, 0.0, 0.0), Err(GeometryError::NotUnit(_))));
        let q = UnitQuat::from_wxyz(0.7071, 0.0, 0.0, 0.7071).unwrap();
        let n: f64 = q.wxyz().iter().map(|c| c * c).sum();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotate_about_pivot() {
        let pose = Pose::from_position(Vec3::new(1.0, 0.0, 0.0));
        let rot = UnitQuat::from_axis_angle(&Vec3::z(), FRAC_PI_2).unwrap();
        let out = pose.rotated_about(&Vec3::zeros(), &rot);
        assert_relative_eq!(out.position, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn aabb_distance() {
        let b = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        assert_eq!(b.distance_to(&Vec3::new(0.5, 0.5, 0.5)), 0.0);
        assert_relative_eq!(b.distance_to(&Vec3::new(2.0, 0.5, 0.5)), 1.0);
        assert_relative_eq!(b.distance_to(&Vec3::new(2.0, 2.0, 0.5)), 2f64.sqrt());
    }
}
