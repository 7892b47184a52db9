//! Vector and quaternion primitives, plane projection and the tracker-to-scene
//! rigid transform.
//!
//! Quaternions follow the Hamilton convention (`i*j = k`) in a right-handed
//! frame. Rotating a vector by `q` is the active rotation `q * v * q^-1`, so
//! "rotate by `Q_T^-1`" means `Q_T^-1 * v * Q_T`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for unit-norm checks on desk-scale quantities.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Norm deviation above which [`acquire_transform`] flags a warning.
pub const RENORMALIZE_WARN_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("plane normal must be unit length (|n| = {0})")]
    InvalidPlane(f64),
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn extend(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    /// Drops the z component.
    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

macro_rules! impl_vec_ops {
    ($t:ident { $($f:ident),+ }) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t { $t { $($f: self.$f + o.$f),+ } }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t { $t { $($f: self.$f - o.$f),+ } }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t { $t { $($f: -self.$f),+ } }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t { $t { $($f: self.$f * s),+ } }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, v: $t) -> $t { v * self }
        }
        impl Div<f64> for $t {
            type Output = $t;
            fn div(self, s: f64) -> $t { $t { $($f: self.$f / s),+ } }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) { $(self.$f += o.$f;)+ }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: $t) { $(self.$f -= o.$f;)+ }
        }
    };
}

impl_vec_ops!(Vec2 { x, y });
impl_vec_ops!(Vec3 { x, y, z });

/// Axis-aligned rectangle in display coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Vec2,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(center: Vec2, width: f64, height: f64) -> Self {
        Self { center, width, height }
    }

    pub fn min(&self) -> Vec2 {
        self.center - Vec2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn max(&self) -> Vec2 {
        self.center + Vec2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (lo, hi) = (self.min(), self.max());
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min()) && self.contains(other.max())
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        let (lo, hi) = (self.min(), self.max());
        Vec2::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y))
    }
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::normalize_components(w, x, y, z).map(|(q, _)| q)
    }

    /// Like [`UnitQuaternion::new`] but also returns the norm of the input.
    fn normalize_components(w: f64, x: f64, y: f64, z: f64) -> Result<(Self, f64), GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::DegenerateQuaternion);
        }
        Ok((Self { w: w / n, x: x / n, y: y / n, z: z / n }, n))
    }

    /// Rotation of `angle` radians about `axis` (right-hand rule).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let a = axis.normalized().ok_or(GeometryError::DegenerateQuaternion)?;
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Conjugate, which is the inverse for a unit quaternion.
    pub fn inverse(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * rhs`, renormalized.
    pub fn mul(&self, r: &UnitQuaternion) -> UnitQuaternion {
        let (a, b) = (self, r);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        // a product of unit quaternions cannot be degenerate
        Self::new(w, x, y, z).unwrap_or(UnitQuaternion::IDENTITY)
    }

    /// Active rotation `q * v * q^-1`.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(t)
    }

    /// True when both represent the same rotation (q and -q are equivalent).
    pub fn approx_eq(&self, o: &UnitQuaternion, tol: f64) -> bool {
        let d = self.components().iter().zip(o.components()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let s = self.components().iter().zip(o.components()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        d <= tol || s <= tol
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = GeometryError;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        UnitQuaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.components()
    }
}

/// Plane through `center` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub center: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(center: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        let p = Plane { center, normal };
        p.validate()?;
        Ok(p)
    }

    /// Builds a plane from any non-zero normal by normalizing it.
    pub fn from_normal(center: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        let n = normal.normalized().ok_or(GeometryError::InvalidPlane(normal.norm()))?;
        Self::new(center, n)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() {
            return Err(GeometryError::NonFinite("plane center"));
        }
        let n = self.normal.norm();
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(GeometryError::InvalidPlane(n));
        }
        Ok(())
    }
}

/// Orthogonal projection of `p` onto `plane`:
/// `p_f = p - ((p - c) . n) n`.
pub fn perpendicular_foot(p: Vec3, plane: &Plane) -> Result<Vec3, GeometryError> {
    plane.validate()?;
    let n = plane.normal;
    Ok(p - (p - plane.center).dot(n) * n)
}

/// How the translation part enters the point transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformVariant {
    /// `x' = Q_T^-1 (x - x_T) + x_T`, the translation is added back.
    #[default]
    AsPrinted,
    /// `x' = Q_T^-1 (x - x_T)`, a plain change of frame.
    FrameChange,
}

/// Rotation and translation bridging the tracker and scene frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
    #[serde(default)]
    pub variant: TransformVariant,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: UnitQuaternion::IDENTITY,
        translation: Vec3::ZERO,
        variant: TransformVariant::AsPrinted,
    };

    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self { rotation, translation, variant: TransformVariant::AsPrinted }
    }

    pub fn with_variant(mut self, variant: TransformVariant) -> Self {
        self.variant = variant;
        self
    }
}

pub fn apply_transform_point(t: &RigidTransform, x: Vec3) -> Vec3 {
    let d = x - t.translation;
    let rotated = t.rotation.inverse().rotate(d);
    match t.variant {
        // same as `rotated + t`, but exact when the rotation is the identity
        TransformVariant::AsPrinted => x + (rotated - d),
        TransformVariant::FrameChange => rotated,
    }
}

/// `Q' = Q_T^-1 * Q`.
pub fn apply_transform_rotation(t: &RigidTransform, q: &UnitQuaternion) -> UnitQuaternion {
    t.rotation.inverse().mul(q)
}

/// Inverse of [`apply_transform_point`].
pub fn invert_transform_point(t: &RigidTransform, y: Vec3) -> Vec3 {
    match t.variant {
        TransformVariant::AsPrinted => {
            let d = y - t.translation;
            y + (t.rotation.rotate(d) - d)
        }
        TransformVariant::FrameChange => t.rotation.rotate(y) + t.translation,
    }
}

/// Result of reading the calibrator pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquiredTransform {
    pub transform: RigidTransform,
    /// Set when the pose quaternion's norm was off by more than
    /// [`RENORMALIZE_WARN_THRESHOLD`] and had to be renormalized.
    pub renormalized_from: Option<f64>,
}

/// Uses a calibrator rigid-body pose verbatim as the tracker-to-scene transform.
pub fn acquire_transform(orientation: [f64; 4], position: Vec3) -> Result<AcquiredTransform, GeometryError> {
    if !position.is_finite() {
        return Err(GeometryError::NonFinite("calibrator position"));
    }
    let [w, x, y, z] = orientation;
    let (rotation, norm) = UnitQuaternion::normalize_components(w, x, y, z)?;
    let renormalized_from = ((norm - 1.0).abs() > RENORMALIZE_WARN_THRESHOLD).then(|| {
        log::warn!("calibrator quaternion norm {norm} renormalized");
        norm
    });
    Ok(AcquiredTransform { transform: RigidTransform::new(rotation, position), renormalized_from })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn foot_axis_aligned() {
        let plane = Plane::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(perpendicular_foot(Vec3::new(1.0, 2.0, 3.0), &plane).unwrap(), Vec3::new(1.0, 2.0, 0.0));
        let on = Vec3::new(4.0, -1.0, 0.0);
        assert_eq!(perpendicular_foot(on, &plane).unwrap(), on);
    }

    #[test]
    fn foot_oblique_plane() {
        let plane = Plane::from_normal(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let f = perpendicular_foot(Vec3::new(2.0, 2.0, 2.0), &plane).unwrap();
        assert!(close(f, Vec3::new(1.0, 1.0, 1.0), 1e-12));
        assert!((f - plane.center).dot(plane.normal).abs() < 1e-12);
    }

    #[test]
    fn foot_rejects_non_unit_normal() {
        let plane = Plane { center: Vec3::ZERO, normal: Vec3::new(0.0, 0.0, 2.0) };
        assert!(matches!(perpendicular_foot(Vec3::ZERO, &plane), Err(GeometryError::InvalidPlane(_))));
    }

    #[test]
    fn transform_examples() {
        let t = RigidTransform::new(UnitQuaternion::IDENTITY, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(apply_transform_point(&t, Vec3::new(5.0, 5.0, 5.0)), Vec3::new(5.0, 5.0, 5.0));

        let rz = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2).unwrap();
        let t = RigidTransform::new(rz, Vec3::new(0.3, -2.0, 1.0));
        assert!(close(apply_transform_point(&t, t.translation), t.translation, 1e-15));

        let t = RigidTransform::new(rz, Vec3::ZERO);
        let y = apply_transform_point(&t, Vec3::new(1.0, 0.0, 0.0));
        assert!(close(y, Vec3::new(0.0, -1.0, 0.0), 1e-15));
        assert!(close(invert_transform_point(&t, y), Vec3::new(1.0, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn frame_change_variant_drops_translation() {
        let t = RigidTransform::new(UnitQuaternion::IDENTITY, Vec3::new(1.0, 2.0, 3.0))
            .with_variant(TransformVariant::FrameChange);
        assert_eq!(apply_transform_point(&t, Vec3::new(1.0, 2.0, 3.0)), Vec3::ZERO);
        assert_eq!(invert_transform_point(&t, Vec3::ZERO), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn rotation_examples() {
        let rz = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2).unwrap();
        let id = RigidTransform::new(UnitQuaternion::IDENTITY, Vec3::ZERO);
        assert!(apply_transform_rotation(&id, &rz).approx_eq(&rz, 1e-15));
        let t = RigidTransform::new(rz, Vec3::ZERO);
        assert!(apply_transform_rotation(&t, &rz).approx_eq(&UnitQuaternion::IDENTITY, 1e-15));
    }

    #[test]
    fn acquire_passes_pose_through() {
        let a = acquire_transform([1.0, 0.0, 0.0, 0.0], Vec3::ZERO).unwrap();
        assert_eq!(a.transform, RigidTransform::IDENTITY);
        assert!(a.renormalized_from.is_none());

        let q = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7).unwrap();
        let x = Vec3::new(0.1, 0.2, 0.3);
        let a = acquire_transform(q.components(), x).unwrap();
        assert_eq!(a.transform.translation, x);
        assert!(a.transform.rotation.approx_eq(&q, 1e-15));
    }

    #[test]
    fn acquire_renormalizes_and_warns() {
        let s = 1.0 + 1e-5;
        let a = acquire_transform([s, 0.0, 0.0, 0.0], Vec3::ZERO).unwrap();
        assert!((a.transform.rotation.norm() - 1.0).abs() < 1e-12);
        assert!((a.renormalized_from.unwrap() - s).abs() < 1e-12);
        // tiny deviations are silently absorbed
        let a = acquire_transform([1.0 + 1e-8, 0.0, 0.0, 0.0], Vec3::ZERO).unwrap();
        assert!(a.renormalized_from.is_none());
        assert!(acquire_transform([0.0; 4], Vec3::ZERO).is_err());
    }

    #[test]
    fn rect_clamp_and_contains() {
        let r = Rect::new(Vec2::ZERO, 2.0, 1.0);
        assert!(r.contains(Vec2::new(1.0, 0.5)));
        assert!(!r.contains(Vec2::new(1.01, 0.0)));
        assert_eq!(r.clamp(Vec2::new(3.0, -3.0)), Vec2::new(1.0, -0.5));
    }
}
