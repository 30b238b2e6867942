//! Axis-aligned cuboids, rigid poses, and the 3D IoU kernel.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocabulary::ClassId;

pub type Point = Vector3<f64>;

/// Smallest extent a fitted cuboid may have along any axis, in meters.
pub const MIN_EXTENT: f64 = 1e-6;

const PROB_SUM_TOL: f64 = 1e-6;

/// Closed axis-aligned box given by its corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if (0..3).any(|k| !(max[k] > min[k]) || !min[k].is_finite() || !max[k].is_finite()) {
            return Err(Error::InvalidParams(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Aabb { min, max })
    }

    pub fn size(&self) -> Point {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Point::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn overlap_volume(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|k| (self.max[k].min(other.max[k]) - self.min[k].max(other.min[k])).max(0.0))
            .product()
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|k| self.max[k] - self.min[k]).product()
    }

    /// Slab-method ray test. Returns the parametric entry and exit distances
    /// `(t_enter, t_exit)` along `origin + t * dir` when the infinite line
    /// crosses the box and `t_exit >= max(t_enter, 0)`.
    pub fn ray_intersect(&self, origin: &Point, dir: &Point) -> Option<(f64, f64)> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for k in 0..3 {
            if dir[k] == 0.0 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[k];
            let mut t0 = (self.min[k] - origin[k]) * inv;
            let mut t1 = (self.max[k] - origin[k]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
        }
        (t_exit >= t_enter && t_exit >= 0.0).then_some((t_enter, t_exit))
    }
}

/// World-axis-aligned object box with a label distribution.
///
/// `label_probs`, when present, is indexed by [`ClassId`] (index 0 is
/// background). When absent the cuboid is treated as one-hot on `class_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cuboid {
    centroid: Point,
    extent: Point,
    class_id: ClassId,
    label_probs: Option<Vec<f64>>,
    confidence: f64,
}

impl Cuboid {
    pub fn new(centroid: Point, extent: Point, class_id: ClassId) -> Result<Self> {
        if !centroid.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCuboid(format!("non-finite centroid {centroid:?}")));
        }
        if !extent.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidCuboid(format!(
                "extent components must be positive, got [{}, {}, {}]",
                extent.x, extent.y, extent.z
            )));
        }
        Ok(Cuboid {
            centroid,
            extent,
            class_id,
            label_probs: None,
            confidence: 1.0,
        })
    }

    pub fn from_aabb(bounds: &Aabb, class_id: ClassId) -> Result<Self> {
        Cuboid::new(bounds.center(), bounds.size(), class_id)
    }

    /// Relabels the cuboid; any attached distribution is dropped.
    pub fn with_class(mut self, class_id: ClassId) -> Self {
        self.class_id = class_id;
        self.label_probs = None;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidCuboid(format!("confidence {confidence} outside [0, 1]")));
        }
        self.confidence = confidence;
        Ok(self)
    }

    /// Attaches a label distribution. The class id must be its argmax.
    pub fn with_label_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidCuboid("label_probs must be non-negative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidCuboid(format!("label_probs sum to {sum}, expected 1")));
        }
        let own = probs.get(self.class_id.index()).copied().ok_or_else(|| {
            Error::InvalidCuboid(format!(
                "label_probs has {} entries but class id is {}",
                probs.len(),
                self.class_id
            ))
        })?;
        if probs.iter().any(|&p| p > own) {
            return Err(Error::InvalidCuboid(format!(
                "class id {} is not the argmax of label_probs",
                self.class_id
            )));
        }
        self.label_probs = Some(probs);
        Ok(self)
    }

    pub fn centroid(&self) -> &Point {
        &self.centroid
    }

    pub fn extent(&self) -> &Point {
        &self.extent
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn label_probs(&self) -> Option<&[f64]> {
        self.label_probs.as_deref()
    }

    /// Probability assigned to `class`, using the implied one-hot when no
    /// distribution is attached.
    pub fn label_prob(&self, class: ClassId) -> f64 {
        match &self.label_probs {
            Some(p) => p.get(class.index()).copied().unwrap_or(0.0),
            None if class == self.class_id => 1.0,
            None => 0.0,
        }
    }

    pub fn min_corner(&self) -> Point {
        self.centroid - self.extent * 0.5
    }

    pub fn max_corner(&self) -> Point {
        self.centroid + self.extent * 0.5
    }

    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.min_corner(),
            max: self.max_corner(),
        }
    }

    pub fn contains_point(&self, p: &Point, tol: f64) -> bool {
        let (lo, hi) = (self.min_corner(), self.max_corner());
        (0..3).all(|k| p[k] >= lo[k] - tol && p[k] <= hi[k] + tol)
    }

    pub fn translated(&self, offset: &Point) -> Cuboid {
        Cuboid {
            centroid: self.centroid + offset,
            ..self.clone()
        }
    }
}

pub fn cuboid_volume(c: &Cuboid) -> f64 {
    c.extent.x * c.extent.y * c.extent.z
}

pub fn overlap_volume(a: &Cuboid, b: &Cuboid) -> f64 {
    a.aabb().overlap_volume(&b.aabb())
}

/// Intersection over union of two cuboids.
///
/// Volumes are taken from the same corner spans as the overlap so that
/// `iou3d(a, a)` is exactly 1.
pub fn iou3d(a: &Cuboid, b: &Cuboid) -> f64 {
    let (ba, bb) = (a.aabb(), b.aabb());
    let overlap = ba.overlap_volume(&bb);
    if overlap <= 0.0 {
        return 0.0;
    }
    let union = ba.volume() + bb.volume() - overlap;
    (overlap / union).clamp(0.0, 1.0)
}

/// Tightest axis-aligned box around `points`, with every extent floored at
/// [`MIN_EXTENT`]. Class is background and confidence 1; callers relabel.
pub fn fit_axis_aligned_cuboid(points: &[Point]) -> Result<Cuboid> {
    let first = points.first().ok_or(Error::EmptyInstance)?;
    let (mut lo, mut hi) = (*first, *first);
    for p in &points[1..] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let centroid = (lo + hi) * 0.5;
    let extent = (hi - lo).map(|e| e.max(MIN_EXTENT));
    Cuboid::new(centroid, extent, ClassId::BACKGROUND)
}

/// Rigid transform: rotation as a Hamilton unit quaternion followed by a
/// translation. Trajectory poses are camera-to-world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        RigidPose::identity()
    }
}

impl RigidPose {
    const NORM_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        RigidPose {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_parts(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        RigidPose { translation, rotation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidPose::from_parts(translation, UnitQuaternion::identity())
    }

    /// Builds a pose from a `(w, x, y, z)` quaternion whose norm must already
    /// be 1 within 1e-9.
    pub fn from_wxyz(translation: Vector3<f64>, wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidPose(format!("quaternion norm {norm} is not 1")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(RigidPose::from_parts(translation, UnitQuaternion::new_unchecked(q)))
    }

    /// Quaternion components in `(w, x, y, z)` order.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            translation: self.translation + self.rotation * other.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv = self.rotation.inverse();
        RigidPose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.rotation * x + self.translation
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let q = self.rotation.quaternion();
        2.0 * q.imag().norm().atan2(q.w.abs())
    }
}
