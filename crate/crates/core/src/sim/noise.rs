use std::collections::BTreeMap;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::camera::Frame;
use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::trajectory::Trajectory;
use crate::vocabulary::ClassId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegNoiseParams {
    /// Chance per object per frame that its mask is relabeled.
    pub misclass_rate: f64,
    /// Chance per object per frame that its mask is erased.
    pub dropout_rate: f64,
    /// Mask boundary change in pixels: negative erodes, positive dilates.
    pub boundary_erode_dilate: i32,
    pub confusion_seed: u64,
}

impl Default for SegNoiseParams {
    fn default() -> Self {
        SegNoiseParams {
            misclass_rate: 0.25,
            dropout_rate: 0.25,
            boundary_erode_dilate: -2,
            confusion_seed: 17,
        }
    }
}

impl SegNoiseParams {
    pub fn none() -> Self {
        SegNoiseParams {
            misclass_rate: 0.0,
            dropout_rate: 0.0,
            boundary_erode_dilate: 0,
            confusion_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if rate(self.misclass_rate) && rate(self.dropout_rate) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("noise rates must lie in [0, 1]: {self:?}")))
        }
    }

    pub fn is_identity(&self) -> bool {
        self.misclass_rate == 0.0 && self.dropout_rate == 0.0 && self.boundary_erode_dilate == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseNoiseParams {
    /// RMS translation increment per frame, meters.
    pub trans_drift_sigma: f64,
    /// RMS rotation increment per frame, degrees.
    pub rot_drift_sigma: f64,
    pub seed: u64,
}

impl Default for PoseNoiseParams {
    fn default() -> Self {
        PoseNoiseParams {
            trans_drift_sigma: 0.01,
            rot_drift_sigma: 0.1,
            seed: 29,
        }
    }
}

impl PoseNoiseParams {
    pub fn none() -> Self {
        PoseNoiseParams {
            trans_drift_sigma: 0.0,
            rot_drift_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trans_drift_sigma >= 0.0
            && self.rot_drift_sigma >= 0.0
            && self.trans_drift_sigma.is_finite()
            && self.rot_drift_sigma.is_finite()
        {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("pose noise sigmas must be >= 0: {self:?}")))
        }
    }

    pub fn is_identity(&self) -> bool {
        self.trans_drift_sigma == 0.0 && self.rot_drift_sigma == 0.0
    }
}

/// Maps every non-background class to a different, seeded confusion class.
/// Index 0 maps to background.
pub fn confusion_map(label_space: usize, seed: u64) -> Vec<ClassId> {
    let mut rng = super::rng_for(seed, 0xC0F5);
    let mut map = vec![ClassId::BACKGROUND; label_space];
    if label_space < 3 {
        for (c, m) in map.iter_mut().enumerate().skip(1) {
            *m = ClassId(c as u16);
        }
        return map;
    }
    for (c, m) in map.iter_mut().enumerate().skip(1) {
        // uniform over the other non-background classes
        let mut other = rng.random_range(1..label_space - 1);
        if other >= c {
            other += 1;
        }
        *m = ClassId(other as u16);
    }
    map
}

/// Corrupts a frame's labels the way an imperfect segmenter would. For each
/// visible instance (ascending id) two uniforms are drawn: the first erases
/// the mask with `dropout_rate`, the second relabels it to its confusion
/// class with `misclass_rate`. The mask boundaries are then eroded or
/// dilated by `|boundary_erode_dilate|` pixels (Chebyshev distance).
/// Depth is left untouched.
pub fn perturb_segmentation(
    frame: &Frame,
    params: &SegNoiseParams,
    confusion: &[ClassId],
    rng: &mut impl Rng,
) -> Result<Frame> {
    params.validate()?;
    let mut out = frame.clone();
    let mut fate: BTreeMap<u32, Option<ClassId>> = BTreeMap::new();
    for (&id, &class) in frame.instance_image.iter().zip(&frame.class_image) {
        if id != 0 {
            fate.entry(id).or_insert(Some(class));
        }
    }
    for label in fate.values_mut() {
        let drop = rng.random::<f64>() < params.dropout_rate;
        let swap = rng.random::<f64>() < params.misclass_rate;
        let class = label.expect("filled above");
        *label = if drop {
            None
        } else if swap {
            let c = confusion.get(class.index()).copied().ok_or_else(|| {
                Error::InvalidParams(format!("class id {} missing from confusion map", class.0))
            })?;
            Some(c)
        } else {
            Some(class)
        };
    }
    for i in 0..out.class_image.len() {
        let id = out.instance_image[i];
        if id == 0 {
            continue;
        }
        match fate[&id] {
            Some(c) => out.class_image[i] = c,
            None => {
                out.class_image[i] = ClassId::BACKGROUND;
                out.instance_image[i] = 0;
            }
        }
    }
    let r = params.boundary_erode_dilate.unsigned_abs() as usize;
    match params.boundary_erode_dilate {
        k if k < 0 => erode(&mut out, r),
        k if k > 0 => dilate(&mut out, r),
        _ => {}
    }
    Ok(out)
}

/// Labeled pixels with a differently-labeled pixel within `r` become
/// background. The image border does not erode.
fn erode(frame: &mut Frame, r: usize) {
    let (w, h) = (frame.width, frame.height);
    let labels = frame.instance_image.clone();
    let classes = frame.class_image.clone();
    let key = |i: usize| (labels[i], classes[i]);
    // rows where the horizontal window matches the center
    let mut row_ok = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let (lo, hi) = (u.saturating_sub(r), (u + r).min(w - 1));
            row_ok[i] = (lo..=hi).all(|x| key(v * w + x) == key(i));
        }
    }
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if classes[i].is_background() && labels[i] == 0 {
                continue;
            }
            let (lo, hi) = (v.saturating_sub(r), (v + r).min(h - 1));
            let interior = (lo..=hi).all(|y| {
                let j = y * w + u;
                row_ok[j] && key(j) == key(i)
            });
            if !interior {
                frame.class_image[i] = ClassId::BACKGROUND;
                frame.instance_image[i] = 0;
            }
        }
    }
}

/// Unlabeled pixels with valid depth take the label of the closest labeled
/// pixel within `r`; ties go to the lowest class id, then scan order.
fn dilate(frame: &mut Frame, r: usize) {
    let (w, h) = (frame.width as isize, frame.height as isize);
    let classes = frame.class_image.clone();
    let labels = frame.instance_image.clone();
    let labeled = |i: usize| !classes[i].is_background() || labels[i] != 0;
    for v in 0..h {
        for u in 0..w {
            let i = (v * w + u) as usize;
            if labeled(i) || frame.depth[i] <= 0.0 {
                continue;
            }
            let mut pick: Option<usize> = None;
            for d in 1..=r as isize {
                for y in (v - d).max(0)..=(v + d).min(h - 1) {
                    for x in (u - d).max(0)..=(u + d).min(w - 1) {
                        if (y - v).abs().max((x - u).abs()) != d {
                            continue;
                        }
                        let j = (y * w + x) as usize;
                        if labeled(j) && pick.is_none_or(|p| classes[j] < classes[p]) {
                            pick = Some(j);
                        }
                    }
                }
                if pick.is_some() {
                    break;
                }
            }
            if let Some(j) = pick {
                frame.class_image[i] = classes[j];
                frame.instance_image[i] = labels[j];
            }
        }
    }
}

/// Odometry-style drift: the estimate follows the ground-truth relative
/// motion between consecutive frames, each step perturbed by a Gaussian
/// increment. Per-axis standard deviations are `sigma / sqrt(3)` so the
/// increment's RMS magnitude equals the configured sigma. The first pose
/// is exact.
pub fn perturb_trajectory(traj: &Trajectory, params: &PoseNoiseParams, rng: &mut impl Rng) -> Result<Trajectory> {
    params.validate()?;
    if params.is_identity() || traj.is_empty() {
        return Ok(traj.clone());
    }
    let per_axis = |s: f64| Normal::new(0.0, s / 3f64.sqrt()).expect("finite non-negative sigma");
    let trans = per_axis(params.trans_drift_sigma);
    let rot = per_axis(params.rot_drift_sigma.to_radians());
    let gt: Vec<RigidPose> = traj.poses().copied().collect();
    let mut est = gt[0];
    Ok(traj.map_poses(|i, _| {
        if i > 0 {
            let t = Vector3::from_fn(|_, _| trans.sample(rng));
            let w = Vector3::from_fn(|_, _| rot.sample(rng));
            let delta = RigidPose::from_parts(t, UnitQuaternion::from_scaled_axis(w));
            est = est.compose(&gt[i - 1].inverse().compose(&gt[i])).compose(&delta);
        }
        est
    }))
}
