//! Absolute and relative trajectory error.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidPose;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: RigidPose,
}

/// Time-ordered poses with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    samples: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new(samples: Vec<StampedPose>) -> Result<Self> {
        if let Some(i) = samples.windows(2).position(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(Error::InvalidParams(format!(
                "timestamps must be strictly increasing (sample {} at {} follows {})",
                i + 1,
                samples[i + 1].timestamp,
                samples[i].timestamp
            )));
        }
        if samples.iter().any(|s| !s.timestamp.is_finite()) {
            return Err(Error::InvalidParams("non-finite timestamp".into()));
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[StampedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &RigidPose> {
        self.samples.iter().map(|s| &s.pose)
    }

    /// Same timestamps, each pose replaced by `f(index, pose)`.
    pub fn map_poses(&self, mut f: impl FnMut(usize, &RigidPose) -> RigidPose) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| StampedPose {
                    timestamp: s.timestamp,
                    pose: f(i, &s.pose),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosePair {
    pub est_time: f64,
    pub gt_time: f64,
    pub est: RigidPose,
    pub gt: RigidPose,
}

/// Greedy nearest-timestamp association: candidate pairs within `max_dt`
/// are accepted in order of increasing time offset, each sample used at
/// most once. Output is ordered by estimate timestamp.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<Vec<PosePair>> {
    if !(max_dt > 0.0) {
        return Err(Error::InvalidParams(format!("max_dt must be positive, got {max_dt}")));
    }
    let gt_times: Vec<f64> = gt.samples.iter().map(|s| s.timestamp).collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in est.samples.iter().enumerate() {
        let start = gt_times.partition_point(|&t| t < e.timestamp - max_dt);
        for (j, &t) in gt_times.iter().enumerate().skip(start) {
            if t > e.timestamp + max_dt {
                break;
            }
            candidates.push(((e.timestamp - t).abs(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut est_used = vec![false; est.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !gt_used[j] {
            est_used[i] = true;
            gt_used[j] = true;
            matched.push((i, j));
        }
    }
    if matched.is_empty() {
        return Err(Error::NoTemporalOverlap);
    }
    matched.sort_unstable();
    Ok(matched
        .into_iter()
        .map(|(i, j)| PosePair {
            est_time: est.samples[i].timestamp,
            gt_time: gt.samples[j].timestamp,
            est: est.samples[i].pose,
            gt: gt.samples[j].pose,
        })
        .collect())
}

/// Pairs by index, for trajectories that share a clock.
pub fn pair_by_index(est: &Trajectory, gt: &Trajectory) -> Vec<PosePair> {
    est.samples
        .iter()
        .zip(&gt.samples)
        .map(|(e, g)| PosePair {
            est_time: e.timestamp,
            gt_time: g.timestamp,
            est: e.pose,
            gt: g.pose,
        })
        .collect()
}

/// Least-squares rigid transform taking estimated positions onto
/// ground-truth positions (SVD of the cross-covariance, reflection-corrected).
pub fn align_horn(pairs: &[PosePair]) -> Result<RigidPose> {
    if pairs.is_empty() {
        return Err(Error::NotEnoughPairs { need: 1, got: 0 });
    }
    let n = pairs.len() as f64;
    let est_mean = pairs.iter().map(|p| p.est.translation).sum::<Vector3<f64>>() / n;
    let gt_mean = pairs.iter().map(|p| p.gt.translation).sum::<Vector3<f64>>() / n;
    let cross: Matrix3<f64> = pairs
        .iter()
        .map(|p| (p.gt.translation - gt_mean) * (p.est.translation - est_mean).transpose())
        .sum();

    let rotation = if cross.norm() < 1e-15 {
        Matrix3::identity()
    } else {
        let svd = cross.svd(true, true);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let d = (u * v_t).determinant().signum();
        u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
    };
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
    let translation = gt_mean - rotation * est_mean;
    Ok(RigidPose::from_parts(translation, rotation))
}

fn rmse(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    (values.map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

/// RMSE of positional residuals, optionally after rigid alignment.
pub fn ate_rmse(pairs: &[PosePair], align: bool) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::NotEnoughPairs { need: 1, got: 0 });
    }
    let coincide = pairs.iter().all(|p| p.est.translation == p.gt.translation);
    let t = if align && !coincide { align_horn(pairs)? } else { RigidPose::identity() };
    Ok(rmse(
        pairs.iter().map(|p| (t.apply(&p.est.translation) - p.gt.translation).norm()),
    ))
}

/// Relative pose error over `delta`-frame steps: RMSE of the translation
/// norms (meters) and rotation angles (degrees) of
/// `(gt_i⁻¹ gt_{i+Δ})⁻¹ (est_i⁻¹ est_{i+Δ})`.
pub fn rpe(pairs: &[PosePair], delta: usize) -> Result<(f64, f64)> {
    if delta == 0 {
        return Err(Error::InvalidParams("delta must be at least 1".into()));
    }
    if pairs.len() < delta + 1 {
        return Err(Error::NotEnoughPairs {
            need: delta + 1,
            got: pairs.len(),
        });
    }
    let errors: Vec<(f64, f64)> = pairs
        .windows(delta + 1)
        .map(|w| {
            let (a, b) = (&w[0], &w[delta]);
            let gt_rel = a.gt.inverse().compose(&b.gt);
            let est_rel = a.est.inverse().compose(&b.est);
            let err = gt_rel.inverse().compose(&est_rel);
            (err.translation.norm(), relative_angle(&gt_rel.rotation, &est_rel.rotation))
        })
        .collect();
    Ok((
        rmse(errors.iter().map(|e| e.0)),
        rmse(errors.iter().map(|e| e.1.to_degrees())),
    ))
}

/// Angle of `a⁻¹ b`, expanded so that equal inputs cancel exactly.
fn relative_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (qa, qb) = (a.quaternion(), b.quaternion());
    let (va, vb) = (qa.imag(), qb.imag());
    let w = qa.w * qb.w + va.dot(&vb);
    let v = qa.w * vb - qb.w * va - va.cross(&vb);
    2.0 * v.norm().atan2(w.abs())
}

pub fn trajectory_length(t: &Trajectory) -> f64 {
    t.samples
        .windows(2)
        .map(|w| (w[1].pose.translation - w[0].pose.translation).norm())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajOptions {
    pub align: bool,
    pub delta: usize,
    pub max_dt: f64,
}

impl Default for TrajOptions {
    fn default() -> Self {
        TrajOptions {
            align: true,
            delta: 1,
            max_dt: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajError {
    pub ate_rmse: f64,
    pub rpe_trans_rmse: f64,
    pub rpe_rot_rmse: f64,
    /// Length of the ground-truth path.
    pub trajectory_length: f64,
    pub n_pairs: usize,
}

/// Associates, then reports ATE, RPE and ground-truth path length.
pub fn evaluate_trajectories(est: &Trajectory, gt: &Trajectory, opts: &TrajOptions) -> Result<TrajError> {
    let pairs = associate(est, gt, opts.max_dt)?;
    let (rpe_trans_rmse, rpe_rot_rmse) = rpe(&pairs, opts.delta)?;
    Ok(TrajError {
        ate_rmse: ate_rmse(&pairs, opts.align)?,
        rpe_trans_rmse,
        rpe_rot_rmse,
        trajectory_length: trajectory_length(gt),
        n_pairs: pairs.len(),
    })
}
