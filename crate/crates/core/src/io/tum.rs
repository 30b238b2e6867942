use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::trajectory::{StampedPose, Trajectory};

const NORM_WARN: f64 = 1e-3;

/// Parses `timestamp tx ty tz qx qy qz qw` lines; `#` starts a comment.
/// Quaternions are normalized, with a warning when they were off by more
/// than 1e-3.
pub fn parse_trajectory(text: &str, origin: &Path) -> Result<Trajectory> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 8 {
            return Err(Error::parse(
                origin,
                format!("line {line_no}: expected 8 columns, found {}", cols.len()),
            ));
        }
        let mut v = [0.0f64; 8];
        for (k, c) in cols.iter().enumerate() {
            v[k] = c
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::parse(origin, format!("line {line_no}: bad number `{c}`")))?;
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        let norm = q.norm();
        if norm == 0.0 {
            return Err(Error::parse(origin, format!("line {line_no}: zero quaternion")));
        }
        if (norm - 1.0).abs() > NORM_WARN {
            log::warn!("{}: line {line_no}: quaternion norm {norm}, normalizing", origin.display());
        }
        samples.push(StampedPose {
            timestamp: v[0],
            pose: RigidPose::from_parts(Vector3::new(v[1], v[2], v[3]), UnitQuaternion::from_quaternion(q)),
        });
    }
    Trajectory::new(samples).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&read_text(path)?, path)
}

pub fn trajectory_to_tum(traj: &Trajectory) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in traj.samples() {
        let t = p.pose.translation;
        let q = p.pose.rotation.quaternion();
        writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )
        .expect("writing to a String");
    }
    s
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_bytes(path, trajectory_to_tum(traj).as_bytes())
}
