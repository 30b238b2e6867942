use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::geometry::{Point, RigidPose};
use crate::trajectory::{StampedPose, Trajectory};

/// Elliptical orbit around the room center, looking at a fixed target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitSpec {
    /// Semi-axes as a fraction of the room's x/y size.
    pub radius_fraction: f64,
    pub height: f64,
    /// Peak-to-center amplitude of the height oscillation.
    pub height_wobble: f64,
    pub target_height: f64,
    pub dt: f64,
    /// Fraction of a full revolution covered by the trajectory.
    pub revolutions: f64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        OrbitSpec {
            radius_fraction: 0.45,
            height: 1.5,
            height_wobble: 0.1,
            target_height: 0.3,
            dt: 0.1,
            revolutions: 1.0,
        }
    }
}

/// Camera-to-world pose at `eye` looking at `target`, z up in the world.
pub fn look_at(eye: &Point, target: &Point) -> RigidPose {
    let forward = (target - eye).normalize();
    let up = if forward.cross(&Vector3::z()).norm() < 1e-9 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    RigidPose::from_parts(
        *eye,
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)),
    )
}

/// Smooth orbit with a seeded start phase and direction.
pub fn generate_trajectory(scene: &Scene, n_frames: usize, seed: u64, spec: &OrbitSpec) -> Result<Trajectory> {
    if n_frames < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 frames, got {n_frames}")));
    }
    if !(spec.dt > 0.0 && spec.radius_fraction > 0.0 && spec.radius_fraction < 0.5 && spec.revolutions > 0.0) {
        return Err(Error::InvalidParams(format!("invalid orbit {spec:?}")));
    }
    let room = scene.room();
    let lowest = spec.height - spec.height_wobble.abs();
    let highest = spec.height + spec.height_wobble.abs();
    if lowest <= room.min.z || highest >= room.max.z {
        return Err(Error::InvalidParams(format!(
            "orbit height {lowest}..{highest} leaves the room"
        )));
    }
    let mut rng = super::rng_for(seed, 0x0B17);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };

    let center = room.center();
    let (a, b) = (room.size().x * spec.radius_fraction, room.size().y * spec.radius_fraction);
    let target = Point::new(center.x, center.y, spec.target_height);
    let samples = (0..n_frames)
        .map(|i| {
            let s = i as f64 / n_frames as f64;
            let theta = phase + direction * std::f64::consts::TAU * spec.revolutions * s;
            let eye = Point::new(
                center.x + a * theta.cos(),
                center.y + b * theta.sin(),
                spec.height + spec.height_wobble * (2.0 * theta).sin(),
            );
            StampedPose {
                timestamp: i as f64 * spec.dt,
                pose: look_at(&eye, &target),
            }
        })
        .collect();
    Trajectory::new(samples)
}
