use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::geometry::{Point, RigidPose};
use crate::par::Execution;
use crate::vocabulary::ClassId;

/// Pinhole camera with OpenCV axes: x right, y down, z forward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    /// 320x240 with a 60 degree horizontal field of view.
    fn default() -> Self {
        CameraIntrinsics {
            fx: 277.128,
            fy: 277.128,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
            near: 0.1,
            far: 8.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.width > 0
            && self.height > 0
            && self.near > 0.0
            && self.near < self.far
            && self.far.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Camera-frame ray through the center of pixel `(u, v)`, scaled to unit depth.
    pub fn ray(&self, u: usize, v: usize) -> Point {
        Point::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }
}

/// Rendered depth and label images, row-major. Depth 0 marks no return.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub class_image: Vec<ClassId>,
    pub instance_image: Vec<u32>,
    /// Camera-to-world.
    pub pose: RigidPose,
}

impl Frame {
    pub fn blank(intr: &CameraIntrinsics, pose: RigidPose) -> Frame {
        let n = intr.pixel_count();
        Frame {
            width: intr.width,
            height: intr.height,
            depth: vec![0.0; n],
            class_image: vec![ClassId::BACKGROUND; n],
            instance_image: vec![0; n],
            pose,
        }
    }

    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }
}

/// Casts one ray per pixel against every object box; the nearest entry
/// inside `[near, far]` wins. Rays that miss all objects report the room
/// interior as background when the scene has a shell.
pub fn render_frame(scene: &Scene, pose: &RigidPose, intr: &CameraIntrinsics) -> Frame {
    let mut frame = Frame::blank(intr, *pose);
    let origin = pose.translation;
    let boxes: Vec<_> = scene.objects().iter().map(|o| (o.cuboid.aabb(), o.class_id(), o.instance_id)).collect();
    let in_range = |t: f64| t >= intr.near && t <= intr.far;

    for v in 0..intr.height {
        for u in 0..intr.width {
            let dir = pose.rotation * intr.ray(u, v);
            let mut best: Option<(f64, ClassId, u32)> = None;
            for (aabb, class, id) in &boxes {
                if let Some((t, _)) = aabb.ray_intersect(&origin, &dir) {
                    if t > 0.0 && in_range(t) && best.is_none_or(|b| t < b.0) {
                        best = Some((t, *class, *id));
                    }
                }
            }
            if best.is_none() && scene.shell() {
                if let Some((_, t)) = scene.room().ray_intersect(&origin, &dir) {
                    if in_range(t) {
                        best = Some((t, ClassId::BACKGROUND, 0));
                    }
                }
            }
            if let Some((t, class, id)) = best {
                let i = frame.index(u, v);
                frame.depth[i] = t;
                frame.class_image[i] = class;
                frame.instance_image[i] = id;
            }
        }
    }
    frame
}

pub fn render_frames(scene: &Scene, poses: &[RigidPose], intr: &CameraIntrinsics, exec: Execution) -> Vec<Frame> {
    exec.map(poses, |p| render_frame(scene, p, intr))
}

/// World point seen at pixel `(u, v)` with the given depth.
pub fn backproject(intr: &CameraIntrinsics, pose: &RigidPose, u: usize, v: usize, depth: f64) -> Point {
    pose.apply(&(intr.ray(u, v) * depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Cuboid};
    use crate::sim::scene::SceneObject;
    use approx::assert_abs_diff_eq;
    use nalgebra::{UnitQuaternion, Vector3};

    fn room() -> Aabb {
        Aabb::new(Point::new(-5.0, -5.0, -5.0), Point::new(5.0, 5.0, 5.0)).unwrap()
    }

    fn object(c: [f64; 3], e: [f64; 3], class: u16, id: u32) -> SceneObject {
        SceneObject {
            cuboid: Cuboid::new(Point::from(c), Point::from(e), ClassId(class)).unwrap(),
            instance_id: id,
        }
    }

    fn center(intr: &CameraIntrinsics) -> (usize, usize) {
        (intr.width / 2, intr.height / 2)
    }

    #[test]
    fn empty_scene_is_blank() {
        let intr = CameraIntrinsics::default();
        let scene = Scene::new(room(), vec![], false).unwrap();
        let f = render_frame(&scene, &RigidPose::identity(), &intr);
        assert!(f.depth.iter().all(|&d| d == 0.0));
        assert!(f.class_image.iter().all(|c| c.is_background()));
        assert!(f.instance_image.iter().all(|&i| i == 0));
    }

    #[test]
    fn unit_cube_two_meters_ahead() {
        let intr = CameraIntrinsics::default();
        let scene = Scene::new(room(), vec![object([0.0, 0.0, 2.0], [1.0; 3], 5, 1)], false).unwrap();
        let f = render_frame(&scene, &RigidPose::identity(), &intr);
        let (u, v) = center(&intr);
        let i = f.index(u, v);
        assert_abs_diff_eq!(f.depth[i], 1.5, epsilon = 1e-12);
        assert_eq!((f.class_image[i], f.instance_image[i]), (ClassId(5), 1));
        // the front face spans about 92 pixels either side of center
        assert_eq!(f.depth[f.index(5, v)], 0.0);
    }

    #[test]
    fn rotated_camera_sees_same_depth() {
        // camera at origin looking along world +x
        let rot = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2);
        let pose = RigidPose::from_parts(Vector3::zeros(), rot);
        assert_abs_diff_eq!(pose.rotation * Vector3::z(), Vector3::x(), epsilon = 1e-12);
        let intr = CameraIntrinsics::default();
        let scene = Scene::new(room(), vec![object([3.0, 0.0, 0.0], [1.0; 3], 2, 4)], false).unwrap();
        let f = render_frame(&scene, &pose, &intr);
        let (u, v) = center(&intr);
        assert_abs_diff_eq!(f.depth[f.index(u, v)], 2.5, epsilon = 1e-9);
    }

    #[test]
    fn occlusion_keeps_nearest() {
        let intr = CameraIntrinsics::default();
        let scene = Scene::new(
            room(),
            vec![
                object([0.0, 0.0, 4.0], [2.0; 3], 7, 2),
                object([0.0, 0.0, 2.0], [0.5; 3], 3, 1),
            ],
            false,
        )
        .unwrap();
        let f = render_frame(&scene, &RigidPose::identity(), &intr);
        let (u, v) = center(&intr);
        let c = f.index(u, v);
        assert_eq!(f.instance_image[c], 1);
        assert_abs_diff_eq!(f.depth[c], 1.75, epsilon = 1e-12);
        // off the near box but inside the far one
        let side = f.index(u + 60, v);
        assert_eq!(f.instance_image[side], 2);
        assert_abs_diff_eq!(f.depth[side], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_range_and_shell() {
        let intr = CameraIntrinsics {
            far: 2.0,
            ..CameraIntrinsics::default()
        };
        let scene = Scene::new(room(), vec![object([0.0, 0.0, 3.0], [1.0; 3], 5, 1)], false).unwrap();
        let f = render_frame(&scene, &RigidPose::identity(), &intr);
        assert!(f.depth.iter().all(|&d| d == 0.0));

        let intr = CameraIntrinsics::default();
        let shelled = Scene::new(room(), vec![], true).unwrap();
        let f = render_frame(&shelled, &RigidPose::identity(), &intr);
        let (u, v) = center(&intr);
        assert_abs_diff_eq!(f.depth[f.index(u, v)], 5.0, epsilon = 1e-12);
        assert!(f.class_image.iter().all(|c| c.is_background()));
        assert!(f.depth.iter().all(|&d| d >= intr.near && d <= intr.far));
    }

    #[test]
    fn labels_only_where_depth() {
        let intr = CameraIntrinsics::default();
        let scene = Scene::new(room(), vec![object([0.3, -0.2, 2.5], [1.0, 0.6, 0.8], 9, 3)], false).unwrap();
        let f = render_frame(&scene, &RigidPose::identity(), &intr);
        for i in 0..f.depth.len() {
            if f.depth[i] == 0.0 {
                assert!(f.class_image[i].is_background() && f.instance_image[i] == 0);
            }
        }
    }

    #[test]
    fn backprojected_hits_lie_on_surface() {
        let intr = CameraIntrinsics::default();
        let pose = RigidPose::from_parts(
            Vector3::new(0.2, -0.1, -0.3),
            UnitQuaternion::from_euler_angles(0.1, -0.15, 0.2),
        );
        let obj = object([0.0, 0.0, 2.5], [1.2, 0.9, 0.7], 4, 1);
        let aabb = obj.cuboid.aabb();
        let scene = Scene::new(room(), vec![obj], false).unwrap();
        let f = render_frame(&scene, &pose, &intr);
        let mut hits = 0;
        for v in 0..intr.height {
            for u in 0..intr.width {
                let d = f.depth[f.index(u, v)];
                if d > 0.0 {
                    hits += 1;
                    let p = backproject(&intr, &pose, u, v, d);
                    assert!(aabb.expanded(1e-9).contains(&p));
                }
            }
        }
        assert!(hits > 1000);
    }
}
