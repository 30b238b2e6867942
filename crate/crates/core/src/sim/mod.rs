//! Synthetic scenes, a ray-cast depth/label renderer, voxel label fusion and
//! the segmentation/pose corruption used by the ablation harness.

mod camera;
mod fusion;
mod noise;
mod path;
mod scene;

pub use camera::{backproject, render_frame, render_frames, CameraIntrinsics, Frame};
pub use fusion::{extract_cloud, fuse_frame, fuse_frames, FuseStats, VoxelLabelGrid, DEFAULT_EPSILON};
pub use noise::{confusion_map, perturb_segmentation, perturb_trajectory, PoseNoiseParams, SegNoiseParams};
pub use path::{generate_trajectory, look_at, OrbitSpec};
pub use scene::{generate_scene, Scene, SceneObject, SceneSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a base seed with a stream index into an independent seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}
