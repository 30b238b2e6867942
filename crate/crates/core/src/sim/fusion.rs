use super::camera::{backproject, CameraIntrinsics, Frame};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};
use crate::instances::{LabeledPoint, LabeledPointCloud};
use crate::par::Execution;
use crate::vocabulary::ClassId;

pub const DEFAULT_EPSILON: f64 = 1e-3;

const UNOBSERVED: u32 = u32::MAX;
const FUSE_CHUNK: usize = 8;

/// Sparse-allocated voxel grid with a Bayesian label distribution per voxel.
///
/// Every observation multiplies the voxel's distribution by the smoothed
/// one-hot likelihood `(1 - eps) * onehot + eps / K` and renormalizes.
/// Starting from a uniform prior the posterior depends only on how often
/// each label was seen, so the grid stores integer counts and evaluates
/// the product in closed form. Fusion order therefore cannot change the
/// result.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelLabelGrid {
    origin: Point,
    voxel_size: f64,
    dims: [usize; 3],
    label_space: usize,
    epsilon: f64,
    slots: Vec<u32>,
    slot_voxel: Vec<usize>,
    counts: Vec<u32>,
    observations: Vec<u32>,
}

impl VoxelLabelGrid {
    pub fn new(origin: Point, voxel_size: f64, dims: [usize; 3], label_space: usize, epsilon: f64) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidParams(format!("voxel size must be positive, got {voxel_size}")));
        }
        if label_space < 2 {
            return Err(Error::InvalidParams("label space needs background plus one class".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must be in (0, 1), got {epsilon}")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n > 0 && n < UNOBSERVED as usize)
            .ok_or_else(|| Error::InvalidParams(format!("unsupported grid dims {dims:?}")))?;
        Ok(VoxelLabelGrid {
            origin,
            voxel_size,
            dims,
            label_space,
            epsilon,
            slots: vec![UNOBSERVED; n],
            slot_voxel: Vec::new(),
            counts: Vec::new(),
            observations: Vec::new(),
        })
    }

    /// Grid over `bounds` padded by one voxel on every side.
    pub fn covering(bounds: &Aabb, voxel_size: f64, label_space: usize, epsilon: f64) -> Result<Self> {
        if !(voxel_size > 0.0) {
            return Err(Error::InvalidParams(format!("voxel size must be positive, got {voxel_size}")));
        }
        let origin = bounds.min - Point::repeat(voxel_size);
        let size = bounds.size();
        let dims = [0, 1, 2].map(|k| (size[k] / voxel_size).ceil() as usize + 2);
        Self::new(origin, voxel_size, dims, label_space, epsilon)
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn label_space(&self) -> usize {
        self.label_space
    }

    pub fn voxel_count(&self) -> usize {
        self.slots.len()
    }

    pub fn observed_count(&self) -> usize {
        self.slot_voxel.len()
    }

    /// Linear voxel index containing `p`, if inside the grid.
    pub fn voxel_of(&self, p: &Point) -> Option<usize> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[k] as f64) {
                return None;
            }
            idx[k] = f as usize;
        }
        Some((idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0])
    }

    pub fn voxel_center(&self, voxel: usize) -> Point {
        let x = voxel % self.dims[0];
        let y = (voxel / self.dims[0]) % self.dims[1];
        let z = voxel / (self.dims[0] * self.dims[1]);
        self.origin + Point::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.voxel_size
    }

    /// Records one observation of `class` in `voxel`.
    pub fn observe(&mut self, voxel: usize, class: ClassId) -> Result<()> {
        if class.index() >= self.label_space {
            return Err(Error::InvalidParams(format!(
                "class id {} outside label space {}",
                class.0, self.label_space
            )));
        }
        let slot = match self.slots[voxel] {
            UNOBSERVED => {
                let s = self.slot_voxel.len();
                self.slots[voxel] = s as u32;
                self.slot_voxel.push(voxel);
                self.counts.extend(std::iter::repeat_n(0, self.label_space));
                self.observations.push(0);
                s
            }
            s => s as usize,
        };
        self.counts[slot * self.label_space + class.index()] += 1;
        self.observations[slot] += 1;
        Ok(())
    }

    fn slot(&self, voxel: usize) -> Option<usize> {
        match self.slots.get(voxel) {
            Some(&s) if s != UNOBSERVED => Some(s as usize),
            _ => None,
        }
    }

    pub fn observations(&self, voxel: usize) -> u32 {
        self.slot(voxel).map_or(0, |s| self.observations[s])
    }

    pub fn counts(&self, voxel: usize) -> Option<&[u32]> {
        self.slot(voxel)
            .map(|s| &self.counts[s * self.label_space..(s + 1) * self.label_space])
    }

    /// Posterior label distribution; uniform for unobserved voxels.
    pub fn distribution(&self, voxel: usize) -> Vec<f64> {
        let k = self.label_space as f64;
        let Some(counts) = self.counts(voxel) else {
            return vec![1.0 / k; self.label_space];
        };
        let miss = self.epsilon / k;
        let log_ratio = ((1.0 - self.epsilon + miss) / miss).ln();
        let top = counts.iter().copied().max().unwrap_or(0);
        let weights: Vec<f64> = counts
            .iter()
            .map(|&n| ((n as f64 - top as f64) * log_ratio).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// Most probable label, lowest id on ties; `None` when unobserved.
    pub fn argmax(&self, voxel: usize) -> Option<ClassId> {
        let counts = self.counts(voxel)?;
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        Some(ClassId(best as u16))
    }

    /// Observed voxels in increasing linear index.
    pub fn observed_voxels(&self) -> Vec<usize> {
        let mut v = self.slot_voxel.clone();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FuseStats {
    pub fused: u64,
    pub skipped: u64,
}

impl std::ops::AddAssign for FuseStats {
    fn add_assign(&mut self, o: FuseStats) {
        self.fused += o.fused;
        self.skipped += o.skipped;
    }
}

fn frame_observations(grid: &VoxelLabelGrid, frame: &Frame, intr: &CameraIntrinsics) -> (Vec<(usize, ClassId)>, u64) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for v in 0..frame.height {
        for u in 0..frame.width {
            let i = frame.index(u, v);
            let d = frame.depth[i];
            if d <= 0.0 {
                continue;
            }
            match grid.voxel_of(&backproject(intr, &frame.pose, u, v, d)) {
                Some(voxel) => out.push((voxel, frame.class_image[i])),
                None => skipped += 1,
            }
        }
    }
    (out, skipped)
}

fn check_frame(frame: &Frame, intr: &CameraIntrinsics) -> Result<()> {
    let n = intr.pixel_count();
    if frame.width != intr.width
        || frame.height != intr.height
        || frame.depth.len() != n
        || frame.class_image.len() != n
        || frame.instance_image.len() != n
    {
        return Err(Error::InvalidParams("frame size does not match intrinsics".into()));
    }
    Ok(())
}

/// Back-projects every valid pixel through the frame's pose and records
/// its label in the containing voxel. Points outside the grid are skipped.
pub fn fuse_frame(grid: &mut VoxelLabelGrid, frame: &Frame, intr: &CameraIntrinsics) -> Result<FuseStats> {
    check_frame(frame, intr)?;
    let (obs, skipped) = frame_observations(grid, frame, intr);
    let fused = obs.len() as u64;
    for (voxel, class) in obs {
        grid.observe(voxel, class)?;
    }
    Ok(FuseStats { fused, skipped })
}

/// Fuses frames in order; back-projection runs in parallel in small
/// batches, updates are applied sequentially.
pub fn fuse_frames(
    grid: &mut VoxelLabelGrid,
    frames: &[Frame],
    intr: &CameraIntrinsics,
    exec: Execution,
) -> Result<FuseStats> {
    let mut stats = FuseStats::default();
    for chunk in frames.chunks(FUSE_CHUNK) {
        for f in chunk {
            check_frame(f, intr)?;
        }
        let batches = exec.map(chunk, |f| frame_observations(grid, f, intr));
        for (obs, skipped) in batches {
            stats += FuseStats {
                fused: obs.len() as u64,
                skipped,
            };
            for (voxel, class) in obs {
                grid.observe(voxel, class)?;
            }
        }
    }
    Ok(stats)
}

/// One point per voxel seen at least `min_observations` times whose most
/// probable label is not background, placed at the voxel center.
pub fn extract_cloud(grid: &VoxelLabelGrid, min_observations: u32) -> LabeledPointCloud {
    let points = grid
        .observed_voxels()
        .into_iter()
        .filter(|&v| grid.observations(v) >= min_observations)
        .filter_map(|v| {
            let class = grid.argmax(v)?;
            (!class.is_background()).then(|| LabeledPoint {
                position: grid.voxel_center(v),
                class_id: class,
                instance_id: None,
            })
        })
        .collect();
    LabeledPointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidPose;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> VoxelLabelGrid {
        VoxelLabelGrid::new(Point::zeros(), 0.1, [4, 4, 4], 5, DEFAULT_EPSILON).unwrap()
    }

    fn sums_to_one(d: &[f64]) -> bool {
        (d.iter().sum::<f64>() - 1.0).abs() < 1e-6
    }

    #[test]
    fn indexing_round_trip() {
        let g = grid();
        for v in [0, 1, 5, 17, 63] {
            assert_eq!(g.voxel_of(&g.voxel_center(v)), Some(v));
        }
        assert_eq!(g.voxel_of(&Point::new(-0.01, 0.0, 0.0)), None);
        assert_eq!(g.voxel_of(&Point::new(0.0, 0.0, 0.4)), None);
        assert_eq!(g.voxel_count(), 64);
    }

    #[test]
    fn single_observation_wins() {
        let mut g = grid();
        assert_eq!(g.distribution(3), vec![0.2; 5]);
        assert_eq!(g.argmax(3), None);
        g.observe(3, ClassId(2)).unwrap();
        let d = g.distribution(3);
        assert!(sums_to_one(&d));
        assert_eq!(g.argmax(3), Some(ClassId(2)));
        // closed form: (1 - eps + eps/K) / (1 - eps + K * eps/K)
        let (eps, k) = (DEFAULT_EPSILON, 5.0);
        assert!((d[2] - (1.0 - eps + eps / k)).abs() < 1e-12);
    }

    #[test]
    fn repeated_observations_increase_mass() {
        let mut g = grid();
        g.observe(0, ClassId(1)).unwrap();
        g.observe(0, ClassId(4)).unwrap();
        let mut last = g.distribution(0)[4];
        for _ in 0..4 {
            g.observe(0, ClassId(4)).unwrap();
            let p = g.distribution(0)[4];
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn majority_three_to_one() {
        let mut g = grid();
        for c in [1, 3, 1, 1] {
            g.observe(7, ClassId(c)).unwrap();
        }
        assert_eq!(g.argmax(7), Some(ClassId(1)));
        // posterior ratio p1/p3 = r^(3-1)
        let d = g.distribution(7);
        let (eps, k) = (DEFAULT_EPSILON, 5.0);
        let r = (1.0 - eps + eps / k) / (eps / k);
        assert!(((d[1] / d[3]) / (r * r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_sequential_bayes_product() {
        let mut g = grid();
        let seq = [2u16, 2, 0, 3, 2, 0, 0, 1];
        let (eps, k) = (DEFAULT_EPSILON, 5usize);
        let mut p = vec![1.0 / k as f64; k];
        for &c in &seq {
            g.observe(9, ClassId(c)).unwrap();
            for (j, pj) in p.iter_mut().enumerate() {
                *pj *= if j == c as usize { 1.0 - eps + eps / k as f64 } else { eps / k as f64 };
            }
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            let d = g.distribution(9);
            for j in 0..k {
                assert!((d[j] - p[j]).abs() < 1e-9);
            }
        }
        assert_eq!(g.argmax(9), Some(ClassId(0)));
        assert_eq!(g.observations(9), seq.len() as u32);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let mut g = grid();
        g.observe(1, ClassId(3)).unwrap();
        g.observe(1, ClassId(2)).unwrap();
        assert_eq!(g.argmax(1), Some(ClassId(2)));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(VoxelLabelGrid::new(Point::zeros(), 0.0, [1, 1, 1], 5, 1e-3).is_err());
        assert!(VoxelLabelGrid::new(Point::zeros(), 0.1, [1, 0, 1], 5, 1e-3).is_err());
        assert!(VoxelLabelGrid::new(Point::zeros(), 0.1, [1, 1, 1], 5, 0.0).is_err());
        assert!(VoxelLabelGrid::new(Point::zeros(), 0.1, [1, 1, 1], 1, 1e-3).is_err());
        assert!(grid().observe(0, ClassId(5)).is_err());
    }

    #[test]
    fn extraction_filters() {
        let mut g = grid();
        assert!(extract_cloud(&g, 1).is_empty());
        g.observe(5, ClassId(2)).unwrap();
        g.observe(5, ClassId(2)).unwrap();
        g.observe(6, ClassId(0)).unwrap();
        g.observe(6, ClassId(0)).unwrap();
        g.observe(2, ClassId(4)).unwrap();
        let cloud = extract_cloud(&g, 1);
        let got: Vec<_> = cloud.points.iter().map(|p| p.class_id.0).collect();
        assert_eq!(got, vec![4, 2]);
        assert_eq!(extract_cloud(&g, 2).len(), 1);
        assert!(extract_cloud(&g, 3).is_empty());
    }

    #[test]
    fn fuse_counts_and_skips() {
        let intr = CameraIntrinsics {
            width: 2,
            height: 1,
            fx: 1.0,
            fy: 1.0,
            cx: 1.0,
            cy: 0.5,
            near: 0.1,
            far: 10.0,
        };
        let mut frame = Frame::blank(&intr, RigidPose::from_translation(Point::new(0.2, 0.2, 0.0)));
        frame.depth = vec![0.15, 30.0];
        frame.class_image = vec![ClassId(3), ClassId(1)];
        let mut g = grid();
        let stats = fuse_frame(&mut g, &frame, &intr).unwrap();
        assert_eq!(stats, FuseStats { fused: 1, skipped: 1 });
        assert_eq!(g.observed_count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn normalized_and_order_free(obs in prop::collection::vec((0usize..64, 0u16..5), 0..200), seed in any::<u64>()) {
            let mut a = grid();
            for &(v, c) in &obs {
                a.observe(v, ClassId(c)).unwrap();
            }
            let mut shuffled = obs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut b = grid();
            for &(v, c) in &shuffled {
                b.observe(v, ClassId(c)).unwrap();
            }
            for v in 0..64 {
                let (da, db) = (a.distribution(v), b.distribution(v));
                prop_assert!(sums_to_one(&da));
                prop_assert_eq!(&da, &db);
                prop_assert_eq!(a.argmax(v), b.argmax(v));
            }
            prop_assert_eq!(extract_cloud(&a, 1), extract_cloud(&b, 1));
        }
    }
}
