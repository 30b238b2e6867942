//! Ground-truth vs. estimated segmentation/pose ablation over synthetic scenes.
//!
//! Case I fuses clean labels at true poses, Case II corrupts labels, Case III
//! fuses at drifted poses and Case IV does both. Each case goes through the
//! same render, fuse, extract and cluster pipeline and is scored against the
//! scene's ground-truth cuboids.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidPose;
use crate::instances::{extract_object_map, ClusterParams, ConfidenceMode};
use crate::par::Execution;
use crate::quality::{map3d_with, omq, ratio_scores, MapOptions, MapScores, OmqReport, Ratios, SummaryScores};
use crate::sim::{
    confusion_map, derive_seed, extract_cloud, fuse_frames, generate_scene, generate_trajectory, perturb_segmentation,
    perturb_trajectory, render_frames, rng_for, CameraIntrinsics, Frame, FuseStats, OrbitSpec, PoseNoiseParams, Scene,
    SceneSpec, SegNoiseParams, VoxelLabelGrid, DEFAULT_EPSILON,
};
use crate::trajectory::{evaluate_trajectories, TrajError, TrajOptions, Trajectory};
use crate::vocabulary::{ClassVocabulary, ObjectMap};

const SCENE_STREAM: u64 = 1;
const PATH_STREAM: u64 = 2;
const SEG_STREAM: u64 = 3;
const POSE_STREAM: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::I, CaseId::II, CaseId::III, CaseId::IV];

    pub fn estimated_segmentation(self) -> bool {
        matches!(self, CaseId::II | CaseId::IV)
    }

    pub fn estimated_pose(self) -> bool {
        matches!(self, CaseId::III | CaseId::IV)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
            CaseId::IV => "IV",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
    /// Mixed into every scene, path and noise seed.
    pub master_seed: u64,
    pub frames: usize,
    pub scene: SceneSpec,
    pub orbit: OrbitSpec,
    pub camera: CameraIntrinsics,
    pub seg_noise: SegNoiseParams,
    pub pose_noise: PoseNoiseParams,
    pub cluster: ClusterParams,
    pub confidence_mode: ConfidenceMode,
    pub voxel_size: f64,
    pub min_observations: u32,
    pub epsilon: f64,
    pub cases: Vec<CaseId>,
    pub trajectory: TrajOptions,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seeds: vec![1, 2, 3, 4, 5],
            master_seed: 0,
            frames: 60,
            scene: SceneSpec::default(),
            orbit: OrbitSpec::default(),
            camera: CameraIntrinsics::default(),
            seg_noise: SegNoiseParams::default(),
            pose_noise: PoseNoiseParams::default(),
            cluster: ClusterParams::default(),
            confidence_mode: ConfidenceMode::default(),
            voxel_size: 0.05,
            min_observations: 1,
            epsilon: DEFAULT_EPSILON,
            cases: CaseId::ALL.to_vec(),
            trajectory: TrajOptions::default(),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one scene seed is required");
        }
        if self.frames < 2 {
            return bad("at least two frames are required");
        }
        if !(self.voxel_size > 0.0) {
            return bad("voxel size must be positive");
        }
        if !self.cases.contains(&CaseId::I) {
            return bad("Case I is required as the ratio baseline");
        }
        let mut cases = self.cases.clone();
        cases.sort();
        cases.dedup();
        if cases.len() != self.cases.len() {
            return bad("cases must not repeat");
        }
        self.camera.validate()?;
        self.seg_noise.validate()?;
        self.pose_noise.validate()?;
        self.cluster.validate()
    }

    /// Sorted, so case order in the config does not affect the report.
    fn sorted_cases(&self) -> Vec<CaseId> {
        let mut c = self.cases.clone();
        c.sort();
        c
    }
}

/// Noise streams for one scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSeeds {
    pub segmentation: u64,
    pub pose: u64,
}

impl NoiseSeeds {
    pub fn for_scene(scene_seed: u64, config: &AblationConfig) -> Self {
        NoiseSeeds {
            segmentation: derive_seed(derive_seed(scene_seed, SEG_STREAM), config.seg_noise.confusion_seed),
            pose: derive_seed(derive_seed(scene_seed, POSE_STREAM), config.pose_noise.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseOutput {
    pub case: CaseId,
    pub map: ObjectMap,
    /// Poses the frames were fused with.
    pub trajectory: Trajectory,
    pub fusion: FuseStats,
}

fn fuse_case(
    frames: &[Frame],
    poses: &Trajectory,
    scene: &Scene,
    vocabulary: &ClassVocabulary,
    config: &AblationConfig,
    exec: Execution,
) -> Result<(ObjectMap, FuseStats)> {
    let mut grid = VoxelLabelGrid::covering(scene.room(), config.voxel_size, vocabulary.label_space(), config.epsilon)?;
    let placed: Vec<Frame> = frames
        .iter()
        .zip(poses.poses())
        .map(|(f, p)| Frame { pose: *p, ..f.clone() })
        .collect();
    let stats = fuse_frames(&mut grid, &placed, &config.camera, exec)?;
    let cloud = extract_cloud(&grid, config.min_observations);
    let map = extract_object_map(&cloud, vocabulary, &config.cluster, config.confidence_mode, exec)?;
    Ok((map, stats))
}

/// Runs several cases on one scene, rendering once and sharing the corrupted
/// labels and drifted poses between the cases that use them.
pub fn run_cases(
    scene: &Scene,
    traj: &Trajectory,
    cases: &[CaseId],
    config: &AblationConfig,
    seeds: NoiseSeeds,
    vocabulary: &ClassVocabulary,
    exec: Execution,
) -> Result<Vec<CaseOutput>> {
    let poses: Vec<RigidPose> = traj.poses().copied().collect();
    let clean = render_frames(scene, &poses, &config.camera, exec);

    let noisy = if cases.iter().any(|c| c.estimated_segmentation()) {
        let confusion = confusion_map(vocabulary.label_space(), config.seg_noise.confusion_seed);
        let indices: Vec<usize> = (0..clean.len()).collect();
        let out: Result<Vec<Frame>> = exec
            .map(&indices, |&i| {
                let mut rng = rng_for(seeds.segmentation, i as u64);
                perturb_segmentation(&clean[i], &config.seg_noise, &confusion, &mut rng)
            })
            .into_iter()
            .collect();
        Some(out?)
    } else {
        None
    };
    let drifted = if cases.iter().any(|c| c.estimated_pose()) {
        let mut rng = rng_for(seeds.pose, 0);
        Some(perturb_trajectory(traj, &config.pose_noise, &mut rng)?)
    } else {
        None
    };

    cases
        .iter()
        .map(|&case| {
            let frames = if case.estimated_segmentation() {
                noisy.as_deref().expect("computed above")
            } else {
                &clean
            };
            let used = if case.estimated_pose() {
                drifted.as_ref().expect("computed above")
            } else {
                traj
            };
            let (map, fusion) = fuse_case(frames, used, scene, vocabulary, config, exec)?;
            Ok(CaseOutput {
                case,
                map,
                trajectory: used.clone(),
                fusion,
            })
        })
        .collect()
}

/// Single case: render, optionally corrupt, fuse, extract and cluster.
pub fn run_case(
    scene: &Scene,
    traj: &Trajectory,
    case: CaseId,
    config: &AblationConfig,
    seeds: NoiseSeeds,
    vocabulary: &ClassVocabulary,
) -> Result<(ObjectMap, Trajectory)> {
    let out = run_cases(scene, traj, &[case], config, seeds, vocabulary, Execution::default())?
        .pop()
        .expect("one case requested");
    Ok((out.map, out.trajectory))
}

/// Scene, path and noise seeds derived from one entry of `config.seeds`.
pub fn scene_for(seed: u64, config: &AblationConfig, vocabulary: &ClassVocabulary) -> Result<(Scene, Trajectory, NoiseSeeds)> {
    let base = derive_seed(config.master_seed, seed);
    let scene = generate_scene(derive_seed(base, SCENE_STREAM), &config.scene, vocabulary)?;
    let traj = generate_trajectory(&scene, config.frames, derive_seed(base, PATH_STREAM), &config.orbit)?;
    Ok((scene, traj, NoiseSeeds::for_scene(base, config)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub seed: u64,
    pub case: CaseId,
    pub n_estimated: usize,
    pub n_ground_truth: usize,
    pub map: MapScores,
    pub omq: OmqReport,
    pub trajectory: TrajError,
    pub ratios: Ratios,
}

impl CaseResult {
    pub fn summary(&self) -> SummaryScores {
        SummaryScores::new(&self.map, &self.omq)
    }
}

/// Seed-averaged scores and ratios for one case. A mean ratio averages the
/// seeds where the baseline was non-zero and is `None` if there were none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: CaseId,
    pub mean_scores: SummaryScores,
    pub mean_ratios: Ratios,
    pub mean_ate_rmse: f64,
    pub mean_rpe_trans_rmse: f64,
    pub mean_rpe_rot_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: AblationConfig,
    pub runs: Vec<CaseResult>,
    pub summary: Vec<CaseSummary>,
}

impl AblationReport {
    pub fn case(&self, case: CaseId) -> Option<&CaseSummary> {
        self.summary.iter().find(|s| s.case == case)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParams(format!("report serialization: {e}")))
    }
}

/// Estimated and ground-truth maps of one run, for curve export.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseArtifacts {
    pub seed: u64,
    pub case: CaseId,
    pub estimate: ObjectMap,
    pub ground_truth: ObjectMap,
    pub trajectory: Trajectory,
}

fn score(out: &CaseOutput, gt: &ObjectMap, gt_traj: &Trajectory, config: &AblationConfig) -> Result<(MapScores, OmqReport, TrajError)> {
    let opts = MapOptions {
        execution: Execution::Sequential,
        ..MapOptions::default()
    };
    Ok((
        map3d_with(&out.map, gt, &opts)?,
        omq(&out.map, gt)?,
        evaluate_trajectories(&out.trajectory, gt_traj, &config.trajectory)?,
    ))
}

fn run_seed(
    seed: u64,
    config: &AblationConfig,
    vocabulary: &ClassVocabulary,
    exec: Execution,
) -> Result<(Vec<CaseResult>, Vec<CaseArtifacts>)> {
    let (scene, traj, seeds) = scene_for(seed, config, vocabulary)?;
    let gt = scene.ground_truth_map(vocabulary)?;
    let outputs = run_cases(&scene, &traj, &config.sorted_cases(), config, seeds, vocabulary, exec)?;

    let mut scored = Vec::with_capacity(outputs.len());
    for out in &outputs {
        scored.push(score(out, &gt, &traj, config)?);
    }
    let baseline = {
        let i = outputs.iter().position(|o| o.case == CaseId::I).expect("validated");
        SummaryScores::new(&scored[i].0, &scored[i].1)
    };
    let results = outputs
        .iter()
        .zip(scored)
        .map(|(out, (map, omq, trajectory))| {
            let ratios = ratio_scores(&SummaryScores::new(&map, &omq), &baseline);
            CaseResult {
                seed,
                case: out.case,
                n_estimated: out.map.len(),
                n_ground_truth: gt.len(),
                map,
                omq,
                trajectory,
                ratios,
            }
        })
        .collect();
    let artifacts = outputs
        .into_iter()
        .map(|o| CaseArtifacts {
            seed,
            case: o.case,
            estimate: o.map,
            ground_truth: gt.clone(),
            trajectory: o.trajectory,
        })
        .collect();
    Ok((results, artifacts))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_opt<'a>(values: impl Iterator<Item = &'a Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().copied().collect();
    (!defined.is_empty()).then(|| mean(defined.into_iter()))
}

fn summarize(case: CaseId, runs: &[CaseResult]) -> CaseSummary {
    let rs: Vec<&CaseResult> = runs.iter().filter(|r| r.case == case).collect();
    let scores: Vec<SummaryScores> = rs.iter().map(|r| r.summary()).collect();
    CaseSummary {
        case,
        mean_scores: SummaryScores {
            map3d: mean(scores.iter().map(|s| s.map3d)),
            map25: mean(scores.iter().map(|s| s.map25)),
            map50: mean(scores.iter().map(|s| s.map50)),
            omq: mean(scores.iter().map(|s| s.omq)),
        },
        mean_ratios: Ratios {
            rmap: mean_opt(rs.iter().map(|r| &r.ratios.rmap)),
            rap25: mean_opt(rs.iter().map(|r| &r.ratios.rap25)),
            rap50: mean_opt(rs.iter().map(|r| &r.ratios.rap50)),
            romq: mean_opt(rs.iter().map(|r| &r.ratios.romq)),
        },
        mean_ate_rmse: mean(rs.iter().map(|r| r.trajectory.ate_rmse)),
        mean_rpe_trans_rmse: mean(rs.iter().map(|r| r.trajectory.rpe_trans_rmse)),
        mean_rpe_rot_rmse: mean(rs.iter().map(|r| r.trajectory.rpe_rot_rmse)),
    }
}

/// Full ablation plus the per-run maps. Seeds run in parallel under
/// [`Execution::Parallel`]; the report is assembled in seed order.
pub fn run_ablation_detailed(config: &AblationConfig, exec: Execution) -> Result<(AblationReport, Vec<CaseArtifacts>)> {
    config.validate()?;
    let vocabulary = ClassVocabulary::default();
    let per_seed = exec.map(&config.seeds, |&s| run_seed(s, config, &vocabulary, exec));
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    for r in per_seed {
        let (res, art) = r?;
        runs.extend(res);
        artifacts.extend(art);
    }
    let summary = config.sorted_cases().into_iter().map(|c| summarize(c, &runs)).collect();
    Ok((
        AblationReport {
            config: config.clone(),
            runs,
            summary,
        },
        artifacts,
    ))
}

pub fn run_ablation(config: &AblationConfig) -> Result<AblationReport> {
    run_ablation_detailed(config, Execution::default()).map(|(r, _)| r)
}
