use serde::{Deserialize, Serialize};

use super::check_vocabularies;
use super::matching::{class_tables, ClassTable, Outcome};
use crate::error::Result;
use crate::par::Execution;
use crate::vocabulary::{ClassId, ObjectMap};

/// The fifteen thresholds 0.25, 0.30, ..., 0.95.
pub fn iou_thresholds() -> [f64; 15] {
    std::array::from_fn(|k| (25 + 5 * k) as f64 / 100.0)
}

const RECALL_SAMPLES: usize = 101;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApIntegration {
    /// Mean of the precision envelope sampled at recall 0, 0.01, ..., 1.
    #[default]
    Coco101,
    /// Exact area under the precision envelope.
    AllPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision-recall curve after the monotone envelope has been applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub ap: f64,
}

/// Cumulative precision/recall over a ranked TP/FP list.
pub(crate) fn sweep(ranked_tp: &[bool], n_gt: usize) -> Vec<PrPoint> {
    let mut tp = 0usize;
    ranked_tp
        .iter()
        .enumerate()
        .map(|(i, &hit)| {
            tp += hit as usize;
            PrPoint {
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                precision: tp as f64 / (i + 1) as f64,
            }
        })
        .collect()
}

/// Replaces each precision by the maximum precision at any later rank.
pub(crate) fn envelope(mut points: Vec<PrPoint>) -> Vec<PrPoint> {
    for i in (0..points.len().saturating_sub(1)).rev() {
        points[i].precision = points[i].precision.max(points[i + 1].precision);
    }
    points
}

/// Envelope precision at recall k/100 for k = 0..=100; zero past the
/// highest recall reached.
pub(crate) fn sample101(env: &[PrPoint]) -> Vec<f64> {
    let mut out = Vec::with_capacity(RECALL_SAMPLES);
    let mut i = 0;
    for k in 0..RECALL_SAMPLES {
        let r = k as f64 / 100.0;
        while i < env.len() && env[i].recall < r {
            i += 1;
        }
        out.push(env.get(i).map_or(0.0, |p| p.precision));
    }
    out
}

fn area(env: &[PrPoint], integration: ApIntegration) -> f64 {
    match integration {
        ApIntegration::Coco101 => sample101(env).iter().sum::<f64>() / RECALL_SAMPLES as f64,
        ApIntegration::AllPoint => {
            let mut prev = 0.0;
            let mut total = 0.0;
            for p in env {
                total += (p.recall - prev) * p.precision;
                prev = p.recall;
            }
            total
        }
    }
}

pub(crate) fn ranked_flags(outcomes: &[Outcome]) -> Vec<bool> {
    outcomes
        .iter()
        .map(|o| matches!(o, Outcome::TruePositive(_)))
        .collect()
}

pub(crate) fn curve_for(table: &ClassTable, threshold: f64, integration: ApIntegration) -> PrCurve {
    let flags = ranked_flags(&table.greedy(threshold));
    let points = envelope(sweep(&flags, table.n_gt()));
    let ap = if table.n_gt() == 0 { 0.0 } else { area(&points, integration) };
    PrCurve { points, ap }
}

pub fn pr_curve(est: &ObjectMap, gt: &ObjectMap, class: ClassId, iou_threshold: f64) -> Result<Option<PrCurve>> {
    pr_curve_with(est, gt, class, iou_threshold, ApIntegration::default())
}

/// PR curve of one class. `None` when the class appears in neither map.
pub fn pr_curve_with(
    est: &ObjectMap,
    gt: &ObjectMap,
    class: ClassId,
    iou_threshold: f64,
    integration: ApIntegration,
) -> Result<Option<PrCurve>> {
    check_vocabularies(est, gt)?;
    Ok(class_tables(est, gt)
        .iter()
        .find(|t| t.class == class)
        .map(|t| curve_for(t, iou_threshold, integration)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MapOptions {
    pub integration: ApIntegration,
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: ClassId,
    pub class_name: String,
    /// One AP per entry of [`iou_thresholds`].
    pub ap: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapScores {
    pub map3d: f64,
    pub map25: f64,
    pub map50: f64,
    pub thresholds: Vec<f64>,
    pub per_class_ap: Vec<ClassAp>,
}

pub fn map3d(est: &ObjectMap, gt: &ObjectMap) -> Result<MapScores> {
    map3d_with(est, gt, &MapOptions::default())
}

/// mAP over the fifteen IoU thresholds plus the 0.25 and 0.50 columns.
///
/// Every class present in either map is averaged; a class with detections
/// but no ground truth scores 0. With no classes at all every score is 0.
pub fn map3d_with(est: &ObjectMap, gt: &ObjectMap, opts: &MapOptions) -> Result<MapScores> {
    check_vocabularies(est, gt)?;
    let thresholds = iou_thresholds();
    let tables = class_tables(est, gt);
    let n_t = thresholds.len();
    let aps = opts
        .execution
        .map_range(tables.len() * n_t, |job| curve_for(&tables[job / n_t], thresholds[job % n_t], opts.integration).ap);

    let per_class_ap: Vec<ClassAp> = tables
        .iter()
        .enumerate()
        .map(|(c, t)| ClassAp {
            class_id: t.class,
            class_name: est.vocabulary().name(t.class).unwrap_or_default().to_string(),
            ap: aps[c * n_t..(c + 1) * n_t].to_vec(),
        })
        .collect();

    let mean_at = |k: usize| -> f64 {
        if per_class_ap.is_empty() {
            0.0
        } else {
            per_class_ap.iter().map(|c| c.ap[k]).sum::<f64>() / per_class_ap.len() as f64
        }
    };
    let map3d = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    Ok(MapScores {
        map3d,
        map25: mean_at(0),
        map50: mean_at(5),
        thresholds: thresholds.to_vec(),
        per_class_ap,
    })
}
