//! Error-breakdown PR curves.
//!
//! Six nested curves, each removing one more kind of error:
//! strict IoU thresholds (0.75, 0.50, 0.25), then a loose 0.10 threshold
//! with duplicate detections dropped (`Loc`), then with background false
//! positives dropped too (`BG`), and finally with every error removed (`FN`).

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ap::{envelope, sample101, sweep, PrCurve, PrPoint};
use super::check_vocabularies;
use super::matching::{class_tables, ClassTable, FalsePositive, Outcome};
use crate::error::Result;
use crate::vocabulary::ObjectMap;

/// Loose threshold used by the `Loc` and `BG` stages.
pub const LOC_BG_THRESHOLD: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BreakdownStage {
    IoU75,
    IoU50,
    IoU25,
    Loc,
    BG,
    FN,
}

impl BreakdownStage {
    pub const ALL: [BreakdownStage; 6] = [
        BreakdownStage::IoU75,
        BreakdownStage::IoU50,
        BreakdownStage::IoU25,
        BreakdownStage::Loc,
        BreakdownStage::BG,
        BreakdownStage::FN,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BreakdownStage::IoU75 => "IoU75",
            BreakdownStage::IoU50 => "IoU50",
            BreakdownStage::IoU25 => "IoU25",
            BreakdownStage::Loc => "Loc",
            BreakdownStage::BG => "BG",
            BreakdownStage::FN => "FN",
        }
    }
}

impl fmt::Display for BreakdownStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveAveraging {
    /// Average the per-class 101-point envelopes.
    #[default]
    ClassMean,
    /// Rank all detections of all classes together against the total
    /// ground-truth count.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCurves {
    pub curves: Vec<(BreakdownStage, PrCurve)>,
}

impl BreakdownCurves {
    pub fn get(&self, stage: BreakdownStage) -> &PrCurve {
        &self
            .curves
            .iter()
            .find(|(s, _)| *s == stage)
            .expect("all stages are present")
            .1
    }

    pub fn ap(&self, stage: BreakdownStage) -> f64 {
        self.get(stage).ap
    }
}

/// A ranked detection that survived a stage's filtering.
struct Ranked {
    confidence: f64,
    best_iou: f64,
    class_rank: usize,
    est_index: usize,
    tp: bool,
}

fn stage_entries(table: &ClassTable, stage: BreakdownStage) -> Vec<Ranked> {
    let threshold = match stage {
        BreakdownStage::IoU75 => 0.75,
        BreakdownStage::IoU50 => 0.50,
        BreakdownStage::IoU25 => 0.25,
        BreakdownStage::Loc | BreakdownStage::BG => LOC_BG_THRESHOLD,
        BreakdownStage::FN => unreachable!("FN is not swept"),
    };
    table
        .greedy(threshold)
        .into_iter()
        .enumerate()
        .filter(|(_, o)| {
            !matches!(
                (stage, o),
                (BreakdownStage::Loc, Outcome::FalsePositive(FalsePositive::Duplicate))
                    | (BreakdownStage::BG, Outcome::FalsePositive(FalsePositive::Duplicate | FalsePositive::Background))
            )
        })
        .map(|(rank, o)| Ranked {
            confidence: table.confidence[rank],
            best_iou: table.best_iou[rank],
            class_rank: 0,
            est_index: table.dets[rank],
            tp: matches!(o, Outcome::TruePositive(_)),
        })
        .collect()
}

fn curve_from_samples(samples: Vec<f64>) -> PrCurve {
    let ap = samples.iter().sum::<f64>() / samples.len() as f64;
    let points = samples
        .into_iter()
        .enumerate()
        .map(|(k, precision)| PrPoint {
            recall: k as f64 / 100.0,
            precision,
        })
        .collect();
    PrCurve { points, ap }
}

fn sampled(flags: &[bool], n_gt: usize) -> Vec<f64> {
    if n_gt == 0 {
        return vec![0.0; 101];
    }
    sample101(&envelope(sweep(flags, n_gt)))
}

fn stage_curve(tables: &[ClassTable], stage: BreakdownStage, averaging: CurveAveraging) -> PrCurve {
    if stage == BreakdownStage::FN {
        return curve_from_samples(vec![1.0; 101]);
    }
    let per_class: Vec<(usize, Vec<Ranked>)> = tables
        .iter()
        .enumerate()
        .map(|(c, t)| {
            let mut entries = stage_entries(t, stage);
            entries.iter_mut().for_each(|e| e.class_rank = c);
            (t.n_gt(), entries)
        })
        .filter(|(n_gt, entries)| *n_gt > 0 || !entries.is_empty())
        .collect();
    if per_class.is_empty() {
        return curve_from_samples(vec![0.0; 101]);
    }
    match averaging {
        CurveAveraging::ClassMean => {
            let mut mean = vec![0.0; 101];
            for (n_gt, entries) in &per_class {
                let flags: Vec<bool> = entries.iter().map(|e| e.tp).collect();
                for (m, s) in mean.iter_mut().zip(sampled(&flags, *n_gt)) {
                    *m += s;
                }
            }
            let n = per_class.len() as f64;
            curve_from_samples(mean.into_iter().map(|m| m / n).collect())
        }
        CurveAveraging::Pooled => {
            let n_gt: usize = per_class.iter().map(|(n, _)| n).sum();
            let mut all: Vec<Ranked> = per_class.into_iter().flat_map(|(_, e)| e).collect();
            all.sort_by(|a, b| {
                b.confidence
                    .total_cmp(&a.confidence)
                    .then(b.best_iou.total_cmp(&a.best_iou))
                    .then(a.class_rank.cmp(&b.class_rank))
                    .then(a.est_index.cmp(&b.est_index))
            });
            let flags: Vec<bool> = all.iter().map(|e| e.tp).collect();
            curve_from_samples(sampled(&flags, n_gt))
        }
    }
}

pub fn error_breakdown_curves(est: &ObjectMap, gt: &ObjectMap) -> Result<BreakdownCurves> {
    error_breakdown_curves_with(est, gt, CurveAveraging::default())
}

pub fn error_breakdown_curves_with(
    est: &ObjectMap,
    gt: &ObjectMap,
    averaging: CurveAveraging,
) -> Result<BreakdownCurves> {
    check_vocabularies(est, gt)?;
    let tables = class_tables(est, gt);
    Ok(BreakdownCurves {
        curves: BreakdownStage::ALL
            .iter()
            .map(|&s| (s, stage_curve(&tables, s, averaging)))
            .collect(),
    })
}
