use serde::{Deserialize, Serialize};

use super::check_vocabularies;
use crate::error::Result;
use crate::geometry::iou3d;
use crate::vocabulary::{ClassId, ObjectMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub est: usize,
    pub gt: usize,
    pub iou: f64,
}

/// Outcome of greedy matching at one IoU threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_est: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn n_tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_fp(&self) -> usize {
        self.unmatched_est.len()
    }

    pub fn n_fn(&self) -> usize {
        self.unmatched_gt.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum FalsePositive {
    /// Overlaps, at the threshold, a ground-truth object already claimed.
    Duplicate,
    /// Zero IoU with every same-class ground-truth object.
    Background,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    /// Local ground-truth index within the class table.
    TruePositive(usize),
    FalsePositive(FalsePositive),
}

/// Detections and ground truth of one class, with detections in ranking
/// order and their IoU against every same-class ground-truth object.
#[derive(Clone, Debug)]
pub(crate) struct ClassTable {
    pub class: ClassId,
    pub dets: Vec<usize>,
    pub gts: Vec<usize>,
    pub confidence: Vec<f64>,
    pub best_iou: Vec<f64>,
    iou: Vec<f64>,
}

impl ClassTable {
    fn build(est: &ObjectMap, gt: &ObjectMap, class: ClassId) -> ClassTable {
        let gts = gt.indices_of(class);
        let raw = est.indices_of(class);
        let rows: Vec<(usize, Vec<f64>)> = raw
            .iter()
            .map(|&d| {
                let row = gts.iter().map(|&g| iou3d(&est.objects()[d], &gt.objects()[g])).collect();
                (d, row)
            })
            .collect();
        let best = |row: &[f64]| row.iter().copied().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (da, db) = (rows[a].0, rows[b].0);
            let (ca, cb) = (est.objects()[da].confidence(), est.objects()[db].confidence());
            cb.total_cmp(&ca)
                .then(best(&rows[b].1).total_cmp(&best(&rows[a].1)))
                .then(da.cmp(&db))
        });
        let mut table = ClassTable {
            class,
            dets: Vec::with_capacity(rows.len()),
            gts,
            confidence: Vec::with_capacity(rows.len()),
            best_iou: Vec::with_capacity(rows.len()),
            iou: Vec::with_capacity(rows.len() * raw.len()),
        };
        for r in order {
            let (d, row) = &rows[r];
            table.dets.push(*d);
            table.confidence.push(est.objects()[*d].confidence());
            table.best_iou.push(best(row));
            table.iou.extend_from_slice(row);
        }
        table
    }

    pub fn n_gt(&self) -> usize {
        self.gts.len()
    }

    fn iou(&self, rank: usize, g: usize) -> f64 {
        self.iou[rank * self.gts.len() + g]
    }

    /// Greedy matching: each detection in rank order claims the unclaimed
    /// ground truth with the highest IoU (lowest index on ties) when that IoU
    /// reaches `threshold`.
    pub fn greedy(&self, threshold: f64) -> Vec<Outcome> {
        let mut claimed = vec![false; self.gts.len()];
        (0..self.dets.len())
            .map(|rank| {
                let mut pick: Option<(usize, f64)> = None;
                for (g, &taken) in claimed.iter().enumerate() {
                    let v = self.iou(rank, g);
                    if !taken && v >= threshold && pick.is_none_or(|(_, bv)| v > bv) {
                        pick = Some((g, v));
                    }
                }
                if let Some((g, _)) = pick {
                    claimed[g] = true;
                    return Outcome::TruePositive(g);
                }
                let dup = (0..self.gts.len()).any(|g| claimed[g] && self.iou(rank, g) >= threshold);
                Outcome::FalsePositive(if dup {
                    FalsePositive::Duplicate
                } else if self.best_iou[rank] == 0.0 {
                    FalsePositive::Background
                } else {
                    FalsePositive::Other
                })
            })
            .collect()
    }

    pub fn pair_iou(&self, rank: usize, g: usize) -> f64 {
        self.iou(rank, g)
    }
}

/// One table per class present in either map, ascending by class id.
pub(crate) fn class_tables(est: &ObjectMap, gt: &ObjectMap) -> Vec<ClassTable> {
    let mut classes: Vec<ClassId> = est
        .objects()
        .iter()
        .chain(gt.objects())
        .map(|o| o.class_id())
        .collect();
    classes.sort_unstable();
    classes.dedup();
    classes.into_iter().map(|c| ClassTable::build(est, gt, c)).collect()
}

/// Per-class greedy matching of `est` against `gt` at `iou_threshold`.
pub fn match_detections(est: &ObjectMap, gt: &ObjectMap, iou_threshold: f64) -> Result<MatchResult> {
    check_vocabularies(est, gt)?;
    let mut pairs = Vec::new();
    let mut unmatched_est = Vec::new();
    let mut claimed_gt = vec![false; gt.len()];
    for table in class_tables(est, gt) {
        for (rank, outcome) in table.greedy(iou_threshold).into_iter().enumerate() {
            match outcome {
                Outcome::TruePositive(g) => {
                    claimed_gt[table.gts[g]] = true;
                    pairs.push(MatchedPair {
                        est: table.dets[rank],
                        gt: table.gts[g],
                        iou: table.pair_iou(rank, g),
                    });
                }
                Outcome::FalsePositive(_) => unmatched_est.push(table.dets[rank]),
            }
        }
    }
    unmatched_est.sort_unstable();
    let unmatched_gt = (0..gt.len()).filter(|&g| !claimed_gt[g]).collect();
    Ok(MatchResult {
        pairs,
        unmatched_est,
        unmatched_gt,
        iou_threshold,
    })
}
