use serde::{Deserialize, Serialize};

use super::assignment::optimal_assignment;
use super::check_vocabularies;
use crate::error::Result;
use crate::geometry::{iou3d, Cuboid};
use crate::vocabulary::ObjectMap;

/// Geometric mean of spatial quality (3D IoU) and label quality (the
/// probability `o` gives to the ground-truth class).
pub fn pairwise_quality(o: &Cuboid, ghat: &Cuboid) -> f64 {
    let spatial = iou3d(o, ghat);
    let label = o.label_prob(ghat.class_id());
    if spatial <= 0.0 || label <= 0.0 {
        0.0
    } else {
        (spatial * label).sqrt()
    }
}

/// Highest probability on any non-background class.
pub fn fp_cost(o: &Cuboid) -> f64 {
    match o.label_probs() {
        Some(p) => p.iter().skip(1).copied().fold(0.0, f64::max),
        None if o.class_id().is_background() => 0.0,
        None => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmqPair {
    pub est: usize,
    pub gt: usize,
    pub quality: f64,
    pub spatial: f64,
    pub label: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmqReport {
    pub omq: f64,
    /// Mean pairwise quality of true positives.
    pub mpoq: f64,
    /// Mean label quality of true positives.
    pub mlq: f64,
    /// Mean spatial quality (3D IoU) of true positives.
    pub msq: f64,
    /// Mean false-positive cost; 0 with no false positives.
    pub mfpq: f64,
    pub n_tp: usize,
    pub n_fn: usize,
    pub n_fp: usize,
    pub q_tp: Vec<f64>,
    pub c_fp: Vec<f64>,
    pub true_positives: Vec<OmqPair>,
    pub false_positives: Vec<usize>,
}

impl OmqReport {
    /// Recomputes the score from the report's own lists and counts.
    pub fn recompute(&self) -> f64 {
        omq_value(&self.q_tp, self.n_fn, &self.c_fp)
    }
}

fn omq_value(q_tp: &[f64], n_fn: usize, c_fp: &[f64]) -> f64 {
    let denom = q_tp.len() as f64 + n_fn as f64 + c_fp.iter().sum::<f64>();
    if denom > 0.0 {
        q_tp.iter().fold(0.0, |a, q| a + q) / denom
    } else if c_fp.is_empty() {
        // nothing to find and nothing proposed
        1.0
    } else {
        0.0
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        0.0
    } else {
        v.sum::<f64>() / n as f64
    }
}

/// Object map quality: optimal one-to-one assignment on pairwise quality,
/// then summed TP quality over TPs + FNs + summed FP cost.
pub fn omq(est: &ObjectMap, gt: &ObjectMap) -> Result<OmqReport> {
    check_vocabularies(est, gt)?;
    let quality: Vec<Vec<f64>> = est
        .objects()
        .iter()
        .map(|o| gt.objects().iter().map(|g| pairwise_quality(o, g)).collect())
        .collect();
    let pairs = optimal_assignment(&quality);

    let mut assigned = vec![false; est.len()];
    let true_positives: Vec<OmqPair> = pairs
        .iter()
        .map(|&(e, g)| {
            assigned[e] = true;
            let (o, ghat) = (&est.objects()[e], &gt.objects()[g]);
            OmqPair {
                est: e,
                gt: g,
                quality: quality[e][g],
                spatial: iou3d(o, ghat),
                label: o.label_prob(ghat.class_id()),
            }
        })
        .collect();
    let false_positives: Vec<usize> = (0..est.len()).filter(|&e| !assigned[e]).collect();

    let q_tp: Vec<f64> = true_positives.iter().map(|p| p.quality).collect();
    let c_fp: Vec<f64> = false_positives.iter().map(|&e| fp_cost(&est.objects()[e])).collect();
    let n_tp = q_tp.len();
    let n_fn = gt.len() - n_tp;
    Ok(OmqReport {
        omq: omq_value(&q_tp, n_fn, &c_fp),
        mpoq: mean(q_tp.iter().copied()),
        mlq: mean(true_positives.iter().map(|p| p.label)),
        msq: mean(true_positives.iter().map(|p| p.spatial)),
        mfpq: mean(c_fp.iter().copied()),
        n_tp,
        n_fn,
        n_fp: c_fp.len(),
        q_tp,
        c_fp,
        true_positives,
        false_positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::test_util::{boxed, map, unit};
    use crate::vocabulary::ClassId;

    fn probs(entries: &[(usize, f64)]) -> Vec<f64> {
        let mut p = vec![0.0; 31];
        for &(i, v) in entries {
            p[i] = v;
        }
        p
    }

    #[test]
    fn pairwise_examples() {
        let a = unit(0.0, 19);
        assert_eq!(pairwise_quality(&a, &a), 1.0);
        // IoU 0.25: same centroid, one quarter of the height
        let small = boxed([0.0; 3], [1.0, 1.0, 0.25], 19);
        assert!((pairwise_quality(&small, &a) - 0.5).abs() < 1e-12);
        assert_eq!(pairwise_quality(&unit(5.0, 19), &a), 0.0);
        // wrong class, one-hot: no label quality
        assert_eq!(pairwise_quality(&unit(0.0, 20), &a), 0.0);
        let soft = unit(0.0, 19).with_label_probs(probs(&[(19, 0.64), (20, 0.36)])).unwrap();
        assert!((pairwise_quality(&soft, &a) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn fp_cost_examples() {
        assert_eq!(fp_cost(&unit(0.0, 19)), 1.0);
        let soft = unit(0.0, 19).with_label_probs(probs(&[(19, 0.6), (20, 0.4)])).unwrap();
        assert_eq!(fp_cost(&soft), 0.6);
        let bg = unit(0.0, 19).with_class(ClassId::BACKGROUND).with_label_probs(probs(&[(0, 1.0)])).unwrap();
        assert_eq!(fp_cost(&bg), 0.0);
    }

    #[test]
    fn perfect_map() {
        let gt = map(vec![unit(0.0, 19), unit(3.0, 20)]);
        let r = omq(&gt, &gt).unwrap();
        assert_eq!((r.omq, r.mpoq, r.mlq, r.msq, r.mfpq), (1.0, 1.0, 1.0, 1.0, 0.0));
        assert_eq!((r.n_tp, r.n_fn, r.n_fp), (2, 0, 0));
    }

    #[test]
    fn one_tp_one_fp() {
        let gt = map(vec![unit(0.0, 19)]);
        let est = map(vec![unit(0.0, 19), unit(10.0, 19)]);
        let r = omq(&est, &gt).unwrap();
        assert!((r.omq - 0.5).abs() < 1e-9);
        assert_eq!((r.n_tp, r.n_fn, r.n_fp), (1, 0, 1));
        assert_eq!(r.mfpq, 1.0);
        assert_eq!(r.false_positives, vec![1]);
    }

    #[test]
    fn empty_estimate() {
        let gt = map(vec![unit(0.0, 19), unit(3.0, 20), unit(6.0, 1)]);
        let r = omq(&map(vec![]), &gt).unwrap();
        assert_eq!(r.omq.to_bits(), 0.0f64.to_bits());
        assert_eq!(r.n_fn, 3);
        assert_eq!(omq(&map(vec![]), &map(vec![])).unwrap().omq, 1.0);
    }

    #[test]
    fn partial_overlap_quality() {
        let gt = map(vec![unit(0.0, 19)]);
        let est = map(vec![unit(0.5, 19)]);
        let r = omq(&est, &gt).unwrap();
        // pOQ = sqrt(1/3)
        assert!((r.omq - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.msq - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.mlq, 1.0);
        assert!((r.recompute() - r.omq).abs() < 1e-12);
    }

    #[test]
    fn assignment_is_global_not_greedy() {
        // est 0 overlaps both GTs, est 1 only the first; optimal pairs e0-g1, e1-g0
        let gt = map(vec![unit(0.0, 19), unit(0.8, 19)]);
        let est = map(vec![unit(0.45, 19), unit(0.0, 19)]);
        let r = omq(&est, &gt).unwrap();
        assert_eq!(r.n_tp, 2);
        let pairs: Vec<(usize, usize)> = r.true_positives.iter().map(|p| (p.est, p.gt)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
    }
}
