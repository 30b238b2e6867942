//! Object-map scoring: greedy confidence-ranked matching, PR curves and mAP
//! over IoU sweeps, error-breakdown curves, and object map quality (OMQ).

mod ap;
mod assignment;
mod breakdown;
mod matching;
mod omq;
mod ratio;

pub use ap::{iou_thresholds, map3d, map3d_with, pr_curve, pr_curve_with, ApIntegration, ClassAp, MapOptions, MapScores, PrCurve, PrPoint};
pub use assignment::{assignment_total, optimal_assignment};
pub use breakdown::{error_breakdown_curves, error_breakdown_curves_with, BreakdownCurves, BreakdownStage, CurveAveraging, LOC_BG_THRESHOLD};
pub use matching::{match_detections, MatchResult, MatchedPair};
pub use omq::{fp_cost, omq, pairwise_quality, OmqReport};
pub use ratio::{ratio, ratio_scores, Ratios, SummaryScores};

use crate::error::{Error, Result};
use crate::vocabulary::ObjectMap;

fn check_vocabularies(est: &ObjectMap, gt: &ObjectMap) -> Result<()> {
    if est.vocabulary() != gt.vocabulary() {
        return Err(Error::VocabularyMismatch);
    }
    Ok(())
}
