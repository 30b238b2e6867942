use serde::{Deserialize, Serialize};

use super::{MapScores, OmqReport};

/// The four headline scores of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryScores {
    pub map3d: f64,
    pub map25: f64,
    pub map50: f64,
    pub omq: f64,
}

impl SummaryScores {
    pub fn new(map: &MapScores, omq: &OmqReport) -> Self {
        SummaryScores {
            map3d: map.map3d,
            map25: map.map25,
            map50: map.map50,
            omq: omq.omq,
        }
    }
}

/// Scores relative to a baseline; `None` marks an undefined ratio (zero
/// baseline).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub rmap: Option<f64>,
    pub rap25: Option<f64>,
    pub rap50: Option<f64>,
    pub romq: Option<f64>,
}

pub fn ratio(value: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| value / baseline)
}

pub fn ratio_scores(case: &SummaryScores, baseline: &SummaryScores) -> Ratios {
    Ratios {
        rmap: ratio(case.map3d, baseline.map3d),
        rap25: ratio(case.map25, baseline.map25),
        rap50: ratio(case.map50, baseline.map50),
        romq: ratio(case.omq, baseline.omq),
    }
}
