use serde::{Deserialize, Serialize};

use super::matching::PrPoint;

/// Recall sampling of the interpolated average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ApMode {
    /// Recall points `0, 0.1, ..., 1.0`.
    #[serde(rename = "11")]
    Interp11,
    /// Recall points `1/40, 2/40, ..., 1`.
    #[default]
    #[serde(rename = "40")]
    Interp40,
}

impl ApMode {
    pub fn recall_samples(self) -> Vec<f64> {
        match self {
            ApMode::Interp11 => (0..=10).map(|k| k as f64 / 10.0).collect(),
            ApMode::Interp40 => (1..=40).map(|k| k as f64 / 40.0).collect(),
        }
    }
}

impl std::str::FromStr for ApMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "11" | "interp11" => Ok(ApMode::Interp11),
            "40" | "interp40" => Ok(ApMode::Interp40),
            _ => Err(format!("unknown AP mode `{s}` (expected 11 or 40)")),
        }
    }
}

/// Mean over the sampled recalls of the best precision reached at that
/// recall or beyond; 0 where the curve never gets there.
pub fn average_precision(points: &[PrPoint], mode: ApMode) -> f64 {
    // suffix maximum of precision, so each sample is one binary search away
    let mut best_after = vec![0.0f64; points.len() + 1];
    for i in (0..points.len()).rev() {
        best_after[i] = best_after[i + 1].max(points[i].precision);
    }
    let samples = mode.recall_samples();
    let mut sum = 0.0;
    for &r in &samples {
        // recall is non-decreasing along the curve
        let first = points.partition_point(|p| p.recall < r);
        sum += best_after[first];
    }
    sum / samples.len() as f64
}
