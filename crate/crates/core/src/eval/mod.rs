//! KITTI-style evaluation: difficulty strata, greedy detection matching per
//! overlap metric, interpolated average precision and the summary report.

mod ap;
mod difficulty;
mod matching;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{camera_label_to_lidar_box, iou_3d, rotated_iou_bev, Box3D};
use crate::kitti::{Annotation, Calibration, Detection, ObjectClass};

pub use ap::{average_precision, ApMode};
pub use difficulty::{filter_difficulty, similar_class, Difficulty, DifficultyRule, DifficultyRules, GtSets};
pub use matching::{match_detections, pr_curve, MatchResult, Outcome, PrPoint};
pub use report::EvalReport;

/// Overlap measure used to match detections to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Axis-aligned IoU of the image boxes.
    #[serde(rename = "bbox_2d")]
    Bbox2d,
    /// Rotated IoU of the LiDAR-frame footprints.
    #[serde(rename = "bbox_bev")]
    BboxBev,
    /// Volumetric IoU of the LiDAR-frame boxes.
    #[serde(rename = "bbox_3d")]
    Bbox3d,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Bbox2d, Metric::BboxBev, Metric::Bbox3d];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Bbox2d => "bbox_2d",
            Metric::BboxBev => "bbox_bev",
            Metric::Bbox3d => "bbox_3d",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Bbox2d => "BBOX_2D",
            Metric::BboxBev => "BBOX_BEV",
            Metric::Bbox3d => "BBOX_3D",
        }
    }

    fn needs_calibration(self) -> bool {
        self != Metric::Bbox2d
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "2d" | "bbox_2d" => Ok(Metric::Bbox2d),
            "bev" | "bbox_bev" => Ok(Metric::BboxBev),
            "3d" | "bbox_3d" => Ok(Metric::Bbox3d),
            _ => Err(format!("unknown metric `{s}` (expected 2d, bev or 3d)")),
        }
    }
}

/// Axis-aligned IoU of `(left, top, right, bottom)` boxes.
pub fn iou_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub mode: ApMode,
    pub rules: DifficultyRules,
    /// Minimum overlap for a true positive, per class.
    pub iou_thresholds: BTreeMap<ObjectClass, f64>,
    /// Treat Van as ignored for Car and Person_sitting for Pedestrian.
    pub ignore_similar_classes: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: ApMode::default(),
            rules: DifficultyRules::default(),
            iou_thresholds: BTreeMap::new(),
            ignore_similar_classes: true,
        }
    }
}

impl EvalConfig {
    /// Configured threshold, else 0.7 for cars and 0.5 for the rest.
    pub fn iou_threshold(&self, class: ObjectClass) -> f64 {
        self.iou_thresholds.get(&class).copied().unwrap_or(match class {
            ObjectClass::Car | ObjectClass::Van | ObjectClass::Truck | ObjectClass::Tram => 0.7,
            _ => 0.5,
        })
    }
}

/// The classes of the official benchmark table.
pub const BENCHMARK_CLASSES: [ObjectClass; 3] = [ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Cyclist];

/// Per-frame data with LiDAR boxes precomputed for the 3D metrics.
struct PreparedFrame<'a> {
    gts: &'a [Annotation],
    dets: &'a [Detection],
    gt_boxes: Vec<Option<Box3D>>,
    det_boxes: Vec<Option<Box3D>>,
}

impl PreparedFrame<'_> {
    fn overlap(&self, metric: Metric, det: usize, gt: usize) -> f64 {
        match metric {
            Metric::Bbox2d => iou_2d(&self.dets[det].annotation.bbox2d, &self.gts[gt].bbox2d),
            Metric::BboxBev | Metric::Bbox3d => match (&self.det_boxes[det], &self.gt_boxes[gt]) {
                (Some(d), Some(g)) if metric == Metric::BboxBev => rotated_iou_bev(d, g),
                (Some(d), Some(g)) => iou_3d(d, g),
                // DontCare regions have no 3D extent
                _ => 0.0,
            },
        }
    }
}

/// LiDAR box of a label; degenerate dimensions give a box that overlaps nothing.
fn physical_box(a: &Annotation, calib: &Calibration) -> Result<Option<Box3D>> {
    match camera_label_to_lidar_box(a, calib) {
        Ok(b) => Ok(Some(b)),
        Err(Error::BadBox(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn prepare<'a>(
    gts: &'a [Annotation],
    dets: &'a [Detection],
    calib: Option<&Calibration>,
    classes: &BTreeSet<ObjectClass>,
) -> Result<PreparedFrame<'a>> {
    let mut frame = PreparedFrame { gts, dets, gt_boxes: vec![None; gts.len()], det_boxes: vec![None; dets.len()] };
    if let Some(calib) = calib {
        for (i, g) in gts.iter().enumerate() {
            if !g.is_dont_care() {
                frame.gt_boxes[i] = physical_box(g, calib)?;
            }
        }
        for (i, d) in dets.iter().enumerate() {
            if classes.contains(&d.annotation.label) {
                frame.det_boxes[i] = physical_box(&d.annotation, calib)?;
            }
        }
    }
    Ok(frame)
}

/// Detection outcome tagged with what pooled ordering needs.
#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f64,
    frame: usize,
    det: usize,
    outcome: Outcome,
}

/// Evaluates one metric over a set of frames keyed by frame id.
///
/// Every frame with ground truth must have a detection entry (possibly
/// empty) and vice versa; the 3D metrics also need a calibration per frame.
/// Cells without any counted ground truth have no AP.
pub fn evaluate(
    gts_by_frame: &BTreeMap<String, Vec<Annotation>>,
    dets_by_frame: &BTreeMap<String, Vec<Detection>>,
    calib_by_frame: &BTreeMap<String, Calibration>,
    metric: Metric,
    classes: &[ObjectClass],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.rules.validate()?;
    let gt_keys: BTreeSet<&String> = gts_by_frame.keys().collect();
    let det_keys: BTreeSet<&String> = dets_by_frame.keys().collect();
    if gt_keys != det_keys {
        let odd: Vec<&&String> = gt_keys.symmetric_difference(&det_keys).take(5).collect();
        return Err(Error::FrameSetMismatch(format!("ground truth and detections differ at {odd:?}")));
    }
    if metric.needs_calibration() {
        if let Some(missing) = gt_keys.iter().find(|k| !calib_by_frame.contains_key(**k)) {
            return Err(Error::FrameSetMismatch(format!("no calibration for frame {missing}")));
        }
    }

    let class_set: BTreeSet<ObjectClass> = classes.iter().copied().collect();
    let frames = gts_by_frame
        .iter()
        .map(|(id, gts)| {
            let calib = metric.needs_calibration().then(|| &calib_by_frame[id]);
            prepare(gts, &dets_by_frame[id], calib, &class_set)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = EvalReport::new(cfg.mode);
    for &class in classes {
        let threshold = cfg.iou_threshold(class);
        for difficulty in Difficulty::ALL {
            let rule = cfg.rules.get(difficulty);
            let mut pooled: Vec<Scored> = Vec::new();
            let mut num_gt = 0;
            for (f, frame) in frames.iter().enumerate() {
                let sets = filter_difficulty(frame.gts, class, rule, cfg.ignore_similar_classes);
                num_gt += sets.counted.len();
                let det_idx: Vec<usize> =
                    (0..frame.dets.len()).filter(|&d| frame.dets[d].annotation.label == class).collect();
                let scores: Vec<f64> = det_idx.iter().map(|&d| frame.dets[d].score).collect();
                let mut ignored = sets.ignored.clone();
                ignored.extend(&sets.dont_care);
                let result = match_detections(
                    &scores,
                    &sets.counted,
                    &ignored,
                    |d, g| frame.overlap(metric, det_idx[d], g),
                    threshold,
                );
                pooled.extend(det_idx.iter().enumerate().map(|(k, &d)| Scored {
                    score: scores[k],
                    frame: f,
                    det: d,
                    outcome: result.outcomes[k],
                }));
            }
            let ap = (num_gt > 0).then(|| {
                pooled.sort_by(|a, b| {
                    b.score.total_cmp(&a.score).then(a.frame.cmp(&b.frame)).then(a.det.cmp(&b.det))
                });
                average_precision(&pr_curve(pooled.iter().map(|s| s.outcome), num_gt), cfg.mode)
            });
            report.insert(class, difficulty, metric, ap);
        }
    }
    Ok(report)
}
