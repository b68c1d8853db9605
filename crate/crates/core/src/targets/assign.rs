use crate::geometry::{rotated_iou_bev, Box3D};
use crate::kitti::ObjectClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorStatus {
    Positive(usize),
    Negative,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub status: Vec<AnchorStatus>,
    pub num_pos: usize,
    pub num_neg: usize,
}

/// Positive/negative IoU cut-offs for assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouThresholds {
    pub pos: f64,
    pub neg: f64,
}

impl IouThresholds {
    /// 0.6 / 0.45 for cars, 0.5 / 0.35 for everything else.
    pub fn for_class(class: ObjectClass) -> Self {
        match class {
            ObjectClass::Car | ObjectClass::Van => IouThresholds { pos: 0.6, neg: 0.45 },
            _ => IouThresholds { pos: 0.5, neg: 0.35 },
        }
    }
}

/// Labels each anchor against the ground truths by BEV rotated IoU.
///
/// * positive when its best IoU reaches `pos_iou`, matched to its best
///   ground truth (lower index on ties);
/// * also positive when it is a ground truth's best anchor (lower anchor
///   index on ties) with non-zero IoU; if several ground truths pick the
///   same anchor the highest-index one wins;
/// * negative when not positive and its best IoU is below `neg_iou`;
/// * ignored otherwise.
///
/// Without ground truths every anchor is negative.
pub fn assign_targets(anchors: &[Box3D], gts: &[Box3D], pos_iou: f64, neg_iou: f64) -> Assignment {
    debug_assert!(0.0 <= neg_iou && neg_iou <= pos_iou && pos_iou <= 1.0);
    if gts.is_empty() {
        return Assignment { status: vec![AnchorStatus::Negative; anchors.len()], num_pos: 0, num_neg: anchors.len() };
    }

    let mut best_gt = vec![(0usize, f64::NEG_INFINITY); anchors.len()];
    let mut best_anchor = vec![(usize::MAX, 0.0f64); gts.len()];
    for (a, anchor) in anchors.iter().enumerate() {
        for (g, gt) in gts.iter().enumerate() {
            let iou = rotated_iou_bev(anchor, gt);
            if iou > best_gt[a].1 {
                best_gt[a] = (g, iou);
            }
            if iou > best_anchor[g].1 {
                best_anchor[g] = (a, iou);
            }
        }
    }

    let mut status: Vec<AnchorStatus> = best_gt
        .iter()
        .map(|&(g, iou)| {
            if iou >= pos_iou {
                AnchorStatus::Positive(g)
            } else if iou < neg_iou {
                AnchorStatus::Negative
            } else {
                AnchorStatus::Ignore
            }
        })
        .collect();
    for (g, &(a, _)) in best_anchor.iter().enumerate() {
        if a != usize::MAX {
            status[a] = AnchorStatus::Positive(g);
        }
    }

    let num_pos = status.iter().filter(|s| matches!(s, AnchorStatus::Positive(_))).count();
    let num_neg = status.iter().filter(|s| **s == AnchorStatus::Negative).count();
    Assignment { status, num_pos, num_neg }
}
