use super::{rotated_iou_bev, Box3D};

/// Greedy non-maximum suppression on BEV rotated IoU.
///
/// Boxes are visited by descending score, equal scores by lower index. A box
/// is dropped when its IoU with an already kept box exceeds `iou_threshold`.
/// Returns kept indices in visiting order.
///
/// # Panics
///
/// If `boxes` and `scores` differ in length.
pub fn nms_rotated(boxes: &[Box3D], scores: &[f64], iou_threshold: f64) -> Vec<usize> {
    assert_eq!(boxes.len(), scores.len(), "one score per box");
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    // stable sort keeps lower indices first among ties
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep.iter().all(|&k| rotated_iou_bev(&boxes[k], &boxes[i]) <= iou_threshold) {
            keep.push(i);
        }
    }
    keep
}
