use crate::geometry::normalize_angle;

use super::assign::{AnchorStatus, Assignment};
use super::residual::ResidualVector;

/// Probabilities are clamped to at least this before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Huber loss with unit transition: `0.5 x^2` inside `|x| < 1`, `|x| - 0.5` outside.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Sum of [`smooth_l1`] over the seven residuals.
pub fn localization_loss(rv: &ResidualVector) -> f64 {
    rv.0.iter().fold(0.0, |acc, &d| acc + smooth_l1(d))
}

/// Smooth-L1 between predicted and target residuals, summed over the seven coordinates.
pub fn regression_loss(pred: &ResidualVector, target: &ResidualVector) -> f64 {
    pred.0.iter().zip(&target.0).fold(0.0, |acc, (p, t)| acc + smooth_l1(p - t))
}

/// `-alpha (1 - p)^gamma ln p` for the probability `p` of the true class.
pub fn focal_loss(p: f64, alpha: f64, gamma: f64) -> f64 {
    -alpha * (1.0 - p).powf(gamma) * p.max(PROB_FLOOR).ln()
}

/// `-(t ln p + (1 - t) ln(1 - p))` with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn binary_cross_entropy(p: f64, target: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Heading bin: 1 when the wrapped `theta_gt - theta_a` is non-negative.
pub fn direction_target(gt_theta: f64, anchor_theta: f64) -> usize {
    (normalize_angle(gt_theta - anchor_theta) >= 0.0) as usize
}

/// Two-bin softmax cross-entropy against [`direction_target`].
pub fn direction_loss(logits: [f64; 2], gt_theta: f64, anchor_theta: f64) -> f64 {
    let target = direction_target(gt_theta, anchor_theta);
    let top = logits[0].max(logits[1]);
    let lse = top + ((logits[0] - top).exp() + (logits[1] - top).exp()).ln();
    lse - logits[target]
}

/// Focal classification loss summed over non-ignored anchors. `probs[i]` is
/// anchor `i`'s foreground probability; negatives use `1 - p` and weight
/// `1 - alpha`.
pub fn classification_loss_pfe(probs: &[f64], assignment: &Assignment, alpha: f64, gamma: f64) -> f64 {
    probs.iter().zip(&assignment.status).fold(0.0, |acc, (&p, s)| match s {
        AnchorStatus::Positive(_) => acc + focal_loss(p, alpha, gamma),
        AnchorStatus::Negative => acc + focal_loss(1.0 - p, 1.0 - alpha, gamma),
        AnchorStatus::Ignore => acc,
    })
}

/// Term weights of the pillar detector's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfeLossWeights {
    pub loc: f64,
    pub cls: f64,
    pub dir: f64,
}

impl Default for PfeLossWeights {
    fn default() -> Self {
        PfeLossWeights { loc: 0.2, cls: 1.0, dir: 0.2 }
    }
}

impl PfeLossWeights {
    /// `(loc * L_loc + cls * L_cls + dir * L_dir) / N_pos`; a frame without
    /// positives divides by 1.
    pub fn total(&self, loc_sum: f64, cls_sum: f64, dir_sum: f64, num_pos: usize) -> f64 {
        (self.loc * loc_sum + self.cls * cls_sum + self.dir * dir_sum) / num_pos.max(1) as f64
    }
}

/// [`PfeLossWeights::total`] with the default weights 0.2 / 1 / 0.2.
pub fn total_loss_pfe(loc_sum: f64, cls_sum: f64, dir_sum: f64, num_pos: usize) -> f64 {
    PfeLossWeights::default().total(loc_sum, cls_sum, dir_sum, num_pos)
}

/// Positive/negative balance of the voxel detector's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfeLossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for VfeLossWeights {
    fn default() -> Self {
        VfeLossWeights { alpha: 1.5, beta: 1.0 }
    }
}

/// `alpha / N_pos * sum(pos) + beta / N_neg * sum(neg) + 1 / N_pos * sum(reg)`.
///
/// Terms are accumulated left to right; zero counts divide by 1.
pub fn total_loss_vfe(
    pos_cls_terms: &[f64],
    neg_cls_terms: &[f64],
    reg_terms: &[f64],
    weights: VfeLossWeights,
    num_pos: usize,
    num_neg: usize,
) -> f64 {
    let sum = |v: &[f64]| v.iter().fold(0.0, |a, b| a + b);
    let pos = num_pos.max(1) as f64;
    let neg = num_neg.max(1) as f64;
    weights.alpha * sum(pos_cls_terms) / pos + weights.beta * sum(neg_cls_terms) / neg + sum(reg_terms) / pos
}
