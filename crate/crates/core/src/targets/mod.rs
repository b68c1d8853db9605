//! Anchors, anchor-to-ground-truth assignment, box residual coding and the
//! detection losses of both detector heads.

mod anchors;
mod assign;
pub mod grad;
mod loss;
mod residual;

pub use anchors::{generate_anchors, AnchorGrid, AnchorSpec};
pub use assign::{assign_targets, AnchorStatus, Assignment, IouThresholds};
pub use loss::{
    binary_cross_entropy, classification_loss_pfe, direction_loss, direction_target, focal_loss,
    localization_loss, regression_loss, smooth_l1, total_loss_pfe, total_loss_vfe, PfeLossWeights,
    VfeLossWeights, PROB_FLOOR,
};
pub use residual::{decode_residuals, encode_residuals, AngleMode, ResidualVector};
