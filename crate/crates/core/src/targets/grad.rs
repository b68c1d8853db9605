//! Analytic derivatives of the scalar losses, kept for finite-difference checks.

use super::loss::PROB_FLOOR;

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// d/dp of `-alpha (1 - p)^gamma ln p` for `p` above the clamp floor.
pub fn focal_loss_grad(p: f64, alpha: f64, gamma: f64) -> f64 {
    let p = p.max(PROB_FLOOR);
    let q = 1.0 - p;
    let mut g = -alpha * q.powf(gamma) / p;
    if gamma != 0.0 {
        g += alpha * gamma * q.powf(gamma - 1.0) * p.ln();
    }
    g
}

/// d/dp of the binary cross-entropy inside the clamp interval.
pub fn binary_cross_entropy_grad(p: f64, target: f64) -> f64 {
    -target / p + (1.0 - target) / (1.0 - p)
}
