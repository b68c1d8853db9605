use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Box3D};

/// How the heading residual is coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleMode {
    /// `sin(theta_gt - theta_a)`; sign-ambiguous, paired with a direction classifier.
    SinDiff,
    /// `theta_gt - theta_a` wrapped into `(-pi, pi]`.
    RawDiff,
}

/// `(dx, dy, dz, dw, dl, dh, dtheta)` of a box relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualVector(pub [f64; 7]);

impl ResidualVector {
    pub fn zero() -> Self {
        ResidualVector([0.0; 7])
    }
}

fn check_dims(b: &Box3D, what: &str) -> Result<()> {
    if b.dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::BadBox(format!("{what} dimensions {:?} must be positive", b.dims)));
    }
    Ok(())
}

/// Center offsets scaled by the anchor's BEV diagonal `sqrt(w^2 + l^2)`,
/// log size ratios, and the heading residual per `mode`.
pub fn encode_residuals(gt: &Box3D, anchor: &Box3D, mode: AngleMode) -> Result<ResidualVector> {
    check_dims(gt, "ground truth")?;
    check_dims(anchor, "anchor")?;
    let diag = anchor.width().hypot(anchor.length());
    let dtheta = gt.yaw - anchor.yaw;
    Ok(ResidualVector([
        (gt.center[0] - anchor.center[0]) / diag,
        (gt.center[1] - anchor.center[1]) / diag,
        (gt.center[2] - anchor.center[2]) / diag,
        (gt.width() / anchor.width()).ln(),
        (gt.length() / anchor.length()).ln(),
        (gt.height() / anchor.height()).ln(),
        match mode {
            AngleMode::SinDiff => dtheta.sin(),
            AngleMode::RawDiff => normalize_angle(dtheta),
        },
    ]))
}

/// Inverse of [`encode_residuals`]. With [`AngleMode::SinDiff`] the heading
/// comes back on the principal branch `theta_a + asin(dtheta)`.
pub fn decode_residuals(rv: &ResidualVector, anchor: &Box3D, mode: AngleMode) -> Result<Box3D> {
    check_dims(anchor, "anchor")?;
    let [dx, dy, dz, dw, dl, dh, dt] = rv.0;
    let diag = anchor.width().hypot(anchor.length());
    let yaw = match mode {
        AngleMode::SinDiff if !(-1.0..=1.0).contains(&dt) => return Err(Error::OutOfRangeAngle(dt)),
        AngleMode::SinDiff => anchor.yaw + dt.asin(),
        AngleMode::RawDiff => anchor.yaw + dt,
    };
    Box3D::new(
        [anchor.center[0] + dx * diag, anchor.center[1] + dy * diag, anchor.center[2] + dz * diag],
        [anchor.length() * dl.exp(), anchor.width() * dw.exp(), anchor.height() * dh.exp()],
        yaw,
        anchor.frame,
    )
}
