//! Analytic input gradients of [`vfe_layer`](super::vfe_layer), kept for
//! finite-difference checks. There is no training loop in this crate.

use ndarray::{Array3, ArrayView3};

use super::vfe::{check_inputs, VfeWeights};
use crate::error::{Error, Result};

/// Back-propagates `upstream` (shape `K x T x c_out`) through one VFE layer
/// and returns the gradient with respect to its input features.
///
/// The max aggregate routes gradient to the lowest-index point attaining the
/// maximum; ReLU passes gradient only for strictly positive activations.
pub fn vfe_input_gradient(
    features: ArrayView3<'_, f64>,
    counts: &[u32],
    w: &VfeWeights,
    upstream: ArrayView3<'_, f64>,
) -> Result<Array3<f64>> {
    check_inputs(&features, counts, w)?;
    let (k, t, c_in) = features.dim();
    let half = w.c_out() / 2;
    if upstream.dim() != (k, t, 2 * half) {
        return Err(Error::ShapeMismatch(format!("upstream shape {:?}", upstream.dim())));
    }

    let mut grad = Array3::<f64>::zeros((k, t, c_in));
    for v in 0..k {
        let n = counts[v] as usize;
        // forward pass for this voxel: pre-activations s and outputs h
        let mut s = vec![vec![0.0; half]; n];
        for p in 0..n {
            for j in 0..half {
                let mut a = w.bias[j];
                for i in 0..c_in {
                    a += features[[v, p, i]] * w.linear[[i, j]];
                }
                s[p][j] = w.normalize(j, a);
            }
        }
        let h = |p: usize, j: usize| s[p][j].max(0.0);

        let mut dh = vec![vec![0.0; half]; n];
        for j in 0..half {
            let mut best = 0;
            for p in 1..n {
                if h(p, j) > h(best, j) {
                    best = p;
                }
            }
            let pooled: f64 = (0..n).map(|p| upstream[[v, p, half + j]]).sum();
            for p in 0..n {
                dh[p][j] = upstream[[v, p, j]] + if p == best { pooled } else { 0.0 };
            }
        }

        for p in 0..n {
            for j in 0..half {
                if s[p][j] <= 0.0 {
                    continue;
                }
                let da = dh[p][j] * w.bn_gain(j);
                for i in 0..c_in {
                    grad[[v, p, i]] += w.linear[[i, j]] * da;
                }
            }
        }
    }
    Ok(grad)
}
