use ndarray::{Array1, Array2, Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one VFE layer: a `c_in x (c_out / 2)` linear map followed by
/// inference-mode batch normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VfeWeights {
    pub linear: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn_scale: Array1<f64>,
    pub bn_shift: Array1<f64>,
    pub bn_mean: Array1<f64>,
    pub bn_var: Array1<f64>,
    pub epsilon: f64,
}

fn half_width(c_out: usize) -> Result<usize> {
    if c_out == 0 || c_out % 2 != 0 {
        return Err(Error::BadWeights(format!("c_out = {c_out} must be even and positive")));
    }
    Ok(c_out / 2)
}

impl VfeWeights {
    /// Linear map with unit batch norm (scale 1, shift 0, mean 0, var 1).
    pub fn from_linear(linear: Array2<f64>, bias: Array1<f64>, epsilon: f64) -> Result<Self> {
        let half = linear.ncols();
        let w = VfeWeights {
            linear,
            bias,
            bn_scale: Array1::ones(half),
            bn_shift: Array1::zeros(half),
            bn_mean: Array1::zeros(half),
            bn_var: Array1::ones(half),
            epsilon,
        };
        w.validate()?;
        Ok(w)
    }

    /// Fixed, non-learned weights for exercising the data path, e.g. in
    /// benchmarks. Entries follow a deterministic pattern in `[-0.5, 0.5]`.
    pub fn patterned(c_in: usize, c_out: usize) -> Result<Self> {
        let half = half_width(c_out)?;
        let linear = Array2::from_shape_fn((c_in, half), |(i, j)| {
            ((i * 31 + j * 17 + 7) % 23) as f64 / 22.0 - 0.5
        });
        let bias = Array1::from_shape_fn(half, |j| ((j * 13) % 7) as f64 / 60.0 - 0.05);
        VfeWeights::from_linear(linear, bias, 1e-3)
    }

    pub fn c_in(&self) -> usize {
        self.linear.nrows()
    }

    pub fn c_out(&self) -> usize {
        2 * self.linear.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let half = self.linear.ncols();
        if half == 0 || self.linear.nrows() == 0 {
            return Err(Error::BadWeights("empty linear map".into()));
        }
        for (name, v) in [
            ("bias", &self.bias),
            ("bn_scale", &self.bn_scale),
            ("bn_shift", &self.bn_shift),
            ("bn_mean", &self.bn_mean),
            ("bn_var", &self.bn_var),
        ] {
            if v.len() != half {
                return Err(Error::BadWeights(format!("{name} has length {}, expected {half}", v.len())));
            }
        }
        if self.bn_var.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::BadWeights("negative batch-norm variance".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::BadWeights("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// `relu(bn(W^T f + b))` for one point.
    pub(crate) fn pointwise(&self, f: &[f64], out: &mut [f64]) {
        let half = self.linear.ncols();
        for j in 0..half {
            let mut a = self.bias[j];
            for (i, fi) in f.iter().enumerate() {
                a += fi * self.linear[[i, j]];
            }
            out[j] = self.normalize(j, a).max(0.0);
        }
    }

    #[inline]
    pub(crate) fn bn_gain(&self, j: usize) -> f64 {
        self.bn_scale[j] / (self.bn_var[j] + self.epsilon).sqrt()
    }

    #[inline]
    pub(crate) fn normalize(&self, j: usize, a: f64) -> f64 {
        (a - self.bn_mean[j]) * self.bn_gain(j) + self.bn_shift[j]
    }
}

pub(crate) fn check_inputs(features: &ArrayView3<'_, f64>, counts: &[u32], w: &VfeWeights) -> Result<()> {
    w.validate()?;
    let (k, t, c_in) = features.dim();
    if c_in != w.c_in() {
        return Err(Error::ShapeMismatch(format!("features have {c_in} channels, weights expect {}", w.c_in())));
    }
    if counts.len() != k {
        return Err(Error::ShapeMismatch(format!("{} counts for {k} voxels", counts.len())));
    }
    if let Some(c) = counts.iter().find(|&&c| c as usize > t) {
        return Err(Error::ShapeMismatch(format!("count {c} exceeds {t} slots")));
    }
    Ok(())
}

/// Applies one VFE layer. For each valid point `h = relu(bn(linear(f)))`; each
/// voxel's aggregate `m` is the elementwise max of its `h` rows, and the
/// output row is `[h, m]`. Invalid slots stay zero.
pub fn vfe_layer(features: ArrayView3<'_, f64>, counts: &[u32], w: &VfeWeights) -> Result<Array3<f64>> {
    check_inputs(&features, counts, w)?;
    let (k, t, _) = features.dim();
    let half = w.c_out() / 2;
    let mut out = Array3::<f64>::zeros((k, t, 2 * half));
    let mut h = vec![0.0; half];
    let mut m = vec![0.0; half];
    let mut f = vec![0.0; w.c_in()];
    for v in 0..k {
        let n = counts[v] as usize;
        m.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
        for p in 0..n {
            f.iter_mut().zip(features.slice(ndarray::s![v, p, ..])).for_each(|(d, s)| *d = *s);
            w.pointwise(&f, &mut h);
            for j in 0..half {
                out[[v, p, j]] = h[j];
                m[j] = m[j].max(h[j]);
            }
        }
        for p in 0..n {
            for j in 0..half {
                out[[v, p, half + j]] = m[j];
            }
        }
    }
    Ok(out)
}

/// Elementwise max over each voxel's valid rows, giving one `C`-vector per
/// voxel. Empty voxels map to zeros.
pub fn voxel_wise_max(features: ArrayView3<'_, f64>, counts: &[u32]) -> Array2<f64> {
    let (k, _, c) = features.dim();
    let mut out = Array2::<f64>::zeros((k, c));
    for v in 0..k {
        let n = counts[v] as usize;
        if n == 0 {
            continue;
        }
        for j in 0..c {
            out[[v, j]] = (0..n).map(|p| features[[v, p, j]]).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    out
}
