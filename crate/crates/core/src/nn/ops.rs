//! Dense building blocks with hand-written backward passes.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use statrs::function::erf::erf;

pub const LAYER_NORM_EPS: f64 = 1e-5;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `y = x · wᵀ + b` for `x: n×in`, `w: out×in`.
pub fn linear(x: ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let mut y = Array2::zeros((x.nrows(), w.nrows()));
    for mut row in y.rows_mut() {
        row.assign(&b);
    }
    general_mat_mul(1.0, &x, &w.t(), 1.0, &mut y);
    y
}

/// Accumulates weight/bias gradients of [`linear`] and returns `∂L/∂x`.
pub fn linear_backward(
    x: ArrayView2<f64>,
    w: ArrayView2<f64>,
    gy: ArrayView2<f64>,
    mut gw: ArrayViewMut2<f64>,
    mut gb: ArrayViewMut1<f64>,
) -> Array2<f64> {
    general_mat_mul(1.0, &gy.t(), &x, 1.0, &mut gw);
    gb += &gy.sum_axis(Axis(0));
    gy.dot(&w)
}

/// Weight-gradient-only variant of [`linear_backward`] for layers whose input needs no gradient.
pub fn linear_backward_params(
    x: ArrayView2<f64>,
    gy: ArrayView2<f64>,
    mut gw: ArrayViewMut2<f64>,
    mut gb: ArrayViewMut1<f64>,
) {
    general_mat_mul(1.0, &gy.t(), &x, 1.0, &mut gw);
    gb += &gy.sum_axis(Axis(0));
}

/// Exact (erf-based) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x * INV_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + erf(x * INV_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Backward through row-wise softmax given its output `y`.
pub fn softmax_rows_backward(y: ArrayView2<f64>, gy: ArrayView2<f64>) -> Array2<f64> {
    let mut gx = Array2::zeros(y.raw_dim());
    for ((yr, gr), mut out) in y.rows().into_iter().zip(gy.rows()).zip(gx.rows_mut()) {
        let dot = yr.dot(&gr);
        for ((o, &yv), &gv) in out.iter_mut().zip(yr).zip(gr) {
            *o = yv * (gv - dot);
        }
    }
    gx
}

/// Saved state of a row-wise LayerNorm.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

pub fn layer_norm(x: ArrayView2<f64>, gain: ArrayView1<f64>, bias: ArrayView1<f64>) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let k = *s;
        row.mapv_inplace(|v| v * k);
    }
    let mut y = &xhat * &gain;
    y += &bias;
    (y, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: ArrayView1<f64>,
    gy: ArrayView2<f64>,
    mut g_gain: ArrayViewMut1<f64>,
    mut g_bias: ArrayViewMut1<f64>,
) -> Array2<f64> {
    let d = gy.ncols() as f64;
    g_gain += &(&gy * &cache.xhat).sum_axis(Axis(0));
    g_bias += &gy.sum_axis(Axis(0));
    let gxhat = &gy * &gain;
    let mut gx = Array2::zeros(gy.raw_dim());
    for (((gh, xh), &s), mut out) in gxhat
        .rows()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
        .zip(gx.rows_mut())
    {
        let mean_g = gh.sum() / d;
        let mean_gx = gh.dot(&xh) / d;
        for ((o, &g), &x) in out.iter_mut().zip(gh).zip(xh) {
            *o = s * (g - mean_g - x * mean_gx);
        }
    }
    gx
}

/// Inverted-dropout mask: entries are 0 or `1 / (1 - p)`.
pub fn dropout_mask<R: Rng>(shape: (usize, usize), p: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Sinusoidal positional encoding, `len × d_model`.
pub fn positional_encoding(len: usize, d_model: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((len, d_model));
    for pos in 0..len {
        for i in (0..d_model).step_by(2) {
            let angle = pos as f64 / 10_000f64.powf(i as f64 / d_model as f64);
            pe[[pos, i]] = angle.sin();
            if i + 1 < d_model {
                pe[[pos, i + 1]] = angle.cos();
            }
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn positional_encoding_at_origin() {
        let pe = positional_encoding(4, 6);
        for c in 0..6 {
            assert_eq!(pe[[0, c]], if c % 2 == 0 { 0.0 } else { 1.0 });
        }
        assert!((pe[[1, 0]] - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 0.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p.iter().all(|v| v.is_finite()));
        let p = softmax(&[0.3, -2.0, 1.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for x in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "{x}");
        }
        assert_eq!(gelu(0.0), 0.0);
    }

    #[test]
    fn linear_and_backward_shapes() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let w = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let b = array![0.5, -0.5, 0.0];
        let y = linear(x.view(), w.view(), b.view());
        assert_eq!(y, array![[1.5, 1.5, 3.0], [3.5, 3.5, 7.0], [5.5, 5.5, 11.0]]);
        let mut gw = Array2::zeros((3, 2));
        let mut gb = Array1::zeros(3);
        let gy = Array2::ones((3, 3));
        let gx = linear_backward(x.view(), w.view(), gy.view(), gw.view_mut(), gb.view_mut());
        assert_eq!(gx, array![[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]]);
        assert_eq!(gb, array![3.0, 3.0, 3.0]);
        assert_eq!(gw.row(0), array![9.0, 12.0]);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x = array![[1.0, 2.0, 3.0, 4.0], [-1.0, 0.0, 5.0, 2.0]];
        let (y, _) = layer_norm(x.view(), Array1::ones(4).view(), Array1::zeros(4).view());
        for row in y.rows() {
            assert!(row.mean().unwrap().abs() < 1e-12);
            let var = row.iter().map(|v| v * v).sum::<f64>() / 4.0;
            assert!((var - 1.0).abs() < 1e-4);
        }
    }
}
