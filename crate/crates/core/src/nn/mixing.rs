//! Channel re-weighting: temporal mean → bottleneck → per-feature scale.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayViewMut2, Axis};

use super::ops::{gelu, gelu_grad};
use crate::error::{Error, Result};

/// Bottleneck width for `features` channels and reduction ratio `r`.
pub fn bottleneck_width(features: usize, reduction: usize) -> usize {
    (features / reduction.max(1)).max(1)
}

#[derive(Debug, Clone)]
pub struct MixCache {
    pub z: Array1<f64>,
    pub u: Array1<f64>,
    pub a: Array1<f64>,
    pub s: Array1<f64>,
}

/// `z = mean_t X`, `s = W2 · GELU(W1 z)`, `X_mixed = X ⊙ s` for one `L×F` sample.
pub fn mix(x: ArrayView2<f64>, w1: ArrayView2<f64>, w2: ArrayView2<f64>) -> Result<(Array2<f64>, MixCache)> {
    let f = x.ncols();
    if w1.ncols() != f || w2.nrows() != f || w2.ncols() != w1.nrows() {
        return Err(Error::shape(format!(
            "channel mixing expects W1: r×{f}, W2: {f}×r; got {:?} and {:?}",
            w1.shape(),
            w2.shape()
        )));
    }
    let z = x.mean_axis(Axis(0)).ok_or_else(|| Error::shape("empty window"))?;
    let u = w1.dot(&z);
    let a = u.mapv(gelu);
    let s = w2.dot(&a);
    let out = &x * &s;
    Ok((out, MixCache { z, u, a, s }))
}

/// Returns `∂L/∂X` and accumulates `∂L/∂W1`, `∂L/∂W2`.
pub fn mix_backward(
    x: ArrayView2<f64>,
    cache: &MixCache,
    w1: ArrayView2<f64>,
    w2: ArrayView2<f64>,
    gy: ArrayView2<f64>,
    mut g_w1: ArrayViewMut2<f64>,
    mut g_w2: ArrayViewMut2<f64>,
) -> Array2<f64> {
    let l = x.nrows() as f64;
    let g_s = (&gy * &x).sum_axis(Axis(0));
    outer_add(g_s.view(), cache.a.view(), &mut g_w2);
    let g_a = w2.t().dot(&g_s);
    let g_u = &g_a * &cache.u.mapv(gelu_grad);
    outer_add(g_u.view(), cache.z.view(), &mut g_w1);
    let g_z = w1.t().dot(&g_u);
    let mut gx = &gy * &cache.s;
    gx += &(g_z / l);
    gx
}

fn outer_add(a: ArrayView1<f64>, b: ArrayView1<f64>, out: &mut ArrayViewMut2<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[[i, j]] += ai * bj;
        }
    }
}

/// Batched channel mixing, returning `(z, s, X_mixed)`.
pub fn channel_mix_forward(
    x: ArrayView3<f64>,
    w1: ArrayView2<f64>,
    w2: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Array3<f64>)> {
    let (b, _, f) = x.dim();
    let mut z = Array2::zeros((b, f));
    let mut s = Array2::zeros((b, f));
    let mut mixed = Array3::zeros(x.raw_dim());
    for (i, sample) in x.axis_iter(Axis(0)).enumerate() {
        let (out, c) = mix(sample, w1, w2)?;
        z.row_mut(i).assign(&c.z);
        s.row_mut(i).assign(&c.s);
        mixed.index_axis_mut(Axis(0), i).assign(&out);
    }
    Ok((z, s, mixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_projection_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_mat(10, 4, &mut rng);
        let w1 = rand_mat(1, 4, &mut rng);
        let (y, c) = mix(x.view(), w1.view(), Array2::zeros((4, 1)).view()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0) && c.s.iter().all(|v| *v == 0.0));
        let (y, _) = mix(x.view(), Array2::zeros((1, 4)).view(), rand_mat(4, 1, &mut rng).view()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_input_mean() {
        let mut x = Array2::zeros((6, 3));
        for mut r in x.rows_mut() {
            r.assign(&ndarray::array![1.5, -2.0, 0.25]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, c) = mix(x.view(), rand_mat(1, 3, &mut rng).view(), rand_mat(3, 1, &mut rng).view()).unwrap();
        assert_eq!(c.z, ndarray::array![1.5, -2.0, 0.25]);
    }

    #[test]
    fn matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (l, f, r) = (7, 5, 2);
        let x = rand_mat(l, f, &mut rng);
        let w1 = rand_mat(r, f, &mut rng);
        let w2 = rand_mat(f, r, &mut rng);
        let (y, _) = mix(x.view(), w1.view(), w2.view()).unwrap();
        let mut z = vec![0.0; f];
        for j in 0..f {
            for t in 0..l {
                z[j] += x[[t, j]];
            }
            z[j] /= l as f64;
        }
        let mut hidden = vec![0.0; r];
        for i in 0..r {
            let mut acc = 0.0;
            for j in 0..f {
                acc += w1[[i, j]] * z[j];
            }
            hidden[i] = 0.5 * acc * (1.0 + statrs::function::erf::erf(acc / 2f64.sqrt()));
        }
        for j in 0..f {
            let mut sj = 0.0;
            for i in 0..r {
                sj += w2[[j, i]] * hidden[i];
            }
            for t in 0..l {
                assert!((y[[t, j]] - x[[t, j]] * sj).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let x = Array2::<f64>::zeros((4, 3));
        assert!(mix(x.view(), Array2::zeros((1, 2)).view(), Array2::zeros((3, 1)).view()).is_err());
        assert!(mix(x.view(), Array2::zeros((1, 3)).view(), Array2::zeros((2, 1)).view()).is_err());
    }

    #[test]
    fn bottleneck_rule() {
        assert_eq!(bottleneck_width(14, 4), 3);
        assert_eq!(bottleneck_width(3, 4), 1);
        assert_eq!(bottleneck_width(16, 4), 4);
    }
}
