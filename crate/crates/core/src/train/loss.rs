//! Class-weighted cross-entropy against label-smoothed targets.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::NUM_CLASSES;
use crate::roi::RoiClass;

/// `(1 − ε)·y + ε/3` for a one-hot `y`.
pub fn smooth_labels(y: &[f64; NUM_CLASSES], eps: f64) -> Result<[f64; NUM_CLASSES]> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || zeros != NUM_CLASSES - 1 {
        return Err(Error::domain(format!("{y:?} is not one-hot")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!("label smoothing {eps} outside [0, 1)")));
    }
    let k = NUM_CLASSES as f64;
    Ok(y.map(|v| (1.0 - eps) * v + eps / k))
}

pub fn smoothed_target(class: RoiClass, eps: f64) -> Result<[f64; NUM_CLASSES]> {
    let mut y = [0.0; NUM_CLASSES];
    y[class.index()] = 1.0;
    smooth_labels(&y, eps)
}

fn log_softmax(z: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.map(|v| v - lse)
}

/// Unnormalized per-sample loss `−Σ_c w_c ỹ_c log p_c` and its gradient
/// with respect to the logits, `p_j·Σ_c w_c ỹ_c − w_j ỹ_j`.
pub fn sample_loss_grad(
    logits: &[f64; NUM_CLASSES],
    target: &[f64; NUM_CLASSES],
    w: &[f64; NUM_CLASSES],
) -> Result<(f64, [f64; NUM_CLASSES])> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite logits {logits:?}")));
    }
    let lp = log_softmax(logits);
    let s: f64 = (0..NUM_CLASSES).map(|c| w[c] * target[c]).sum();
    let loss = -(0..NUM_CLASSES).map(|c| w[c] * target[c] * lp[c]).sum::<f64>();
    let mut g = [0.0; NUM_CLASSES];
    for j in 0..NUM_CLASSES {
        g[j] = lp[j].exp() * s - w[j] * target[j];
    }
    Ok((loss, g))
}

fn rows(m: &ArrayView2<f64>) -> Result<Vec<[f64; NUM_CLASSES]>> {
    if m.ncols() != NUM_CLASSES {
        return Err(Error::shape(format!("expected B×3, got {:?}", m.dim())));
    }
    Ok(m.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

/// Batch-mean loss and `B×3` gradient.
pub fn weighted_ce_grad(
    logits: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    w: &[f64; NUM_CLASSES],
) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::shape(format!("logits {:?} vs targets {:?}", logits.dim(), targets.dim())));
    }
    let (z, y) = (rows(&logits)?, rows(&targets)?);
    if z.is_empty() {
        return Err(Error::Empty("empty batch".into()));
    }
    let b = z.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((z.len(), NUM_CLASSES));
    for (i, (zi, yi)) in z.iter().zip(&y).enumerate() {
        let (l, g) = sample_loss_grad(zi, yi, w)?;
        loss += l;
        for c in 0..NUM_CLASSES {
            grad[[i, c]] = g[c] / b;
        }
    }
    Ok((loss / b, grad))
}

/// `−(1/B) Σ_i Σ_c w_c ỹ_ic log softmax(z_i)_c`.
pub fn weighted_ce(logits: ArrayView2<f64>, targets: ArrayView2<f64>, w: &[f64; NUM_CLASSES]) -> Result<f64> {
    weighted_ce_grad(logits, targets, w).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn smoothing_examples() {
        let t = smooth_labels(&[0.0, 0.0, 1.0], 0.1).unwrap();
        assert!((t[0] - 1.0 / 30.0).abs() < 1e-12 && (t[2] - 28.0 / 30.0).abs() < 1e-12);
        assert_eq!(smooth_labels(&[0.0, 1.0, 0.0], 0.0).unwrap(), [0.0, 1.0, 0.0]);
        assert!(smooth_labels(&[0.5, 0.5, 0.0], 0.1).is_err());
        assert!(smooth_labels(&[1.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn uniform_logits_give_ln3() {
        let l = weighted_ce(array![[0.3, 0.3, 0.3]].view(), array![[0.0, 1.0, 0.0]].view(), &[1.0; 3]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let l = weighted_ce(array![[1000.0, 0.0, 0.0]].view(), array![[1.0, 0.0, 0.0]].view(), &[1.0; 3]).unwrap();
        assert!(l.is_finite() && l < 1e-12);
        assert!(weighted_ce(array![[f64::NAN, 0.0, 0.0]].view(), array![[1.0, 0.0, 0.0]].view(), &[1.0; 3]).is_err());
    }

    #[test]
    fn matches_naive_formula() {
        let z = array![[0.2, -1.3, 2.1], [3.0, 0.1, -0.4], [-0.7, -0.7, 0.9]];
        let y = array![[0.9, 0.05, 0.05], [0.05, 0.05, 0.9], [0.05, 0.9, 0.05]];
        let w = [0.8, 1.2, 1.05];
        let mut naive = 0.0;
        for i in 0..3 {
            let den: f64 = (0..3).map(|c| f64::exp(z[[i, c]])).sum();
            for c in 0..3 {
                naive -= w[c] * y[[i, c]] * (f64::exp(z[[i, c]]) / den).ln();
            }
        }
        naive /= 3.0;
        assert!((weighted_ce(z.view(), y.view(), &w).unwrap() - naive).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            z in proptest::array::uniform3(-4.0f64..4.0),
            class in 0usize..3,
            w in proptest::array::uniform3(0.1f64..3.0),
            eps in 0.0f64..0.5,
        ) {
            let mut y = [0.0; 3];
            y[class] = 1.0;
            let t = smooth_labels(&y, eps).unwrap();
            let (_, g) = sample_loss_grad(&z, &t, &w).unwrap();
            for j in 0..3 {
                let h = 1e-6;
                let (mut up, mut dn) = (z, z);
                up[j] += h;
                dn[j] -= h;
                let num = (sample_loss_grad(&up, &t, &w).unwrap().0 - sample_loss_grad(&dn, &t, &w).unwrap().0) / (2.0 * h);
                prop_assert!((num - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0));
            }
        }

        #[test]
        fn loss_is_nonnegative(
            z in proptest::array::uniform3(-50.0f64..50.0),
            class in 0usize..3,
            w in proptest::array::uniform3(0.0f64..5.0),
            eps in 0.0f64..0.99,
        ) {
            let t = smoothed_target(RoiClass::from_index(class).unwrap(), eps).unwrap();
            prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            prop_assert!(sample_loss_grad(&z, &t, &w).unwrap().0 >= 0.0);
        }
    }
}
