//! Central finite-difference checks of the hand-written backward passes.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Classifier, Params, NUM_CLASSES};
use crate::error::Result;

/// Denominator floor so tensors whose gradient is identically zero (the
/// attention key bias, imaginary literal-mode weights) compare on absolute
/// finite-difference noise instead of 0/0.
pub const NORM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GroupError {
    pub name: String,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, NORM_FLOOR)`.
    pub rel_error: f64,
    pub max_abs_diff: f64,
    pub norm: f64,
}

/// Compares analytic and numeric gradients of `Σ_c r_c · logit_c` for one
/// sample, tensor by tensor. With `dropout_seed` the same mask stream is
/// replayed for every evaluation, so the dropout path is checked too.
pub fn check<M: Classifier>(
    model: &M,
    params: &Params,
    x: ArrayView2<f64>,
    r: [f64; NUM_CLASSES],
    dropout_seed: Option<u64>,
    step: f64,
) -> Result<Vec<GroupError>> {
    let rng = || dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let objective = |p: &Params| -> Result<f64> {
        let mut g = rng();
        let t = model.forward_sample(p, x, g.as_mut())?;
        let l = M::logits(&t);
        Ok((0..NUM_CLASSES).map(|c| r[c] * l[c]).sum())
    };

    let mut g = rng();
    let trace = model.forward_sample(params, x, g.as_mut())?;
    let mut analytic = Params::zeros(params.layout().clone());
    model.backward_sample(params, &trace, r, &mut analytic);

    let mut probe = params.clone();
    let mut out = Vec::new();
    for e in params.layout().entries() {
        let (mut diff2, mut a2, mut n2, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
        for i in e.offset..e.offset + e.len {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + step;
            let up = objective(&probe)?;
            probe.data_mut()[i] = orig - step;
            let down = objective(&probe)?;
            probe.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.data()[i];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
            max_abs = max_abs.max((a - numeric).abs());
        }
        let scale = a2.sqrt().max(n2.sqrt()).max(NORM_FLOOR);
        out.push(GroupError {
            name: e.name.clone(),
            rel_error: diff2.sqrt() / scale,
            max_abs_diff: max_abs,
            norm: a2.sqrt(),
        });
    }
    Ok(out)
}
