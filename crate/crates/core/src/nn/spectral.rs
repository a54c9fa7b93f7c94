//! Learnable frequency-domain filtering along the time axis.
//!
//! For each feature column `x` (length `L`) the layer computes
//! `Re(IDFT(V ⊙ DFT(x)))` where `V_k` is the complex gain applied to bin `k`:
//!
//! * [`SpectralMode::Literal`]: one weight per feature, the same `V_k = W_f`
//!   on every bin of the full spectrum. The real part of the result is
//!   `Re(W_f)·x`, so `Im(W_f)` receives (numerically) zero gradient.
//! * [`SpectralMode::PerBin`]: one weight per feature per non-negative bin
//!   `k = 0..=L/2`; negative bins use the conjugate so the filtered signal
//!   stays real (inverse real-FFT semantics). The imaginary parts act as phase
//!   shifts, except at DC and Nyquist where only the real part survives.
//!
//! The adjoint of the map is `Re(DFT(V ⊙ IDFT(g)))`, and with
//! `P_k = X_k · IDFT(g)_k` the weight gradients are `∂Re V_k = Re P_k`,
//! `∂Im V_k = -Im P_k`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    #[default]
    PerBin,
    Literal,
}

impl fmt::Display for SpectralMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralMode::PerBin => "per_bin",
            SpectralMode::Literal => "literal",
        })
    }
}

impl SpectralMode {
    /// Complex weights per feature for a window of `len` days.
    pub fn weights_per_feature(self, len: usize) -> usize {
        match self {
            SpectralMode::PerBin => len / 2 + 1,
            SpectralMode::Literal => 1,
        }
    }
}

/// Planned transforms for one window length.
#[derive(Clone)]
pub struct SpectralTransform {
    len: usize,
    mode: SpectralMode,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("len", &self.len)
            .field("mode", &self.mode)
            .finish()
    }
}

/// Per-sample spectra kept for the backward pass (`F` columns of `L` bins).
#[derive(Debug, Clone)]
pub struct SpectralCache {
    spectra: Vec<Vec<Complex64>>,
}

impl SpectralTransform {
    pub fn new(len: usize, mode: SpectralMode) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            mode,
            fft: planner.plan_fft_forward(len),
            ifft: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> SpectralMode {
        self.mode
    }

    fn bins(&self) -> usize {
        self.mode.weights_per_feature(self.len)
    }

    /// Gain applied to DFT bin `k` of feature `f`.
    fn gain(&self, re: &[f64], im: &[f64], f: usize, k: usize) -> Complex64 {
        match self.mode {
            SpectralMode::Literal => Complex64::new(re[f], im[f]),
            SpectralMode::PerBin => {
                let nb = self.bins();
                if k <= self.len / 2 {
                    Complex64::new(re[f * nb + k], im[f * nb + k])
                } else {
                    let j = self.len - k;
                    Complex64::new(re[f * nb + j], -im[f * nb + j])
                }
            }
        }
    }

    fn check(&self, x: &ArrayView2<f64>, re: &[f64], im: &[f64]) -> Result<()> {
        if x.nrows() != self.len {
            return Err(Error::shape(format!("window length {} != planned {}", x.nrows(), self.len)));
        }
        let want = x.ncols() * self.bins();
        if re.len() != want || im.len() != want {
            return Err(Error::shape(format!(
                "spectral weights need {want} entries for {} features, got {}/{}",
                x.ncols(),
                re.len(),
                im.len()
            )));
        }
        Ok(())
    }

    /// Filters one `L×F` sample.
    pub fn forward(&self, x: ArrayView2<f64>, re: &[f64], im: &[f64]) -> Result<(Array2<f64>, SpectralCache)> {
        self.check(&x, re, im)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("spectral input contains non-finite values"));
        }
        let n = self.len;
        let scale = 1.0 / n as f64;
        let mut out = Array2::zeros(x.raw_dim());
        let mut spectra = Vec::with_capacity(x.ncols());
        for (f, col) in x.axis_iter(Axis(1)).enumerate() {
            let mut spec: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.fft.process(&mut spec);
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, &s)| self.gain(re, im, f, k) * s)
                .collect();
            self.ifft.process(&mut buf);
            for (t, v) in buf.iter().enumerate() {
                out[[t, f]] = v.re * scale;
            }
            spectra.push(spec);
        }
        Ok((out, SpectralCache { spectra }))
    }

    /// Returns `∂L/∂x` and accumulates `∂L/∂Re W`, `∂L/∂Im W` into `g_re`, `g_im`.
    pub fn backward(
        &self,
        cache: &SpectralCache,
        re: &[f64],
        im: &[f64],
        gy: ArrayView2<f64>,
        g_re: &mut [f64],
        g_im: &mut [f64],
    ) -> Array2<f64> {
        let n = self.len;
        let nb = self.bins();
        let scale = 1.0 / n as f64;
        let mut gx = Array2::zeros(gy.raw_dim());
        for (f, col) in gy.axis_iter(Axis(1)).enumerate() {
            // IDFT(g) with the 1/L normalization
            let mut ghat: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.ifft.process(&mut ghat);
            ghat.iter_mut().for_each(|v| *v *= scale);

            let spec = &cache.spectra[f];
            for (k, (&xk, &gk)) in spec.iter().zip(&ghat).enumerate() {
                let p = xk * gk;
                match self.mode {
                    SpectralMode::Literal => {
                        g_re[f] += p.re;
                        g_im[f] -= p.im;
                    }
                    SpectralMode::PerBin => {
                        if k <= n / 2 {
                            g_re[f * nb + k] += p.re;
                            g_im[f * nb + k] -= p.im;
                        } else {
                            let j = n - k;
                            g_re[f * nb + j] += p.re;
                            g_im[f * nb + j] += p.im;
                        }
                    }
                }
            }

            let mut buf: Vec<Complex64> = ghat
                .iter()
                .enumerate()
                .map(|(k, &g)| self.gain(re, im, f, k) * g)
                .collect();
            self.fft.process(&mut buf);
            for (t, v) in buf.iter().enumerate() {
                gx[[t, f]] = v.re;
            }
        }
        gx
    }
}

/// Applies the spectral filter to every sample of a `B×L×F` batch.
pub fn spectral_forward(x: ArrayView3<f64>, re: &[f64], im: &[f64], mode: SpectralMode) -> Result<Array3<f64>> {
    let t = SpectralTransform::new(x.len_of(Axis(1)), mode);
    let mut out = Array3::zeros(x.raw_dim());
    for (b, sample) in x.axis_iter(Axis(0)).enumerate() {
        let (y, _) = t.forward(sample, re, im)?;
        out.index_axis_mut(Axis(0), b).assign(&y);
    }
    Ok(out)
}
