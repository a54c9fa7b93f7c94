//! Recurrent baseline: the same spectral and channel-mixing front end,
//! stacked unidirectional LSTM layers, and a linear head on the last hidden state.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, ArrayView3, ArrayViewMut2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mixing::{bottleneck_width, mix, mix_backward, MixCache};
use super::ops::{dropout_mask, linear, linear_backward, sigmoid, softmax};
use super::params::{Layout, ParamId, Params};
use super::spectral::{SpectralCache, SpectralMode, SpectralTransform};
use super::{Classifier, ModelKind, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::par::Exec;

fn default_hidden() -> usize {
    16
}
fn default_layers() -> usize {
    2
}
fn default_dropout() -> f64 {
    0.3
}
fn default_lr() -> f64 {
    1e-4
}
fn default_reduction() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    pub window: usize,
    pub features: usize,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    #[serde(default = "default_layers")]
    pub n_layers: usize,
    /// Applied between stacked layers only.
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_reduction")]
    pub reduction: usize,
    #[serde(default)]
    pub spectral_mode: SpectralMode,
}

impl LstmConfig {
    /// h=16, two layers, dropout 0.3, lr 1e-4.
    pub fn baseline(window: usize, features: usize) -> Self {
        Self {
            window,
            features,
            hidden_size: default_hidden(),
            n_layers: default_layers(),
            dropout: default_dropout(),
            learning_rate: default_lr(),
            reduction: default_reduction(),
            spectral_mode: SpectralMode::default(),
        }
    }

    pub fn tiny() -> Self {
        Self {
            hidden_size: 4,
            dropout: 0.0,
            ..Self::baseline(8, 3)
        }
    }

    pub fn bottleneck(&self) -> usize {
        bottleneck_width(self.features, self.reduction)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.window < 2 {
            problems.push(format!("window must be at least 2, got {}", self.window));
        }
        if self.features == 0 {
            problems.push("features must be at least 1".to_string());
        }
        if self.hidden_size == 0 {
            problems.push("hidden_size must be at least 1".to_string());
        }
        if self.n_layers == 0 {
            problems.push("n_layers must be at least 1".to_string());
        }
        if self.reduction == 0 {
            problems.push("reduction must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    pub fn parameter_count(&self) -> usize {
        let (f, h, r) = (self.features, self.hidden_size, self.bottleneck());
        let front = 2 * f * self.spectral_mode.weights_per_feature(self.window) + 2 * r * f;
        let layers: usize = (0..self.n_layers)
            .map(|l| {
                let input = if l == 0 { f } else { h };
                4 * h * input + 4 * h * h + 4 * h
            })
            .sum();
        front + layers + NUM_CLASSES * h + NUM_CLASSES
    }
}

#[derive(Debug, Clone)]
pub struct LayerIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    /// Gate order i, f, g, o; `4h` entries.
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
struct Ids {
    spec_re: ParamId,
    spec_im: ParamId,
    mix_w1: ParamId,
    mix_w2: ParamId,
    layers: Vec<LayerIds>,
    head_w: ParamId,
    head_b: ParamId,
}

#[derive(Debug, Clone)]
pub struct LstmNet {
    cfg: LstmConfig,
    layout: Arc<Layout>,
    ids: Ids,
    spectral: SpectralTransform,
}

/// One recurrent layer's saved activations. Row 0 of `c` and `h` is the zero initial state.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    /// `L×4h` post-activation gates `[i | f | g | o]`.
    pub gates: Array2<f64>,
    pub c: Array2<f64>,
    pub h: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmTrace {
    spec: SpectralCache,
    pub x_spectral: Array2<f64>,
    mix: MixCache,
    pub x_mixed: Array2<f64>,
    pub layers: Vec<LayerTrace>,
    /// Mask applied to the output of layer `l` before layer `l + 1`.
    masks: Vec<Option<Array2<f64>>>,
    pub logits: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
}

impl LstmTrace {
    /// Cell states `c_1..c_L` of one layer.
    pub fn cell_states(&self, layer: usize) -> ArrayView2<'_, f64> {
        self.layers[layer].c.slice(s![1.., ..])
    }

    pub fn final_hidden(&self) -> Array1<f64> {
        let h = &self.layers.last().expect("at least one layer").h;
        h.row(h.nrows() - 1).to_owned()
    }
}

impl LstmNet {
    pub fn new(cfg: LstmConfig) -> Result<Self> {
        cfg.validate()?;
        let (f, h, r) = (cfg.features, cfg.hidden_size, cfg.bottleneck());
        let nb = cfg.spectral_mode.weights_per_feature(cfg.window);
        let spec_shape: Vec<usize> = match cfg.spectral_mode {
            SpectralMode::Literal => vec![f],
            SpectralMode::PerBin => vec![f, nb],
        };
        let mut layout = Layout::default();
        let spec_re = layout.add("spectral.re", &spec_shape);
        let spec_im = layout.add("spectral.im", &spec_shape);
        let mix_w1 = layout.add("mixing.w1", &[r, f]);
        let mix_w2 = layout.add("mixing.w2", &[f, r]);
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let input = if l == 0 { f } else { h };
                LayerIds {
                    w_ih: layout.add(format!("lstm.{l}.w_ih"), &[4 * h, input]),
                    w_hh: layout.add(format!("lstm.{l}.w_hh"), &[4 * h, h]),
                    bias: layout.add(format!("lstm.{l}.bias"), &[4 * h]),
                }
            })
            .collect();
        let head_w = layout.add("head.w", &[NUM_CLASSES, h]);
        let head_b = layout.add("head.b", &[NUM_CLASSES]);
        debug_assert_eq!(layout.size(), cfg.parameter_count());
        Ok(Self {
            spectral: SpectralTransform::new(cfg.window, cfg.spectral_mode),
            layout: Arc::new(layout),
            ids: Ids {
                spec_re,
                spec_im,
                mix_w1,
                mix_w2,
                layers,
                head_w,
                head_b,
            },
            cfg,
        })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.cfg
    }

    pub fn layer_ids(&self) -> &[LayerIds] {
        &self.ids.layers
    }

    pub fn head_ids(&self) -> (ParamId, ParamId) {
        (self.ids.head_w, self.ids.head_b)
    }

    /// Batched evaluation-mode logits, `B×3`.
    pub fn forward(&self, params: &Params, x: ArrayView3<f64>, exec: Exec) -> Result<Array2<f64>> {
        let samples: Vec<ArrayView2<f64>> = x.axis_iter(Axis(0)).collect();
        let traces = exec.try_map(&samples, |s| self.forward_sample(params, *s, None))?;
        let flat: Vec<f64> = traces.iter().flat_map(|t| t.logits).collect();
        Ok(Array2::from_shape_vec((traces.len(), NUM_CLASSES), flat).expect("3 logits per sample"))
    }
}

fn layer_forward(p: &Params, ids: &LayerIds, input: Array2<f64>, hidden: usize) -> LayerTrace {
    let l = input.nrows();
    let pre_in = linear(input.view(), p.mat(ids.w_ih), p.vec(ids.bias));
    let w_hh = p.mat(ids.w_hh);
    let mut gates = Array2::zeros((l, 4 * hidden));
    let mut c = Array2::<f64>::zeros((l + 1, hidden));
    let mut h = Array2::zeros((l + 1, hidden));
    for t in 0..l {
        let a = &pre_in.row(t) + &w_hh.dot(&h.row(t));
        for k in 0..hidden {
            let i = sigmoid(a[k]);
            let f = sigmoid(a[hidden + k]);
            let g = a[2 * hidden + k].tanh();
            let o = sigmoid(a[3 * hidden + k]);
            let ct = f * c[[t, k]] + i * g;
            c[[t + 1, k]] = ct;
            h[[t + 1, k]] = o * ct.tanh();
            gates[[t, k]] = i;
            gates[[t, hidden + k]] = f;
            gates[[t, 2 * hidden + k]] = g;
            gates[[t, 3 * hidden + k]] = o;
        }
    }
    LayerTrace { input, gates, c, h }
}

/// Backpropagation through time for one layer. `g_out` is `∂L/∂h_t` for `t = 1..L`.
fn layer_backward(p: &Params, ids: &LayerIds, tr: &LayerTrace, g_out: ArrayView2<f64>, g: &mut Params) -> Array2<f64> {
    let (l, four_h) = tr.gates.dim();
    let hidden = four_h / 4;
    let w_hh = p.mat(ids.w_hh);
    let mut g_pre = Array2::zeros((l, four_h));
    let mut dh_next = Array1::<f64>::zeros(hidden);
    let mut dc_next = Array1::<f64>::zeros(hidden);
    for t in (0..l).rev() {
        let gt = tr.gates.row(t);
        for k in 0..hidden {
            let (i, f, gg, o) = (gt[k], gt[hidden + k], gt[2 * hidden + k], gt[3 * hidden + k]);
            let tc = tr.c[[t + 1, k]].tanh();
            let dh = g_out[[t, k]] + dh_next[k];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            g_pre[[t, k]] = dc * gg * i * (1.0 - i);
            g_pre[[t, hidden + k]] = dc * tr.c[[t, k]] * f * (1.0 - f);
            g_pre[[t, 2 * hidden + k]] = dc * i * (1.0 - gg * gg);
            g_pre[[t, 3 * hidden + k]] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = w_hh.t().dot(&g_pre.row(t));
    }
    let h_prev = tr.h.slice(s![..l, ..]);
    {
        let mut gw = g.mat_mut(ids.w_hh);
        ndarray::linalg::general_mat_mul(1.0, &g_pre.t(), &h_prev, 1.0, &mut gw);
    }
    let (gw, gb) = g.linear_mut(ids.w_ih, ids.bias);
    linear_backward(tr.input.view(), p.mat(ids.w_ih), g_pre.view(), gw, gb)
}

impl Classifier for LstmNet {
    type Trace = LstmTrace;

    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.cfg.window, self.cfg.features)
    }

    fn dropout(&self) -> f64 {
        self.cfg.dropout
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Params {
        let ids = &self.ids;
        let mut p = Params::zeros(self.layout.clone());
        p.fill(ids.spec_re, 1.0);
        p.fill(ids.spec_im, 0.0);
        let bound = |fan_in: usize| (1.0 / fan_in as f64).sqrt();
        p.fill_uniform(ids.mix_w1, bound(self.cfg.features), rng);
        p.fill_uniform(ids.mix_w2, bound(self.cfg.bottleneck()), rng);
        let bh = bound(self.cfg.hidden_size);
        for layer in &ids.layers {
            p.fill_uniform(layer.w_ih, bh, rng);
            p.fill_uniform(layer.w_hh, bh, rng);
            p.fill_uniform(layer.bias, bh, rng);
        }
        p.fill_uniform(ids.head_w, bh, rng);
        p.fill_uniform(ids.head_b, bh, rng);
        p
    }

    fn forward_sample(&self, params: &Params, x: ArrayView2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Result<LstmTrace> {
        if x.dim() != (self.cfg.window, self.cfg.features) {
            return Err(Error::shape(format!(
                "expected a {}×{} window, got {:?}",
                self.cfg.window,
                self.cfg.features,
                x.dim()
            )));
        }
        let ids = &self.ids;
        let hidden = self.cfg.hidden_size;
        let use_dropout = rng.is_some() && self.cfg.dropout > 0.0;
        let (x_spectral, spec) = self.spectral.forward(x, params.slice(ids.spec_re), params.slice(ids.spec_im))?;
        let (x_mixed, mix_cache) = mix(x_spectral.view(), params.mat(ids.mix_w1), params.mat(ids.mix_w2))?;

        let mut layers = Vec::with_capacity(ids.layers.len());
        let mut masks = Vec::with_capacity(ids.layers.len());
        let mut input = x_mixed.clone();
        for (li, layer) in ids.layers.iter().enumerate() {
            let tr = layer_forward(params, layer, input, hidden);
            let mut out = tr.h.slice(s![1.., ..]).to_owned();
            let mask = if use_dropout && li + 1 < ids.layers.len() {
                let m = dropout_mask(out.dim(), self.cfg.dropout, rng.as_deref_mut().expect("dropout rng"));
                out *= &m;
                Some(m)
            } else {
                None
            };
            layers.push(tr);
            masks.push(mask);
            input = out;
        }
        let last = input.row(input.nrows() - 1).to_owned();
        let out = linear(last.view().insert_axis(Axis(0)), params.mat(ids.head_w), params.vec(ids.head_b));
        let logits = [out[[0, 0]], out[[0, 1]], out[[0, 2]]];
        let pr = softmax(&logits);
        Ok(LstmTrace {
            spec,
            x_spectral,
            mix: mix_cache,
            x_mixed,
            layers,
            masks,
            logits,
            probabilities: [pr[0], pr[1], pr[2]],
        })
    }

    fn logits(trace: &LstmTrace) -> [f64; NUM_CLASSES] {
        trace.logits
    }

    fn backward_sample(&self, params: &Params, t: &LstmTrace, grad_logits: [f64; NUM_CLASSES], g: &mut Params) {
        let ids = &self.ids;
        let (l, hidden) = (self.cfg.window, self.cfg.hidden_size);
        let gl = Array2::from_shape_vec((1, NUM_CLASSES), grad_logits.to_vec()).expect("3 logits");
        let last = t.final_hidden();
        let (gw, gb) = g.linear_mut(ids.head_w, ids.head_b);
        let g_last = linear_backward(last.view().insert_axis(Axis(0)), params.mat(ids.head_w), gl.view(), gw, gb);

        let mut g_out = Array2::zeros((l, hidden));
        g_out.row_mut(l - 1).assign(&g_last.row(0));
        for (li, layer) in ids.layers.iter().enumerate().rev() {
            if let Some(m) = &t.masks[li] {
                g_out *= m;
            }
            g_out = layer_backward(params, layer, &t.layers[li], g_out.view(), g);
        }

        let (r, f) = (self.cfg.bottleneck(), self.cfg.features);
        let (gw1, gw2) = g.pair_mut(ids.mix_w1, ids.mix_w2);
        let g_spectral = mix_backward(
            t.x_spectral.view(),
            &t.mix,
            params.mat(ids.mix_w1),
            params.mat(ids.mix_w2),
            g_out.view(),
            ArrayViewMut2::from_shape((r, f), gw1).expect("W1 shape"),
            ArrayViewMut2::from_shape((f, r), gw2).expect("W2 shape"),
        );
        let (g_re, g_im) = g.pair_mut(ids.spec_re, ids.spec_im);
        self.spectral.backward(
            &t.spec,
            params.slice(ids.spec_re),
            params.slice(ids.spec_im),
            g_spectral.view(),
            g_re,
            g_im,
        );
    }
}
