//! Spectral filter → channel mixing → Transformer encoder → pooled MLP head.

use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, ArrayViewMut2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{block_backward, block_forward, BlockCache, BlockIds, Dropout};
use super::mixing::{bottleneck_width, mix, mix_backward, MixCache};
use super::ops::{dropout_mask, gelu, gelu_grad, linear, linear_backward, positional_encoding, softmax};
use super::params::{Layout, ParamId, Params};
use super::spectral::{SpectralCache, SpectralMode, SpectralTransform};
use super::{Classifier, ModelKind, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::par::Exec;

fn default_reduction() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub window: usize,
    pub features: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    #[serde(default = "default_reduction")]
    pub reduction: usize,
    #[serde(default)]
    pub spectral_mode: SpectralMode,
    /// Head hidden width; `d_model / 2` when absent.
    #[serde(default)]
    pub head_hidden: Option<usize>,
}

impl ModelConfig {
    /// Best 30-day configuration: d_model 64, 2 heads, 2 layers, d_ff 256, dropout 0.2.
    pub fn best_30_day() -> Self {
        Self {
            window: 30,
            features: 14,
            d_model: 64,
            n_heads: 2,
            n_layers: 2,
            d_ff: 256,
            dropout: 0.2,
            reduction: 4,
            spectral_mode: SpectralMode::PerBin,
            head_hidden: None,
        }
    }

    /// Best 60-day configuration: as the 30-day one with 4 heads.
    pub fn best_60_day() -> Self {
        Self {
            window: 60,
            n_heads: 4,
            ..Self::best_30_day()
        }
    }

    /// Small configuration for gradient checks and fast tests.
    pub fn tiny() -> Self {
        Self {
            window: 8,
            features: 3,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            dropout: 0.0,
            reduction: 4,
            spectral_mode: SpectralMode::PerBin,
            head_hidden: None,
        }
    }

    pub fn head_width(&self) -> usize {
        self.head_hidden.unwrap_or((self.d_model / 2).max(1))
    }

    pub fn bottleneck(&self) -> usize {
        bottleneck_width(self.features, self.reduction)
    }

    /// All violated constraints, in one message.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.window < 2 {
            problems.push(format!("window must be at least 2, got {}", self.window));
        }
        if self.features == 0 {
            problems.push("features must be at least 1".to_string());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            problems.push(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.d_model == 0 || self.d_ff == 0 {
            problems.push("d_model and d_ff must be positive".to_string());
        }
        if self.reduction == 0 {
            problems.push("reduction must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.head_width() == 0 {
            problems.push("head_hidden must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    /// Scalar parameter count implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let (f, d, ff, h, r) = (self.features, self.d_model, self.d_ff, self.head_width(), self.bottleneck());
        let spectral = 2 * f * self.spectral_mode.weights_per_feature(self.window);
        let mixing = 2 * r * f;
        let proj = f * d + d;
        let block = 4 * (d * d + d) + 4 * d + (ff * d + ff) + (d * ff + d);
        let head = (d * h + h) + (h * NUM_CLASSES + NUM_CLASSES);
        spectral + mixing + proj + self.n_layers * block + head
    }
}

#[derive(Debug, Clone)]
struct Ids {
    spec_re: ParamId,
    spec_im: ParamId,
    mix_w1: ParamId,
    mix_w2: ParamId,
    proj_w: ParamId,
    proj_b: ParamId,
    blocks: Vec<BlockIds>,
    head_w1: ParamId,
    head_b1: ParamId,
    head_w2: ParamId,
    head_b2: ParamId,
}

#[derive(Debug, Clone)]
pub struct MineRoiNet {
    cfg: ModelConfig,
    layout: Arc<Layout>,
    ids: Ids,
    spectral: SpectralTransform,
    pe: Array2<f64>,
}

/// Everything one sample's forward pass keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    spec: SpectralCache,
    pub x_spectral: Array2<f64>,
    mix: MixCache,
    pub x_mixed: Array2<f64>,
    /// `FC(X_mixed) + PE`, before dropout.
    pub z0: Array2<f64>,
    pe_mask: Option<Array2<f64>>,
    blocks: Vec<BlockCache>,
    pub encoded: Array2<f64>,
    pooled: Array1<f64>,
    head_pre: Array1<f64>,
    head_act: Array1<f64>,
    head_mask: Option<Array1<f64>>,
    pub logits: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
}

impl SampleTrace {
    pub fn z(&self) -> &Array1<f64> {
        &self.mix.z
    }

    pub fn s(&self) -> &Array1<f64> {
        &self.mix.s
    }
}

/// Batched view over per-sample traces.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub samples: Vec<SampleTrace>,
}

impl ForwardTrace {
    fn stack3(&self, f: impl Fn(&SampleTrace) -> &Array2<f64>) -> Array3<f64> {
        let views: Vec<_> = self.samples.iter().map(|s| f(s).view()).collect();
        ndarray::stack(Axis(0), &views).expect("uniform sample shapes")
    }

    fn stack2(&self, f: impl Fn(&SampleTrace) -> Vec<f64>) -> Array2<f64> {
        let rows: Vec<Vec<f64>> = self.samples.iter().map(f).collect();
        let w = rows.first().map_or(0, |r| r.len());
        Array2::from_shape_vec((rows.len(), w), rows.concat()).expect("uniform widths")
    }

    pub fn batch_size(&self) -> usize {
        self.samples.len()
    }

    pub fn x_spectral(&self) -> Array3<f64> {
        self.stack3(|s| &s.x_spectral)
    }

    pub fn z(&self) -> Array2<f64> {
        self.stack2(|s| s.mix.z.to_vec())
    }

    pub fn s(&self) -> Array2<f64> {
        self.stack2(|s| s.mix.s.to_vec())
    }

    pub fn x_mixed(&self) -> Array3<f64> {
        self.stack3(|s| &s.x_mixed)
    }

    pub fn z0(&self) -> Array3<f64> {
        self.stack3(|s| &s.z0)
    }

    pub fn encoded(&self) -> Array3<f64> {
        self.stack3(|s| &s.encoded)
    }

    pub fn logits(&self) -> Array2<f64> {
        self.stack2(|s| s.logits.to_vec())
    }

    pub fn probabilities(&self) -> Array2<f64> {
        self.stack2(|s| s.probabilities.to_vec())
    }
}

impl MineRoiNet {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let (f, d, r, h) = (cfg.features, cfg.d_model, cfg.bottleneck(), cfg.head_width());
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
        let proj_w = layout.add("proj.w", &[d, f]);
        let proj_b = layout.add("proj.b", &[d]);
        let blocks = (0..cfg.n_layers)
            .map(|i| BlockIds::register(&mut layout, &format!("blocks.{i}"), d, cfg.d_ff))
            .collect();
        let head_w1 = layout.add("head.w1", &[h, d]);
        let head_b1 = layout.add("head.b1", &[h]);
        let head_w2 = layout.add("head.w2", &[NUM_CLASSES, h]);
        let head_b2 = layout.add("head.b2", &[NUM_CLASSES]);
        debug_assert_eq!(layout.size(), cfg.parameter_count());
        Ok(Self {
            spectral: SpectralTransform::new(cfg.window, cfg.spectral_mode),
            pe: positional_encoding(cfg.window, d),
            layout: Arc::new(layout),
            ids: Ids {
                spec_re,
                spec_im,
                mix_w1,
                mix_w2,
                proj_w,
                proj_b,
                blocks,
                head_w1,
                head_b1,
                head_w2,
                head_b2,
            },
            cfg,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn spectral_ids(&self) -> (ParamId, ParamId) {
        (self.ids.spec_re, self.ids.spec_im)
    }

    pub fn mixing_ids(&self) -> (ParamId, ParamId) {
        (self.ids.mix_w1, self.ids.mix_w2)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.dim() != (self.cfg.window, self.cfg.features) {
            return Err(Error::shape(format!(
                "expected a {}×{} window, got {:?}",
                self.cfg.window,
                self.cfg.features,
                x.dim()
            )));
        }
        Ok(())
    }

    /// Encoder stack over one `L×F` mixed sample: projection, positional
    /// encoding and every block (no dropout).
    pub fn encode(&self, params: &Params, x_mixed: ArrayView2<f64>) -> Array2<f64> {
        let mut z = linear(x_mixed, params.mat(self.ids.proj_w), params.vec(self.ids.proj_b));
        z += &self.pe;
        for ids in &self.ids.blocks {
            z = block_forward::<ChaCha8Rng>(params, ids, z.view(), self.cfg.n_heads, None).0;
        }
        z
    }

    /// Batched forward pass.
    pub fn forward(&self, params: &Params, x: ArrayView3<f64>, exec: Exec) -> Result<ForwardTrace> {
        let samples: Vec<ArrayView2<f64>> = x.axis_iter(Axis(0)).collect();
        let samples = exec.try_map(&samples, |s| self.forward_sample(params, *s, None))?;
        Ok(ForwardTrace { samples })
    }

    /// Batched backward pass; `grad_logits` is `B×3`. Returns summed parameter gradients.
    pub fn backward(&self, params: &Params, trace: &ForwardTrace, grad_logits: ArrayView2<f64>) -> Result<Params> {
        if grad_logits.dim() != (trace.batch_size(), NUM_CLASSES) {
            return Err(Error::shape(format!(
                "gradient of shape {:?} does not match a trace of {} samples",
                grad_logits.dim(),
                trace.batch_size()
            )));
        }
        let mut grads = Params::zeros(self.layout.clone());
        for (s, g) in trace.samples.iter().zip(grad_logits.rows()) {
            self.backward_sample(params, s, [g[0], g[1], g[2]], &mut grads);
        }
        Ok(grads)
    }
}

/// Encoder over a `B×L×F` batch of mixed features (evaluation mode).
pub fn encoder_forward(model: &MineRoiNet, params: &Params, x_mixed: ArrayView3<f64>) -> Result<Array3<f64>> {
    let (_, l, f) = x_mixed.dim();
    if (l, f) != (model.cfg.window, model.cfg.features) {
        return Err(Error::shape(format!("expected B×{}×{}, got {:?}", model.cfg.window, model.cfg.features, x_mixed.dim())));
    }
    let outs: Vec<Array2<f64>> = x_mixed.axis_iter(Axis(0)).map(|s| model.encode(params, s)).collect();
    let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
    ndarray::stack(Axis(0), &views).map_err(|e| Error::shape(e.to_string()))
}

impl Classifier for MineRoiNet {
    type Trace = SampleTrace;

    fn kind(&self) -> ModelKind {
        ModelKind::MineRoi
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
        let (f, d, r, h) = (self.cfg.features, self.cfg.d_model, self.cfg.bottleneck(), self.cfg.head_width());
        let bound = |fan_in: usize| (1.0 / fan_in as f64).sqrt();
        p.fill_uniform(ids.mix_w1, bound(f), rng);
        p.fill_uniform(ids.mix_w2, bound(r), rng);
        p.fill_uniform(ids.proj_w, bound(f), rng);
        p.fill_uniform(ids.proj_b, bound(f), rng);
        for b in &ids.blocks {
            b.init(&mut p, d, self.cfg.d_ff, rng);
        }
        p.fill_uniform(ids.head_w1, bound(d), rng);
        p.fill_uniform(ids.head_b1, bound(d), rng);
        p.fill_uniform(ids.head_w2, bound(h), rng);
        p.fill_uniform(ids.head_b2, bound(h), rng);
        p
    }

    fn forward_sample(&self, params: &Params, x: ArrayView2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Result<SampleTrace> {
        self.check_input(&x)?;
        let ids = &self.ids;
        let p_drop = self.cfg.dropout;
        let use_dropout = rng.is_some() && p_drop > 0.0;

        let (x_spectral, spec) = self.spectral.forward(x, params.slice(ids.spec_re), params.slice(ids.spec_im))?;
        let (x_mixed, mix_cache) = mix(x_spectral.view(), params.mat(ids.mix_w1), params.mat(ids.mix_w2))?;

        let mut z0 = linear(x_mixed.view(), params.mat(ids.proj_w), params.vec(ids.proj_b));
        z0 += &self.pe;
        let mut z = z0.clone();
        let mut pe_mask = None;
        if use_dropout {
            let m = dropout_mask(z.dim(), p_drop, rng.as_deref_mut().unwrap());
            z *= &m;
            pe_mask = Some(m);
        }

        let mut blocks = Vec::with_capacity(ids.blocks.len());
        for b in &ids.blocks {
            let drop = if use_dropout {
                rng.as_deref_mut().map(|r| Dropout { p: p_drop, rng: r })
            } else {
                None
            };
            let (out, cache) = block_forward(params, b, z.view(), self.cfg.n_heads, drop);
            blocks.push(cache);
            z = out;
        }

        let pooled = z.mean_axis(Axis(0)).expect("non-empty window");
        let pooled_row = pooled.view().insert_axis(Axis(0));
        let head_pre = linear(pooled_row, params.mat(ids.head_w1), params.vec(ids.head_b1)).remove_axis(Axis(0));
        let mut head_act = head_pre.mapv(gelu);
        let mut head_mask = None;
        if use_dropout {
            let m = dropout_mask((1, head_act.len()), p_drop, rng.unwrap()).remove_axis(Axis(0));
            head_act *= &m;
            head_mask = Some(m);
        }
        let out = linear(
            head_act.view().insert_axis(Axis(0)),
            params.mat(ids.head_w2),
            params.vec(ids.head_b2),
        );
        let logits = [out[[0, 0]], out[[0, 1]], out[[0, 2]]];
        let pr = softmax(&logits);
        Ok(SampleTrace {
            spec,
            x_spectral,
            mix: mix_cache,
            x_mixed,
            z0,
            pe_mask,
            blocks,
            encoded: z,
            pooled,
            head_pre,
            head_act,
            head_mask,
            logits,
            probabilities: [pr[0], pr[1], pr[2]],
        })
    }

    fn logits(trace: &SampleTrace) -> [f64; NUM_CLASSES] {
        trace.logits
    }

    fn backward_sample(&self, params: &Params, t: &SampleTrace, grad_logits: [f64; NUM_CLASSES], g: &mut Params) {
        let ids = &self.ids;
        let gl = Array2::from_shape_vec((1, NUM_CLASSES), grad_logits.to_vec()).expect("3 logits");

        let (gw, gb) = g.linear_mut(ids.head_w2, ids.head_b2);
        let mut g_act = linear_backward(
            t.head_act.view().insert_axis(Axis(0)),
            params.mat(ids.head_w2),
            gl.view(),
            gw,
            gb,
        )
        .remove_axis(Axis(0));
        if let Some(m) = &t.head_mask {
            g_act *= m;
        }
        let g_pre = &g_act * &t.head_pre.mapv(gelu_grad);
        let (gw, gb) = g.linear_mut(ids.head_w1, ids.head_b1);
        let g_pooled = linear_backward(
            t.pooled.view().insert_axis(Axis(0)),
            params.mat(ids.head_w1),
            g_pre.view().insert_axis(Axis(0)),
            gw,
            gb,
        )
        .remove_axis(Axis(0));

        let l = self.cfg.window as f64;
        let mut gz = Array2::from_shape_fn(t.encoded.raw_dim(), |(_, c)| g_pooled[c] / l);
        for (b, cache) in ids.blocks.iter().zip(&t.blocks).rev() {
            gz = block_backward(params, b, cache, gz.view(), self.cfg.n_heads, g);
        }
        if let Some(m) = &t.pe_mask {
            gz *= m;
        }
        let (gw, gb) = g.linear_mut(ids.proj_w, ids.proj_b);
        let g_mixed = linear_backward(t.x_mixed.view(), params.mat(ids.proj_w), gz.view(), gw, gb);

        let (r, f) = (self.cfg.bottleneck(), self.cfg.features);
        let (gw1, gw2) = g.pair_mut(ids.mix_w1, ids.mix_w2);
        let g_spectral = mix_backward(
            t.x_spectral.view(),
            &t.mix,
            params.mat(ids.mix_w1),
            params.mat(ids.mix_w2),
            g_mixed.view(),
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
