//! Post-norm Transformer encoder block.
//!
//! `x → MHA → dropout → +x → LayerNorm → FFN(ReLU, dropout on the inner
//! activation) → + → LayerNorm`.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::ops::{
    dropout_mask, layer_norm, layer_norm_backward, linear, linear_backward, softmax_rows, softmax_rows_backward,
    LayerNormCache,
};
use super::params::{Layout, ParamId, Params};

#[derive(Debug, Clone)]
pub struct BlockIds {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub ff_w1: ParamId,
    pub ff_b1: ParamId,
    pub ff_w2: ParamId,
    pub ff_b2: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
}

impl BlockIds {
    pub fn register(layout: &mut Layout, prefix: &str, d_model: usize, d_ff: usize) -> Self {
        let mut add = |name: &str, shape: &[usize]| layout.add(format!("{prefix}.{name}"), shape);
        BlockIds {
            wq: add("attn.wq", &[d_model, d_model]),
            bq: add("attn.bq", &[d_model]),
            wk: add("attn.wk", &[d_model, d_model]),
            bk: add("attn.bk", &[d_model]),
            wv: add("attn.wv", &[d_model, d_model]),
            bv: add("attn.bv", &[d_model]),
            wo: add("attn.wo", &[d_model, d_model]),
            bo: add("attn.bo", &[d_model]),
            ln1_gain: add("ln1.gain", &[d_model]),
            ln1_bias: add("ln1.bias", &[d_model]),
            ff_w1: add("ff.w1", &[d_ff, d_model]),
            ff_b1: add("ff.b1", &[d_ff]),
            ff_w2: add("ff.w2", &[d_model, d_ff]),
            ff_b2: add("ff.b2", &[d_model]),
            ln2_gain: add("ln2.gain", &[d_model]),
            ln2_bias: add("ln2.bias", &[d_model]),
        }
    }

    pub fn init<R: Rng>(&self, p: &mut Params, d_model: usize, d_ff: usize, rng: &mut R) {
        let bd = (1.0 / d_model as f64).sqrt();
        let bf = (1.0 / d_ff as f64).sqrt();
        for id in [
            self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo, self.ff_w1, self.ff_b1,
        ] {
            p.fill_uniform(id, bd, rng);
        }
        p.fill_uniform(self.ff_w2, bf, rng);
        p.fill_uniform(self.ff_b2, bf, rng);
        p.fill(self.ln1_gain, 1.0);
        p.fill(self.ln1_bias, 0.0);
        p.fill(self.ln2_gain, 1.0);
        p.fill(self.ln2_bias, 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    pub input: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Attention probabilities per head, `L×L`.
    pub probs: Vec<Array2<f64>>,
    pub concat: Array2<f64>,
    pub attn_mask: Option<Array2<f64>>,
    pub ln1: LayerNormCache,
    pub z1: Array2<f64>,
    pub pre_act: Array2<f64>,
    pub act: Array2<f64>,
    pub ff_mask: Option<Array2<f64>>,
    pub ln2: LayerNormCache,
}

/// Dropout probability plus the generator drawing masks.
pub struct Dropout<'a, R: Rng> {
    pub p: f64,
    pub rng: &'a mut R,
}

/// Multi-head scaled dot-product attention over one sample (`L×d` each),
/// returning the concatenated head outputs and per-head probabilities.
pub fn attention(q: ArrayView2<f64>, k: ArrayView2<f64>, v: ArrayView2<f64>, n_heads: usize) -> (Array2<f64>, Vec<Array2<f64>>) {
    let (l, d) = q.dim();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut concat = Array2::zeros((l, d));
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut a = q.slice(cols).dot(&k.slice(cols).t());
        a *= scale;
        softmax_rows(&mut a);
        concat.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        probs.push(a);
    }
    (concat, probs)
}

pub fn block_forward<R: Rng>(
    p: &Params,
    ids: &BlockIds,
    x: ArrayView2<f64>,
    n_heads: usize,
    mut dropout: Option<Dropout<'_, R>>,
) -> (Array2<f64>, BlockCache) {
    let q = linear(x, p.mat(ids.wq), p.vec(ids.bq));
    let k = linear(x, p.mat(ids.wk), p.vec(ids.bk));
    let v = linear(x, p.mat(ids.wv), p.vec(ids.bv));
    let (concat, probs) = attention(q.view(), k.view(), v.view(), n_heads);
    let mut attn = linear(concat.view(), p.mat(ids.wo), p.vec(ids.bo));
    let attn_mask = dropout.as_mut().map(|d| dropout_mask(attn.dim(), d.p, d.rng));
    if let Some(m) = &attn_mask {
        attn *= m;
    }
    let r1 = &x + &attn;
    let (z1, ln1) = layer_norm(r1.view(), p.vec(ids.ln1_gain), p.vec(ids.ln1_bias));

    let pre_act = linear(z1.view(), p.mat(ids.ff_w1), p.vec(ids.ff_b1));
    let mut act = pre_act.mapv(|u| u.max(0.0));
    let ff_mask = dropout.as_mut().map(|d| dropout_mask(act.dim(), d.p, d.rng));
    if let Some(m) = &ff_mask {
        act *= m;
    }
    let ff = linear(act.view(), p.mat(ids.ff_w2), p.vec(ids.ff_b2));
    let r2 = &z1 + &ff;
    let (out, ln2) = layer_norm(r2.view(), p.vec(ids.ln2_gain), p.vec(ids.ln2_bias));
    let cache = BlockCache {
        input: x.to_owned(),
        q,
        k,
        v,
        probs,
        concat,
        attn_mask,
        ln1,
        z1,
        pre_act,
        act,
        ff_mask,
        ln2,
    };
    (out, cache)
}

/// Returns `∂L/∂x` and accumulates every block-parameter gradient into `g`.
pub fn block_backward(p: &Params, ids: &BlockIds, c: &BlockCache, gy: ArrayView2<f64>, n_heads: usize, g: &mut Params) -> Array2<f64> {
    // second sublayer
    let (gg, gb) = g.pair_mut(ids.ln2_gain, ids.ln2_bias);
    let g_r2 = layer_norm_backward(&c.ln2, p.vec(ids.ln2_gain), gy, gg.into(), gb.into());
    let (gw, gbias) = g.linear_mut(ids.ff_w2, ids.ff_b2);
    let mut g_act = linear_backward(c.act.view(), p.mat(ids.ff_w2), g_r2.view(), gw, gbias);
    if let Some(m) = &c.ff_mask {
        g_act *= m;
    }
    ndarray::Zip::from(&mut g_act)
        .and(&c.pre_act)
        .for_each(|ga, &u| if u <= 0.0 { *ga = 0.0 });
    let (gw, gbias) = g.linear_mut(ids.ff_w1, ids.ff_b1);
    let mut g_z1 = linear_backward(c.z1.view(), p.mat(ids.ff_w1), g_act.view(), gw, gbias);
    g_z1 += &g_r2;

    // first sublayer
    let (gg, gb) = g.pair_mut(ids.ln1_gain, ids.ln1_bias);
    let g_r1 = layer_norm_backward(&c.ln1, p.vec(ids.ln1_gain), g_z1.view(), gg.into(), gb.into());
    let mut g_attn = g_r1.clone();
    if let Some(m) = &c.attn_mask {
        g_attn *= m;
    }
    let (gw, gbias) = g.linear_mut(ids.wo, ids.bo);
    let g_concat = linear_backward(c.concat.view(), p.mat(ids.wo), g_attn.view(), gw, gbias);

    let (l, d) = c.q.dim();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut gq = Array2::zeros((l, d));
    let mut gk = Array2::zeros((l, d));
    let mut gv = Array2::zeros((l, d));
    for (h, a) in c.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let g_out = g_concat.slice(cols);
        let g_a = g_out.dot(&c.v.slice(cols).t());
        gv.slice_mut(cols).assign(&a.t().dot(&g_out));
        let mut g_s = softmax_rows_backward(a.view(), g_a.view());
        g_s *= scale;
        gq.slice_mut(cols).assign(&g_s.dot(&c.k.slice(cols)));
        gk.slice_mut(cols).assign(&g_s.t().dot(&c.q.slice(cols)));
    }
    let x = c.input.view();
    let mut gx = g_r1;
    for (gsub, w, b) in [(&gq, ids.wq, ids.bq), (&gk, ids.wk, ids.bk), (&gv, ids.wv, ids.bv)] {
        let (gw, gbias) = g.linear_mut(w, b);
        gx += &linear_backward(x, p.mat(w), gsub.view(), gw, gbias);
    }
    gx
}
