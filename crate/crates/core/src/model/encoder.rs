use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::params::{BlockParams, ParamStore};
use super::ModelConfig;
use crate::{Error, Result};

/// Fixed sinusoidal position codes, `T x d`, scaled by `1/sqrt(d)` to match
/// the embedding initialization range.
pub fn positional_encoding(len: usize, dim: usize) -> Array2<f64> {
    let scale = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_fn((len, dim), |(t, j)| {
        let freq = 10000f64.powf((2 * (j / 2)) as f64 / dim as f64);
        let angle = t as f64 / freq;
        scale * if j % 2 == 0 { angle.sin() } else { angle.cos() }
    })
}

struct BlockCache {
    /// Input plus position codes, the source of queries and keys.
    positioned: Array2<f64>,
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    context: Array2<f64>,
    mid: Array2<f64>,
    hidden: Array2<f64>,
}

/// Activations of one forward pass, kept for the backward pass.
pub struct Forward {
    ids: Vec<usize>,
    blocks: Vec<BlockCache>,
    pub rep: Array1<f64>,
    proj_hidden: Array1<f64>,
    out_norm: f64,
    pub key: Array1<f64>,
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn block_forward(x: Array2<f64>, pos: &Array2<f64>, p: &BlockParams) -> (Array2<f64>, BlockCache) {
    let scale = 1.0 / (x.ncols() as f64).sqrt();
    let positioned = &x + pos;
    let q = positioned.dot(&p.wq);
    let k = positioned.dot(&p.wk);
    let v = x.dot(&p.wv);
    let mut attn = q.dot(&k.t()) * scale;
    softmax_rows(&mut attn);
    let context = attn.dot(&v);
    let mid = &x + &context.dot(&p.wo);
    let mut hidden = mid.dot(&p.w1) + &p.b1;
    hidden.mapv_inplace(f64::tanh);
    let out = &mid + &hidden.dot(&p.w2) + &p.b2;
    (
        out,
        BlockCache {
            positioned,
            input: x,
            q,
            k,
            v,
            attn,
            context,
            mid,
            hidden,
        },
    )
}

/// Run the encoder and projector over token ids.
pub fn forward(params: &ParamStore, cfg: &ModelConfig, ids: &[usize]) -> Result<Forward> {
    if ids.is_empty() {
        return Err(Error::invalid("empty token sequence"));
    }
    let vocab = params.vocab_size();
    if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
        return Err(Error::Shape(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    let d = params.d_embed();
    let mut x = Array2::zeros((ids.len(), d));
    for (t, &id) in ids.iter().enumerate() {
        x.row_mut(t).assign(&params.embedding.row(id));
    }
    let pos = if params.blocks.is_empty() {
        Array2::zeros((0, d))
    } else {
        positional_encoding(ids.len(), d)
    };
    let mut caches = Vec::with_capacity(params.blocks.len());
    for block in &params.blocks {
        let (out, cache) = block_forward(x, &pos, block);
        caches.push(cache);
        x = out;
    }
    let rep = x.mean_axis(Axis(0)).expect("non-empty sequence");
    let pj = &params.projector;
    let mut proj_hidden = rep.dot(&pj.w1) + &pj.b1;
    proj_hidden.mapv_inplace(f64::tanh);
    let proj_out = proj_hidden.dot(&pj.w2) + &pj.b2;
    let (key, out_norm) = if cfg.normalize {
        let norm = proj_out.dot(&proj_out).sqrt();
        if !(norm > 0.0) {
            return Err(Error::NonFinite(format!("projector output norm {norm}")));
        }
        (&proj_out / norm, norm)
    } else {
        (proj_out, 1.0)
    };
    if let Some(i) = key.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("key[{i}]")));
    }
    Ok(Forward {
        ids: ids.to_vec(),
        blocks: caches,
        rep,
        proj_hidden,
        out_norm,
        key,
    })
}

/// Accumulate `d loss / d params` into `grads` given `d loss / d key`.
pub fn backward(params: &ParamStore, cfg: &ModelConfig, fwd: &Forward, d_key: ArrayView1<f64>, grads: &mut ParamStore) {
    let d_out = if cfg.normalize {
        (&d_key - &(&fwd.key * fwd.key.dot(&d_key))) / fwd.out_norm
    } else {
        d_key.to_owned()
    };
    let pj = &params.projector;
    let gp = &mut grads.projector;
    outer_add(&mut gp.w2, fwd.proj_hidden.view(), d_out.view());
    gp.b2 += &d_out;
    let d_hidden = pj.w2.dot(&d_out) * fwd.proj_hidden.mapv(|z| 1.0 - z * z);
    outer_add(&mut gp.w1, fwd.rep.view(), d_hidden.view());
    gp.b1 += &d_hidden;
    let d_rep = pj.w1.dot(&d_hidden);

    let len = fwd.ids.len();
    let mut dx = Array2::zeros((len, params.d_embed()));
    for mut row in dx.rows_mut() {
        row.assign(&(&d_rep / len as f64));
    }
    for (b, cache) in fwd.blocks.iter().enumerate().rev() {
        dx = block_backward(&params.blocks[b], cache, dx, &mut grads.blocks[b]);
    }
    for (t, &id) in fwd.ids.iter().enumerate() {
        let mut row = grads.embedding.row_mut(id);
        row += &dx.row(t);
    }
}

fn outer_add(target: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            target.row_mut(i).scaled_add(ai, &b);
        }
    }
}

fn block_backward(p: &BlockParams, c: &BlockCache, d_out: Array2<f64>, g: &mut BlockParams) -> Array2<f64> {
    let scale = 1.0 / (c.input.ncols() as f64).sqrt();
    // Feed-forward residual.
    g.w2 += &c.hidden.t().dot(&d_out);
    g.b2 += &d_out.sum_axis(Axis(0));
    let d_pre = d_out.dot(&p.w2.t()) * c.hidden.mapv(|h| 1.0 - h * h);
    g.w1 += &c.mid.t().dot(&d_pre);
    g.b1 += &d_pre.sum_axis(Axis(0));
    let d_mid = &d_out + &d_pre.dot(&p.w1.t());
    // Attention residual.
    g.wo += &c.context.t().dot(&d_mid);
    let d_context = d_mid.dot(&p.wo.t());
    let d_attn = d_context.dot(&c.v.t());
    let d_v = c.attn.t().dot(&d_context);
    let row_dot = (&d_attn * &c.attn).sum_axis(Axis(1)).insert_axis(Axis(1));
    let d_scores = (&d_attn - &row_dot) * &c.attn * scale;
    let d_q = d_scores.dot(&c.k);
    let d_k = d_scores.t().dot(&c.q);
    g.wq += &c.positioned.t().dot(&d_q);
    g.wk += &c.positioned.t().dot(&d_k);
    g.wv += &c.input.t().dot(&d_v);
    d_mid + d_q.dot(&p.wq.t()) + d_k.dot(&p.wk.t()) + d_v.dot(&p.wv.t())
}
