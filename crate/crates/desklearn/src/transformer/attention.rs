//! Scaled dot-product attention, multi-head attention, sinusoidal positional
//! encoding, and the position-wise feed-forward network.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{linear_forward, Init};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::Mask;

/// Attention weights `softmax(Q K^T / sqrt(d_k))` with optional masking;
/// masked positions get a -1e9 penalty before the softmax and exactly zero
/// weight after it. A fully masked query row is an error naming the row.
pub fn attention_weights(q: &Var, k: &Var, mask: Option<&Mask>) -> Result<Var> {
    let (qs, ks) = (q.shape(), k.shape());
    if qs.len() != 2 || ks.len() != 2 || qs[1] != ks[1] {
        return Err(Error::ShapeMismatch { context: "attention q/k", lhs: qs, rhs: ks });
    }
    let (n, m, d_k) = (qs[0], ks[0], qs[1]);
    let scores = q.matmul(&k.transpose()?)?.mul_scalar(1.0 / (d_k as f64).sqrt());
    match mask {
        Some(mask) => {
            if mask.rows() != n || mask.cols() != m {
                return Err(Error::invalid_argument(format!(
                    "mask is {}x{}, scores are {n}x{m}",
                    mask.rows(),
                    mask.cols()
                )));
            }
            scores.tape().masked_softmax(&scores, mask.as_flat())
        }
        None => scores.softmax(1),
    }
}

/// `softmax(Q K^T / sqrt(d_k)) V` for a block of queries.
pub fn scaled_dot_product_attention(
    q: &Var,
    k: &Var,
    v: &Var,
    mask: Option<&Mask>,
) -> Result<Var> {
    if v.shape().len() != 2 || v.shape()[0] != k.shape()[0] {
        return Err(Error::ShapeMismatch {
            context: "attention k/v",
            lhs: k.shape(),
            rhs: v.shape(),
        });
    }
    attention_weights(q, k, mask)?.matmul(v)
}

/// Model dimensions shared by attention stacks: `n_heads` must divide
/// `d_model`; per-head width is `d_k = d_v = d_model / n_heads`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
}

impl AttentionConfig {
    pub fn new(d_model: usize, n_heads: usize, d_ff: usize) -> Result<Self> {
        if n_heads == 0 || !d_model.is_multiple_of(n_heads) {
            return Err(Error::invalid_argument(format!(
                "n_heads {n_heads} must divide d_model {d_model}"
            )));
        }
        Ok(Self { d_model, n_heads, d_ff })
    }

    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn d_v(&self) -> usize {
        self.d_k()
    }
}

/// Per-head projections, per-head attention, concatenation, and the output
/// projection. All four weight matrices are `[d_model x d_model]`, holding
/// the per-head blocks side by side.
pub struct MultiHeadAttention {
    pub cfg: AttentionConfig,
    pub w_q: Param,
    pub w_k: Param,
    pub w_v: Param,
    pub w_o: Param,
}

impl MultiHeadAttention {
    pub fn new(cfg: AttentionConfig, rng: &mut SplitRng) -> Self {
        let d = cfg.d_model;
        let mk = |name: &str, rng: &mut SplitRng| {
            Param::new(name, Init::Xavier.tensor(&[d, d], d, d, rng))
        };
        Self {
            cfg,
            w_q: mk("attn.w_q", rng),
            w_k: mk("attn.w_k", rng),
            w_v: mk("attn.w_v", rng),
            w_o: mk("attn.w_o", rng),
        }
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.w_q.clone(), self.w_k.clone(), self.w_v.clone(), self.w_o.clone()]
    }

    /// Attention over separate query/key/value inputs (`[n x d_model]`,
    /// `[m x d_model]`, `[m x d_model]`).
    pub fn forward(
        &self,
        tape: &Tape,
        q_in: &Var,
        k_in: &Var,
        v_in: &Var,
        mask: Option<&Mask>,
    ) -> Result<Var> {
        let w_q = tape.param(&self.w_q);
        let w_k = tape.param(&self.w_k);
        let w_v = tape.param(&self.w_v);
        let w_o = tape.param(&self.w_o);
        multi_head_attention(self.cfg, q_in, k_in, v_in, &w_q, &w_k, &w_v, &w_o, mask)
    }

    /// Self-attention: queries, keys, and values all from `x`.
    pub fn self_forward(&self, tape: &Tape, x: &Var, mask: Option<&Mask>) -> Result<Var> {
        self.forward(tape, x, x, x, mask)
    }
}

/// Multi-head attention from explicit weight vars:
/// `Concat(head_1, ..., head_h) W^O` where
/// `head_i = Attention(Q W_i^Q, K W_i^K, V W_i^V)`.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    cfg: AttentionConfig,
    q_in: &Var,
    k_in: &Var,
    v_in: &Var,
    w_q: &Var,
    w_k: &Var,
    w_v: &Var,
    w_o: &Var,
    mask: Option<&Mask>,
) -> Result<Var> {
    for (v, name) in [(q_in, "q"), (k_in, "k"), (v_in, "v")] {
        let s = v.shape();
        if s.len() != 2 || s[1] != cfg.d_model {
            return Err(Error::invalid_argument(format!(
                "{name} input must be [len x {}], got {s:?}",
                cfg.d_model
            )));
        }
    }
    let q = q_in.matmul(&w_q.transpose()?)?;
    let k = k_in.matmul(&w_k.transpose()?)?;
    let v = v_in.matmul(&w_v.transpose()?)?;
    let d_k = cfg.d_k();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let qh = q.narrow(1, h * d_k, d_k)?;
        let kh = k.narrow(1, h * d_k, d_k)?;
        let vh = v.narrow(1, h * d_k, d_k)?;
        heads.push(scaled_dot_product_attention(&qh, &kh, &vh, mask)?);
    }
    let concat = q.tape().concat(&heads, 1)?;
    concat.matmul(&w_o.transpose()?)
}

/// Sinusoidal positional encoding for one position:
/// `PE(pos, 2i) = sin(pos / 10000^(2i/d_model))`, odd dimensions cosine.
pub fn sinusoidal_pe(pos: usize, d_model: usize) -> Result<Tensor> {
    if d_model == 0 || !d_model.is_multiple_of(2) {
        return Err(Error::invalid_argument(format!(
            "d_model must be positive and even, got {d_model}"
        )));
    }
    let mut data = vec![0.0; d_model];
    for i in 0..d_model / 2 {
        let rate = (pos as f64) / 10000f64.powf(2.0 * i as f64 / d_model as f64);
        data[2 * i] = rate.sin();
        data[2 * i + 1] = rate.cos();
    }
    Tensor::new(&[d_model], data)
}

/// Positional encodings for positions `0..n`, stacked as rows.
pub fn sinusoidal_pe_table(n: usize, d_model: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(n * d_model);
    for pos in 0..n {
        data.extend(sinusoidal_pe(pos, d_model)?.into_data());
    }
    Tensor::new(&[n, d_model], data)
}

/// Position-wise feed-forward network `W2 max(0, W1 x + b1) + b2`, applied
/// independently to each row.
pub fn ffn(x: &Var, w1: &Var, b1: &Var, w2: &Var, b2: &Var) -> Result<Var> {
    linear_forward(w2, b2, &linear_forward(w1, b1, x)?.relu())
}

/// FFN with owned parameters chaining `d_model -> d_ff -> d_model`.
pub struct FeedForward {
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
}

impl FeedForward {
    pub fn new(d_model: usize, d_ff: usize, rng: &mut SplitRng) -> Self {
        Self {
            w1: Param::new("ffn.w1", Init::He.tensor(&[d_ff, d_model], d_model, d_ff, rng)),
            b1: Param::new("ffn.b1", Tensor::zeros(&[d_ff])),
            w2: Param::new("ffn.w2", Init::Xavier.tensor(&[d_model, d_ff], d_ff, d_model, rng)),
            b2: Param::new("ffn.b2", Tensor::zeros(&[d_model])),
        }
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.w1.clone(), self.b1.clone(), self.w2.clone(), self.b2.clone()]
    }

    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        ffn(
            x,
            &tape.param(&self.w1),
            &tape.param(&self.b1),
            &tape.param(&self.w2),
            &tape.param(&self.b2),
        )
    }
}
