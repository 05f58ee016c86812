//! A decoder-only toy GPT: embeddings, pre-norm attention blocks with
//! residuals, and autoregressive generation.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::layer_norm;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{causal_mask, sinusoidal_pe_table, AttentionConfig, FeedForward, MultiHeadAttention};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positional {
    /// Fixed sinusoidal table (the default).
    Sinusoidal,
    /// A trainable `[max_len x d_model]` embedding.
    Learned,
}

#[derive(Debug, Clone, Copy)]
pub struct GptConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub max_len: usize,
    pub positional: Positional,
    /// Share the input embedding matrix with the output projection.
    pub tie_embeddings: bool,
}

impl GptConfig {
    pub fn small(vocab: usize) -> Self {
        Self {
            vocab,
            d_model: 64,
            n_heads: 4,
            d_ff: 128,
            n_layers: 2,
            max_len: 32,
            positional: Positional::Sinusoidal,
            tie_embeddings: false,
        }
    }
}

enum PosTable {
    Sinusoidal(Tensor),
    Learned(Param),
}

struct Block {
    ln1_gamma: Param,
    ln1_beta: Param,
    attn: MultiHeadAttention,
    ln2_gamma: Param,
    ln2_beta: Param,
    ffn: FeedForward,
}

impl Block {
    fn new(cfg: AttentionConfig, layer: usize, rng: &mut SplitRng) -> Self {
        let d = cfg.d_model;
        let named = |suffix: &str| format!("block{layer}.{suffix}");
        Self {
            ln1_gamma: Param::new(named("ln1.gamma"), Tensor::ones(&[d])),
            ln1_beta: Param::new(named("ln1.beta"), Tensor::zeros(&[d])),
            attn: MultiHeadAttention::new(cfg, rng),
            ln2_gamma: Param::new(named("ln2.gamma"), Tensor::ones(&[d])),
            ln2_beta: Param::new(named("ln2.beta"), Tensor::zeros(&[d])),
            ffn: FeedForward::new(d, cfg.d_ff, rng),
        }
    }

    /// Pre-norm residual block: `x + Attn(LN(x))`, then `x + FFN(LN(x))`.
    fn forward(&self, tape: &Tape, x: &Var, mask: &super::Mask) -> Result<Var> {
        let eps = 1e-5;
        let normed = layer_norm(x, &tape.param(&self.ln1_gamma), &tape.param(&self.ln1_beta), eps)?;
        let x = x.add(&self.attn.self_forward(tape, &normed, Some(mask))?)?;
        let normed = layer_norm(&x, &tape.param(&self.ln2_gamma), &tape.param(&self.ln2_beta), eps)?;
        x.add(&self.ffn.forward(tape, &normed)?)
    }

    fn params(&self) -> Vec<Param> {
        let mut p = vec![self.ln1_gamma.clone(), self.ln1_beta.clone()];
        p.extend(self.attn.params());
        p.push(self.ln2_gamma.clone());
        p.push(self.ln2_beta.clone());
        p.extend(self.ffn.params());
        p
    }
}

/// Decoder-only transformer over token ids; every attention layer applies
/// the causal mask, so logits at position `i` depend only on `ids[0..=i]`.
pub struct GptModel {
    pub cfg: GptConfig,
    embedding: Param,
    pos: PosTable,
    blocks: Vec<Block>,
    /// `[vocab x d_model]` output projection; zero-initialized so an
    /// untrained model predicts the uniform distribution.
    lm_head: Param,
}

impl GptModel {
    pub fn new(cfg: GptConfig, rng: &mut SplitRng) -> Result<Self> {
        let attn_cfg = AttentionConfig::new(cfg.d_model, cfg.n_heads, cfg.d_ff)?;
        if cfg.vocab == 0 || cfg.max_len == 0 || cfg.n_layers == 0 {
            return Err(Error::invalid_argument("vocab, max_len, n_layers must be positive"));
        }
        let embedding = Param::new(
            "gpt.embedding",
            Tensor::randn(&[cfg.vocab, cfg.d_model], rng).map(|v| v * 0.02),
        );
        let pos = match cfg.positional {
            Positional::Sinusoidal => PosTable::Sinusoidal(sinusoidal_pe_table(cfg.max_len, cfg.d_model)?),
            Positional::Learned => PosTable::Learned(Param::new(
                "gpt.pos",
                Tensor::randn(&[cfg.max_len, cfg.d_model], rng).map(|v| v * 0.02),
            )),
        };
        let blocks = (0..cfg.n_layers).map(|l| Block::new(attn_cfg, l, rng)).collect();
        let lm_head = if cfg.tie_embeddings {
            embedding.clone()
        } else {
            Param::new("gpt.lm_head", Tensor::zeros(&[cfg.vocab, cfg.d_model]))
        };
        Ok(Self { cfg, embedding, pos, blocks, lm_head })
    }

    pub fn params(&self) -> Vec<Param> {
        let mut p = vec![self.embedding.clone()];
        if let PosTable::Learned(t) = &self.pos {
            p.push(t.clone());
        }
        for b in &self.blocks {
            p.extend(b.params());
        }
        if !self.cfg.tie_embeddings {
            p.push(self.lm_head.clone());
        }
        p
    }

    /// Logits `[n x vocab]` for a sequence of token ids.
    pub fn forward(&self, tape: &Tape, ids: &[usize]) -> Result<Var> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::invalid_argument("empty token sequence"));
        }
        if n > self.cfg.max_len {
            return Err(Error::invalid_argument(format!(
                "sequence length {n} exceeds max length {}",
                self.cfg.max_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&t| t >= self.cfg.vocab) {
            return Err(Error::invalid_argument(format!(
                "token id {bad} out of vocabulary ({})",
                self.cfg.vocab
            )));
        }
        let emb = tape.param(&self.embedding);
        let mut x = emb.select_rows(ids)?;
        x = match &self.pos {
            PosTable::Sinusoidal(table) => {
                let rows: Vec<usize> = (0..n).collect();
                let pe = tape.constant(table.clone()).select_rows(&rows)?;
                x.add(&pe)?
            }
            PosTable::Learned(table) => {
                let rows: Vec<usize> = (0..n).collect();
                let pe = tape.param(table).select_rows(&rows)?;
                x.add(&pe)?
            }
        };
        let mask = causal_mask(n)?;
        for block in &self.blocks {
            x = block.forward(tape, &x, &mask)?;
        }
        let head = tape.param(&self.lm_head);
        x.matmul(&head.transpose()?)
    }
}

/// Token selection rule for [`generate`].
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    /// Argmax of the final position's logits; ties take the lowest id.
    Greedy,
    /// Draw from `softmax(logits / tau)` with a seeded generator.
    Temperature { tau: f64, seed: u64 },
}

/// Autoregressive generation: append `steps` sampled tokens to the prompt.
/// When the context outgrows the model's max length, the most recent window
/// is used.
pub fn generate(model: &GptModel, prompt: &[usize], steps: usize, sampler: Sampler) -> Result<Vec<usize>> {
    if prompt.is_empty() {
        return Err(Error::invalid_argument("prompt must not be empty"));
    }
    if let Sampler::Temperature { tau, .. } = sampler {
        if tau <= 0.0 {
            return Err(Error::invalid_argument(format!("temperature must be positive, got {tau}")));
        }
    }
    let mut rng = match sampler {
        Sampler::Greedy => None,
        Sampler::Temperature { seed, .. } => Some(SplitRng::new(seed)),
    };
    let mut ids = prompt.to_vec();
    for _ in 0..steps {
        let start = ids.len().saturating_sub(model.cfg.max_len);
        let tape = Tape::new();
        let logits = model.forward(&tape, &ids[start..])?;
        let last = logits.value();
        let row = last.row(last.shape()[0] - 1);
        let next = match sampler {
            Sampler::Greedy => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                arg
            }
            Sampler::Temperature { tau, .. } => {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|v| ((v - m) / tau).exp()).collect();
                let z: f64 = exps.iter().sum();
                let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
                rng.as_mut().expect("sampler rng").categorical(&probs)
            }
        };
        ids.push(next);
    }
    Ok(ids)
}
