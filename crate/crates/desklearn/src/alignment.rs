//! Preference-learning objectives: pairwise reward-model loss, the PPO
//! clipped surrogate, a per-sample KL penalty, the DPO loss, and the
//! reward-tilted optimal policy, plus a tabular toy trainer.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::losses::Distribution;
use crate::optim::Optimizer;
use crate::tensor::Tensor;

/// One ranked comparison: log-probabilities of the preferred and rejected
/// responses under the policy, with optional reward-model scores.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub logp_plus: f64,
    pub logp_minus: f64,
    pub r_plus: Option<f64>,
    pub r_minus: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PpoConfig {
    /// Probability-ratio clip half-width, in (0, 1).
    pub clip: f64,
    /// Weight of the KL penalty term when combined with the surrogate.
    pub kl_coefficient: f64,
}

impl PpoConfig {
    pub fn new(clip: f64, kl_coefficient: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&clip) || clip == 0.0 {
            return Err(Error::invalid_argument(format!("clip must be in (0,1), got {clip}")));
        }
        if kl_coefficient < 0.0 {
            return Err(Error::invalid_argument("kl coefficient must be non-negative"));
        }
        Ok(Self { clip, kl_coefficient })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DpoConfig {
    pub beta: f64,
}

impl DpoConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::invalid_argument(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bradley-Terry pairwise loss `-ln sigmoid(r_plus - r_minus)`: strictly
/// decreasing in the margin, `ln 2` at zero margin.
pub fn reward_pairwise_loss(r_plus: f64, r_minus: f64) -> f64 {
    -sigmoid(r_plus - r_minus).ln()
}

/// PPO clipped surrogate (a quantity to maximize), averaged over the batch:
/// `mean(min(r A, clip(r, 1-eps, 1+eps) A))`.
pub fn ppo_clipped_objective(ratios: &Var, advantages: &Tensor, cfg: &PpoConfig) -> Result<Var> {
    let r = ratios.value();
    if r.shape() != advantages.shape() {
        return Err(Error::ShapeMismatch {
            context: "ppo objective",
            lhs: r.shape().to_vec(),
            rhs: advantages.shape().to_vec(),
        });
    }
    if let Some(&bad) = r.data().iter().find(|&&v| v <= 0.0) {
        return Err(Error::invalid_argument(format!(
            "probability ratios must be positive, got {bad}"
        )));
    }
    let tape = ratios.tape();
    let adv = tape.constant(advantages.clone());
    let unclipped = ratios.mul(&adv)?;
    let clipped = ratios.clamp(1.0 - cfg.clip, 1.0 + cfg.clip).mul(&adv)?;
    unclipped.min_elem(&clipped)?.mean_all()
}

/// Per-sample KL estimator: the mean log-ratio `mean(logp_new - logp_ref)`
/// over aligned tokens. Non-negative in expectation under the new policy.
pub fn kl_penalty(logp_new: &[f64], logp_ref: &[f64]) -> Result<f64> {
    if logp_new.len() != logp_ref.len() || logp_new.is_empty() {
        return Err(Error::invalid_argument(format!(
            "need equal non-empty sequences, got {} and {}",
            logp_new.len(),
            logp_ref.len()
        )));
    }
    let sum: f64 = logp_new.iter().zip(logp_ref).map(|(n, r)| n - r).sum();
    Ok(sum / logp_new.len() as f64)
}

/// DPO loss for a batch of pairs:
/// `mean(-ln sigmoid(beta * (logp_plus - logp_minus)))`.
pub fn dpo_loss(pairs: &[PreferencePair], cfg: &DpoConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid_argument("empty preference batch"));
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| -sigmoid(cfg.beta * (p.logp_plus - p.logp_minus)).ln())
        .sum();
    Ok(sum / pairs.len() as f64)
}

/// Differentiable DPO loss from log-probability vars of equal shape.
pub fn dpo_loss_var(logp_plus: &Var, logp_minus: &Var, cfg: &DpoConfig) -> Result<Var> {
    if logp_plus.shape() != logp_minus.shape() {
        return Err(Error::ShapeMismatch {
            context: "dpo loss",
            lhs: logp_plus.shape(),
            rhs: logp_minus.shape(),
        });
    }
    let margin = logp_plus.sub(logp_minus)?.mul_scalar(cfg.beta);
    margin.sigmoid().ln().neg().mean_all()
}

/// Reward-tilted policy `pi*(y) ∝ base(y) exp(beta R(y))`, renormalized.
pub fn tilt_policy(base: &Distribution, rewards: &[f64], beta: f64) -> Result<Distribution> {
    if beta < 0.0 {
        return Err(Error::invalid_argument(format!("beta must be non-negative, got {beta}")));
    }
    if base.rows() != 1 || base.cols() != rewards.len() {
        return Err(Error::invalid_argument(format!(
            "expected one distribution over {} outcomes",
            rewards.len()
        )));
    }
    let max_r = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weighted: Vec<f64> = base
        .row(0)
        .iter()
        .zip(rewards)
        .map(|(p, r)| p * (beta * (r - max_r)).exp())
        .collect();
    let z: f64 = weighted.iter().sum();
    if z <= 0.0 {
        return Err(Error::InvalidDistribution("tilted mass is zero".to_string()));
    }
    Distribution::from_slice(&weighted.iter().map(|w| w / z).collect::<Vec<_>>())
}

/// Tabular softmax policy over a handful of actions, trained directly on
/// preference pairs with the DPO loss.
pub struct TabularDpoTrainer {
    pub logits: Param,
    pub cfg: DpoConfig,
    optimizer: Optimizer,
}

impl TabularDpoTrainer {
    pub fn new(actions: usize, cfg: DpoConfig, lr: f64) -> Result<Self> {
        if actions == 0 || actions > 10 {
            return Err(Error::invalid_argument("trainer supports 1..=10 actions"));
        }
        Ok(Self {
            logits: Param::new("dpo.logits", Tensor::zeros(&[actions])),
            cfg,
            optimizer: Optimizer::sgd(lr)?,
        })
    }

    pub fn log_probs(&self) -> Tensor {
        let tape = Tape::new();
        let logits = tape.param(&self.logits);
        logits
            .reshape(&[1, self.logits.shape()[0]])
            .and_then(|l| l.log_softmax(1))
            .map(|l| l.value())
            .expect("log softmax of finite logits")
    }

    /// Mean margin `logp(y+) - logp(y-)` over the dataset.
    pub fn mean_margin(&self, pairs: &[(usize, usize)]) -> f64 {
        let lp = self.log_probs();
        let sum: f64 = pairs.iter().map(|&(p, m)| lp.data()[p] - lp.data()[m]).sum();
        sum / pairs.len() as f64
    }

    /// One full-batch DPO step; returns the loss before the update.
    pub fn step(&mut self, pairs: &[(usize, usize)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::invalid_argument("empty preference batch"));
        }
        let actions = self.logits.shape()[0];
        for &(p, m) in pairs {
            if p >= actions || m >= actions {
                return Err(Error::invalid_argument("action index out of range"));
            }
        }
        let tape = Tape::new();
        let logits = tape.param(&self.logits);
        let lp = logits.reshape(&[1, actions])?.log_softmax(1)?.reshape(&[actions])?;
        let plus = lp.select_rows(&pairs.iter().map(|&(p, _)| p).collect::<Vec<_>>())?;
        let minus = lp.select_rows(&pairs.iter().map(|&(_, m)| m).collect::<Vec<_>>())?;
        let loss = dpo_loss_var(&plus, &minus, &self.cfg)?;
        let value = loss.item()?;
        tape.backward(&loss)?;
        self.optimizer.step_params(std::slice::from_ref(&self.logits))?;
        Ok(value)
    }
}

/// Parse preference pairs from CSV lines
/// `prompt_id,logp_plus,logp_minus[,r_plus,r_minus]`; a non-numeric first
/// row is treated as a header.
pub fn read_preference_csv(text: &str) -> Result<Vec<PreferencePair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 5 {
            return Err(Error::Format(format!(
                "line {}: expected 3 or 5 comma-separated fields",
                i + 1
            )));
        }
        let nums: std::result::Result<Vec<f64>, _> =
            fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        match nums {
            Ok(nums) => pairs.push(PreferencePair {
                prompt_id: fields[0].to_string(),
                logp_plus: nums[0],
                logp_minus: nums[1],
                r_plus: nums.get(2).copied(),
                r_minus: nums.get(3).copied(),
            }),
            Err(_) if i == 0 => continue, // header
            Err(e) => return Err(Error::Format(format!("line {}: {e}", i + 1))),
        }
    }
    if pairs.is_empty() {
        return Err(Error::Format("no preference rows".to_string()));
    }
    Ok(pairs)
}
