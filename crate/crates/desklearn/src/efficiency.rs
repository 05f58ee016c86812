//! Scaling and compression arithmetic: parameter counters, vanishing-
//! gradient factors, compound scaling, data-budget rules, sparse expert
//! gating, magnitude pruning, and integer quantization with a
//! straight-through trainable variant.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Tokens-per-parameter ratio implied by the 70B-parameter / 1.4T-token
/// compute-optimal pairing.
pub const CHINCHILLA_TOKENS_PER_PARAM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub weights: u64,
    pub biases: u64,
}

/// Dense-layer parameter count: `inputs x hidden` weights plus `hidden` biases.
pub fn mlp_param_count(inputs: u64, hidden: u64) -> Result<ParamCount> {
    if inputs == 0 || hidden == 0 {
        return Err(Error::invalid_argument("sizes must be positive"));
    }
    Ok(ParamCount { weights: inputs * hidden, biases: hidden })
}

/// Convolution weight count: standard `M N k^2`, depthwise separable
/// `M k^2 + M N`.
pub fn conv_param_counts(m: u64, n: u64, k: u64, separable: bool) -> Result<u64> {
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::invalid_argument("sizes must be positive"));
    }
    Ok(if separable { m * k * k + m * n } else { m * n * k * k })
}

/// Gradient attenuation through a deep stack: `alpha^layers`.
///
/// Worked values: `0.9^30 ≈ 0.0424` and `0.8^10 ≈ 0.1074`. Note that
/// `0.8^30` is ≈ 0.00124 (about 0.1%), not 0.015 as sometimes misquoted.
pub fn vanishing_factor(per_layer_derivative: f64, layers: u32) -> Result<f64> {
    if per_layer_derivative <= 0.0 {
        return Err(Error::invalid_argument("per-layer derivative must be positive"));
    }
    Ok(per_layer_derivative.powi(layers as i32))
}

/// Compound-scaling coefficients: depth grows as `alpha^phi`, width as
/// `beta^phi`, resolution as `gamma^phi`.
#[derive(Debug, Clone, Copy)]
pub struct ScalingCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl ScalingCoefficients {
    /// The published coefficients `alpha=1.2, beta=1.1, gamma=1.15`.
    pub fn standard(phi: f64) -> Result<Self> {
        Self::new(1.2, 1.1, 1.15, phi)
    }

    pub fn new(alpha: f64, beta: f64, gamma: f64, phi: f64) -> Result<Self> {
        if alpha <= 1.0 || beta <= 1.0 || gamma <= 1.0 {
            return Err(Error::invalid_argument("alpha, beta, gamma must exceed 1"));
        }
        if phi < 0.0 {
            return Err(Error::invalid_argument("phi must be non-negative"));
        }
        Ok(Self { alpha, beta, gamma, phi })
    }

    pub fn factors(&self) -> (f64, f64, f64) {
        (
            self.alpha.powf(self.phi),
            self.beta.powf(self.phi),
            self.gamma.powf(self.phi),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaledDims {
    pub depth: u64,
    pub width: u64,
    /// Rounded to the nearest multiple of 8.
    pub resolution: u64,
}

/// Scale base (depth, width, resolution) by the compound factors; depth and
/// width round to the nearest integer (at least 1), resolution to the
/// nearest multiple of 8.
pub fn compound_scale(depth: u64, width: u64, resolution: u64, coeffs: &ScalingCoefficients) -> ScaledDims {
    let (a, b, g) = coeffs.factors();
    let round_pos = |v: f64| (v.round() as u64).max(1);
    let res = ((resolution as f64 * g / 8.0).round() as u64).max(1) * 8;
    ScaledDims {
        depth: round_pos(depth as f64 * a),
        width: round_pos(width as f64 * b),
        resolution: res,
    }
}

/// Compute-optimal training tokens: `params * tokens_per_param`.
pub fn chinchilla_tokens(params: f64, tokens_per_param: f64) -> Result<f64> {
    if params <= 0.0 || tokens_per_param <= 0.0 {
        return Err(Error::invalid_argument("inputs must be positive"));
    }
    Ok(params * tokens_per_param)
}

/// Sparse expert gate: softmax over the top-k logits (value ties keep the
/// lowest index), zero weight elsewhere. The output sums to 1.
pub fn moe_gate(gate_logits: &[f64], k: usize) -> Result<Vec<f64>> {
    let e = gate_logits.len();
    if k == 0 || k > e {
        return Err(Error::invalid_argument(format!(
            "k must be in 1..={e}, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| {
        gate_logits[b]
            .partial_cmp(&gate_logits[a])
            .expect("finite logits")
            .then(a.cmp(&b))
    });
    let selected = &order[..k];
    let m = selected.iter().map(|&i| gate_logits[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut weights = vec![0.0; e];
    let mut z = 0.0;
    for &i in selected {
        let w = (gate_logits[i] - m).exp();
        weights[i] = w;
        z += w;
    }
    for w in &mut weights {
        *w /= z;
    }
    Ok(weights)
}

/// Zero out the `floor(fraction * n)` smallest-magnitude weights (ties:
/// lowest flat index pruned first). Returns the survivor mask and the
/// pruned tensor.
pub fn prune_by_magnitude(weights: &Tensor, fraction: f64) -> Result<(Vec<bool>, Tensor)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid_argument(format!(
            "fraction must be in [0,1], got {fraction}"
        )));
    }
    let n = weights.numel();
    let prune_count = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        weights.data()[a]
            .abs()
            .partial_cmp(&weights.data()[b].abs())
            .expect("finite weights")
            .then(a.cmp(&b))
    });
    let mut mask = vec![true; n];
    for &i in order.iter().take(prune_count) {
        mask[i] = false;
    }
    let mut pruned = weights.clone();
    for (v, &keep) in pruned.data_mut().iter_mut().zip(&mask) {
        if !keep {
            *v = 0.0;
        }
    }
    Ok((mask, pruned))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Full integer range with a zero point calibrated from `[min, max]`.
    Affine,
    /// Symmetric range `±(2^(bits-1) - 1)` with zero point 0, calibrated
    /// from `max |x|` (the most negative code is reserved).
    Symmetric,
}

/// Integer quantization parameters.
#[derive(Debug, Clone, Copy)]
pub struct QuantParams {
    pub bits: u32,
    pub qmin: i64,
    pub qmax: i64,
    pub scale: f64,
    pub zero_point: i64,
    pub mode: QuantMode,
}

impl QuantParams {
    /// Calibrate an affine mapping from an observed value range. The range
    /// is first extended to include zero, so the zero point always lands
    /// inside `[qmin, qmax]` and real zero is exactly representable.
    pub fn affine(bits: u32, min: f64, max: f64) -> Result<Self> {
        if bits < 2 {
            return Err(Error::invalid_argument("need at least 2 bits"));
        }
        if min >= max || min.is_nan() || max.is_nan() {
            return Err(Error::invalid_argument(format!(
                "degenerate range [{min}, {max}]"
            )));
        }
        let min = min.min(0.0);
        let max = max.max(0.0);
        let qmin = -(1i64 << (bits - 1));
        let qmax = (1i64 << (bits - 1)) - 1;
        let scale = (max - min) / (qmax - qmin) as f64;
        let zero_point = (qmin as f64 - min / scale).round() as i64;
        Ok(Self {
            bits,
            qmin,
            qmax,
            scale,
            zero_point: zero_point.clamp(qmin, qmax),
            mode: QuantMode::Affine,
        })
    }

    /// Calibrate a symmetric mapping from the largest absolute value.
    pub fn symmetric(bits: u32, max_abs: f64) -> Result<Self> {
        if bits < 2 {
            return Err(Error::invalid_argument("need at least 2 bits"));
        }
        if max_abs <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "degenerate range ±{max_abs}"
            )));
        }
        let qmax = (1i64 << (bits - 1)) - 1;
        Ok(Self {
            bits,
            qmin: -qmax,
            qmax,
            scale: max_abs / qmax as f64,
            zero_point: 0,
            mode: QuantMode::Symmetric,
        })
    }

    /// Smallest and largest representable real values.
    pub fn real_range(&self) -> (f64, f64) {
        (
            (self.qmin - self.zero_point) as f64 * self.scale,
            (self.qmax - self.zero_point) as f64 * self.scale,
        )
    }
}

/// Integer codes with the shape of the tensor they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub values: Vec<i64>,
}

/// `q = clamp(round(x / scale) + zero_point, qmin, qmax)`.
pub fn quantize(x: &Tensor, qp: &QuantParams) -> QuantizedTensor {
    let values = x
        .data()
        .iter()
        .map(|&v| ((v / qp.scale).round() as i64 + qp.zero_point).clamp(qp.qmin, qp.qmax))
        .collect();
    QuantizedTensor { shape: x.shape().to_vec(), values }
}

/// `x_hat = (q - zero_point) * scale`.
pub fn dequantize(q: &QuantizedTensor, qp: &QuantParams) -> Tensor {
    let data = q
        .values
        .iter()
        .map(|&v| (v - qp.zero_point) as f64 * qp.scale)
        .collect();
    Tensor::new(&q.shape, data).expect("shape carried by QuantizedTensor")
}

/// Quantize-dequantize in the forward pass; the backward pass is the
/// straight-through estimator: gradient 1 for in-range inputs, 0 where the
/// value was clamped.
pub fn fake_quantize(x: &Var, qp: &QuantParams) -> Result<Var> {
    let (lo, hi) = qp.real_range();
    let forward = dequantize(&quantize(&x.value(), qp), qp);
    x.clamp(lo, hi).straight_through_to(forward)
}
