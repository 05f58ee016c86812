//! Scaling/compression calculators exposed as a CLI subcommand.

use crate::efficiency::{
    chinchilla_tokens, compound_scale, conv_param_counts, mlp_param_count, vanishing_factor,
    QuantParams, ScalingCoefficients, CHINCHILLA_TOKENS_PER_PARAM,
};
use crate::error::Result;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub enum CalcRequest {
    MlpParams { inputs: u64, hidden: u64 },
    ConvParams { in_channels: u64, out_channels: u64, kernel: u64, separable: bool },
    Scaling { depth: u64, width: u64, resolution: u64, alpha: f64, beta: f64, gamma: f64, phi: f64 },
    Vanishing { alpha: f64, layers: u32 },
    Chinchilla { params: f64, tokens_per_param: f64 },
    QuantAffine { bits: u32, min: f64, max: f64 },
    QuantSymmetric { bits: u32, max_abs: f64 },
}

/// Evaluate one calculator request into a summary.
pub fn run_calc(config: &ExperimentConfig, request: &CalcRequest) -> Result<ExperimentRun> {
    let mut run = ExperimentRun::new();
    match *request {
        CalcRequest::MlpParams { inputs, hidden } => {
            let c = mlp_param_count(inputs, hidden)?;
            run.set("inputs", inputs);
            run.set("hidden", hidden);
            run.set("weights", c.weights);
            run.set("biases", c.biases);
            run.set("total", c.weights + c.biases);
        }
        CalcRequest::ConvParams { in_channels, out_channels, kernel, separable } => {
            let count = conv_param_counts(in_channels, out_channels, kernel, separable)?;
            run.set("in_channels", in_channels);
            run.set("out_channels", out_channels);
            run.set("kernel", kernel);
            run.set("separable", separable);
            run.set("weights", count);
            if separable {
                let standard = conv_param_counts(in_channels, out_channels, kernel, false)?;
                run.set("standard_weights", standard);
                run.set("reduction_factor", standard as f64 / count as f64);
            }
        }
        CalcRequest::Scaling { depth, width, resolution, alpha, beta, gamma, phi } => {
            let coeffs = ScalingCoefficients::new(alpha, beta, gamma, phi)?;
            let (fa, fb, fg) = coeffs.factors();
            let scaled = compound_scale(depth, width, resolution, &coeffs);
            run.set("depth_factor", fa);
            run.set("width_factor", fb);
            run.set("resolution_factor", fg);
            run.set("depth", scaled.depth);
            run.set("width", scaled.width);
            run.set("resolution", scaled.resolution);
        }
        CalcRequest::Vanishing { alpha, layers } => {
            run.set("alpha", alpha);
            run.set("layers", layers);
            run.set("factor", vanishing_factor(alpha, layers)?);
        }
        CalcRequest::Chinchilla { params, tokens_per_param } => {
            run.set("params", params);
            run.set("tokens_per_param", tokens_per_param);
            run.set("tokens", chinchilla_tokens(params, tokens_per_param)?);
        }
        CalcRequest::QuantAffine { bits, min, max } => {
            let qp = QuantParams::affine(bits, min, max)?;
            set_quant(&mut run, &qp);
        }
        CalcRequest::QuantSymmetric { bits, max_abs } => {
            let qp = QuantParams::symmetric(bits, max_abs)?;
            set_quant(&mut run, &qp);
        }
    }
    run.finish(config)
}

fn set_quant(run: &mut ExperimentRun, qp: &QuantParams) {
    let (lo, hi) = qp.real_range();
    run.set("bits", qp.bits);
    run.set("qmin", qp.qmin);
    run.set("qmax", qp.qmax);
    run.set("scale", qp.scale);
    run.set("zero_point", qp.zero_point);
    run.set("real_min", lo);
    run.set("real_max", hi);
    run.set("max_round_trip_error", qp.scale / 2.0);
}

/// Every pinned calculator value in one summary, for quick verification.
pub fn calc_anchors() -> Result<ExperimentRun> {
    let mut run = ExperimentRun::new();
    let mlp = mlp_param_count(150_000, 1_000)?;
    run.set("mlp_weights", mlp.weights);
    run.set("mlp_biases", mlp.biases);
    run.set("conv_standard_128_128_3", conv_param_counts(128, 128, 3, false)?);
    run.set("conv_separable_128_128_3", conv_param_counts(128, 128, 3, true)?);
    run.set("vanishing_0p9_30", vanishing_factor(0.9, 30)?);
    run.set("vanishing_0p8_10", vanishing_factor(0.8, 10)?);
    run.set("vanishing_0p8_30", vanishing_factor(0.8, 30)?);
    let coeffs = ScalingCoefficients::standard(1.0)?;
    let (a, b, g) = coeffs.factors();
    run.set("compound_alpha", a);
    run.set("compound_beta", b);
    run.set("compound_gamma", g);
    run.set("chinchilla_70b_tokens", chinchilla_tokens(70e9, CHINCHILLA_TOKENS_PER_PARAM)?);
    Ok(run)
}
