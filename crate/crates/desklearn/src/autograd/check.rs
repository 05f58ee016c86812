//! Finite-difference gradient checking.
//!
//! [`grad_check`] compares tape gradients of a scalar function against
//! central finite differences `(f(x+h) - f(x-h)) / 2h`, coordinate by
//! coordinate. The relative difference uses the denominator
//! `max(|analytic|, 0.01)`, so a threshold of `1e-4` is equivalent to an
//! absolute tolerance of `1e-6` wherever the gradient itself is small.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{Param, Tape, Var};

pub const DEFAULT_STEP: f64 = 1e-5;

const REL_FLOOR: f64 = 1e-2;

/// Comparison between tape gradients and finite differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    /// Per-parameter absolute differences, same shapes as the inputs.
    pub per_param: Vec<Tensor>,
}

impl GradCheckReport {
    pub fn within(&self, rel_tol: f64) -> bool {
        self.max_rel_diff < rel_tol
    }
}

/// Check the tape gradient of `f` at `points` against central finite
/// differences with step `h`.
///
/// `f` receives a fresh tape and one leaf [`Var`] per input tensor, and must
/// return a scalar. Inputs the function never touches get gradient zero.
pub fn grad_check<F>(f: F, points: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::invalid_argument(format!("step must be positive, got {h}")));
    }

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        f(&tape, &vars)?.item()
    };

    // analytic gradients from one taped run
    let tape = Tape::new();
    let vars: Vec<Var> = points.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&tape, &vars)?;
    tape.backward(&loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(points)
        .map(|(v, p)| v.grad().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();

    let mut work: Vec<Tensor> = points.to_vec();
    let mut per_param = Vec::with_capacity(points.len());
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;

    for pi in 0..points.len() {
        let mut diffs = Tensor::zeros(points[pi].shape());
        for i in 0..points[pi].numel() {
            let orig = work[pi].data()[i];
            work[pi].data_mut()[i] = orig + h;
            let fp = eval(&work)?;
            work[pi].data_mut()[i] = orig - h;
            let fm = eval(&work)?;
            work[pi].data_mut()[i] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFiniteProbe { param: pi, index: i });
            }
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi].data()[i];
            let abs = (a - numeric).abs();
            diffs.data_mut()[i] = abs;
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / a.abs().max(REL_FLOOR));
        }
        per_param.push(diffs);
    }

    Ok(GradCheckReport { max_abs_diff: max_abs, max_rel_diff: max_rel, per_param })
}

/// Like [`grad_check`], but differentiates with respect to registered
/// [`Param`]s instead of explicit inputs — the way to gradient-check a whole
/// model: `f` builds the loss on a fresh tape from whatever parameters it
/// captures.
pub fn grad_check_params<F>(f: F, params: &[Param], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::invalid_argument(format!("step must be positive, got {h}")));
    }
    for p in params {
        p.zero_grad();
    }
    let tape = Tape::new();
    let loss = f(&tape)?;
    tape.backward(&loss)?;
    let analytic: Vec<Tensor> = params
        .iter()
        .map(|p| {
            let g = p.grad().unwrap_or_else(|| Tensor::zeros(&p.shape()));
            p.zero_grad();
            g
        })
        .collect();

    let eval = || -> Result<f64> {
        let tape = Tape::new();
        let v = f(&tape)?.item();
        for p in params {
            p.zero_grad();
        }
        v
    };

    let mut per_param = Vec::with_capacity(params.len());
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for (pi, p) in params.iter().enumerate() {
        let base = p.value();
        let mut diffs = Tensor::zeros(base.shape());
        for i in 0..base.numel() {
            let orig = base.data()[i];
            p.update_value(|t| t.data_mut()[i] = orig + h);
            let fp = eval()?;
            p.update_value(|t| t.data_mut()[i] = orig - h);
            let fm = eval()?;
            p.update_value(|t| t.data_mut()[i] = orig);
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFiniteProbe { param: pi, index: i });
            }
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi].data()[i];
            let abs = (a - numeric).abs();
            diffs.data_mut()[i] = abs;
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / a.abs().max(REL_FLOOR));
        }
        per_param.push(diffs);
    }
    Ok(GradCheckReport { max_abs_diff: max_abs, max_rel_diff: max_rel, per_param })
}
