//! Parameterized layers and structural blocks.

mod conv;
mod init;
mod linear;
mod norm;
mod rnn;
mod serialize;

pub use conv::{conv_output_extent, max_pool2d, Conv2dLayer, DepthwiseSeparable};
pub use init::Init;
pub use linear::{linear_forward, lora_forward, LinearLayer, LoraAdapter};
pub use norm::{batch_norm_infer, batch_norm_train, layer_norm, NormLayer, NormMode};
pub use rnn::{rnn_step, RnnCell};
pub use serialize::{entries_of, load_params, restore_into, save_params};

use crate::autograd::Var;
use crate::error::{Error, Result};

/// Pointwise nonlinearities (softmax acts along a distinguished axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu { slope: f64 },
    Softmax { axis: usize },
}

pub fn activation(kind: Activation, x: &Var) -> Result<Var> {
    match kind {
        Activation::Sigmoid => Ok(x.sigmoid()),
        Activation::Tanh => x.tanh(),
        Activation::Relu => Ok(x.relu()),
        Activation::LeakyRelu { slope } => x.leaky_relu(slope),
        Activation::Softmax { axis } => x.softmax(axis),
    }
}

/// Skip connection `y = x + F(x)`; `F` must preserve the shape.
pub fn residual_block<F>(x: &Var, f: F) -> Result<Var>
where
    F: FnOnce(&Var) -> Result<Var>,
{
    let fx = f(x)?;
    if fx.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            context: "residual block",
            lhs: x.shape(),
            rhs: fx.shape(),
        });
    }
    x.add(&fx)
}

/// Channel-wise recalibration: global-average-pool `[C, H, W]` to `[C]`,
/// run the gate on it, and scale each channel by the sigmoid of its logit.
pub fn se_recalibrate<F>(x: &Var, gate: F) -> Result<Var>
where
    F: FnOnce(&Var) -> Result<Var>,
{
    let shape = x.shape();
    if shape.len() != 3 {
        return Err(Error::invalid_argument(format!(
            "se_recalibrate expects [C, H, W], got {shape:?}"
        )));
    }
    let c = shape[0];
    let pooled = x.mean_axis(2)?.mean_axis(1)?;
    let logits = gate(&pooled)?;
    if logits.shape() != [c] {
        return Err(Error::ShapeMismatch {
            context: "se gate output",
            lhs: logits.shape(),
            rhs: vec![c],
        });
    }
    x.mul(&logits.sigmoid().reshape(&[c, 1, 1])?)
}

/// The fixed channel permutation `reshape C -> (g, C/g), transpose, flatten`
/// applied to a `[C, H, W]` tensor. Bijective; applying it again with
/// `C/g` groups restores the original order.
pub fn shuffle_channels(x: &Var, groups: usize) -> Result<Var> {
    let shape = x.shape();
    if shape.len() != 3 {
        return Err(Error::invalid_argument(format!(
            "shuffle_channels expects [C, H, W], got {shape:?}"
        )));
    }
    let c = shape[0];
    if groups == 0 || !c.is_multiple_of(groups) {
        return Err(Error::invalid_argument(format!(
            "groups {groups} must divide {c} channels"
        )));
    }
    let per = c / groups;
    // out position j*groups + k reads in channel k*per + j
    let perm: Vec<usize> = (0..per)
        .flat_map(|j| (0..groups).map(move |k| k * per + j))
        .collect();
    x.select_rows(&perm)
}
