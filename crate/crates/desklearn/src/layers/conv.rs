//! Convolution layers and pooling.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::Init;

/// Output extent of one spatial dimension: `floor((n + 2p - k)/s) + 1`,
/// the count of valid filter placements.
pub fn conv_output_extent(n: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (n + 2 * padding - kernel) / stride + 1
}

/// 2-D convolution over `[C_in, H, W]` feature maps.
///
/// Filters are `[C_out, C_in/groups, k, k]`; with `groups > 1` each group of
/// channels is convolved independently.
pub struct Conv2dLayer {
    pub filters: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv2dLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        init: Init,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::invalid_argument("kernel and stride must be positive"));
        }
        if groups == 0 || !in_channels.is_multiple_of(groups) || !out_channels.is_multiple_of(groups) {
            return Err(Error::invalid_argument(format!(
                "groups {groups} must divide in_channels {in_channels} and out_channels {out_channels}"
            )));
        }
        let depth = in_channels / groups;
        let fan_in = depth * kernel * kernel;
        let fan_out = (out_channels / groups) * kernel * kernel;
        Ok(Self {
            filters: Param::new(
                "conv.filters",
                init.tensor(&[out_channels, depth, kernel, kernel], fan_in, fan_out, rng),
            ),
            bias: Param::new("conv.bias", Tensor::zeros(&[out_channels])),
            stride,
            padding,
            groups,
        })
    }

    pub fn from_tensors(
        filters: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Self> {
        if filters.rank() != 4 || bias.rank() != 1 || bias.shape()[0] != filters.shape()[0] {
            return Err(Error::ShapeMismatch {
                context: "conv layer",
                lhs: filters.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            filters: Param::new("conv.filters", filters),
            bias: Param::new("conv.bias", bias),
            stride,
            padding,
            groups,
        })
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.filters.clone(), self.bias.clone()]
    }

    /// Weights excluding biases.
    pub fn weight_count(&self) -> usize {
        self.filters.value().numel()
    }

    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        let w = tape.param(&self.filters);
        let b = tape.param(&self.bias);
        tape.conv2d(x, &w, Some(&b), self.stride, self.padding, self.groups)
    }
}

/// Depthwise spatial filtering (`groups = C_in`) followed by a 1x1
/// pointwise channel mix: `M*k^2 + M*N` weights instead of `M*N*k^2`.
pub struct DepthwiseSeparable {
    pub depthwise: Conv2dLayer,
    pub pointwise: Conv2dLayer,
}

impl DepthwiseSeparable {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        init: Init,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        Ok(Self {
            depthwise: Conv2dLayer::new(
                in_channels,
                in_channels,
                kernel,
                stride,
                padding,
                in_channels,
                init,
                rng,
            )?,
            pointwise: Conv2dLayer::new(in_channels, out_channels, 1, 1, 0, 1, init, rng)?,
        })
    }

    pub fn weight_count(&self) -> usize {
        self.depthwise.weight_count() + self.pointwise.weight_count()
    }

    pub fn params(&self) -> Vec<Param> {
        let mut p = self.depthwise.params();
        p.extend(self.pointwise.params());
        p
    }

    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        self.pointwise.forward(tape, &self.depthwise.forward(tape, x)?)
    }
}

/// Max over square windows of a `[C, H, W]` input; the backward pass routes
/// each window's gradient to its argmax (ties: lowest flat index).
pub fn max_pool2d(tape: &Tape, x: &Var, window: usize, stride: usize) -> Result<Var> {
    tape.max_pool2d(x, window, stride)
}
