//! The attention stack: scaled dot-product and multi-head attention,
//! positional encodings, causal masking, a decoder-only toy GPT, MLM
//! corruption, and ViT patch extraction.

mod attention;
mod gpt;
mod masking;

pub use attention::{
    attention_weights, ffn, multi_head_attention, scaled_dot_product_attention,
    sinusoidal_pe, sinusoidal_pe_table, AttentionConfig, FeedForward, MultiHeadAttention,
};
pub use gpt::{generate, GptConfig, GptModel, Positional, Sampler};
pub use masking::{causal_mask, mlm_mask, Mask, MlmTargets, MLM_RATE};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Split a `[C, H, W]` image into non-overlapping `p x p` patches, row-major
/// over the patch grid, each flattened channel-first:
/// `[(H/p * W/p) x (C * p^2)]`.
pub fn vit_patchify(image: &Tensor, patch: usize) -> Result<Tensor> {
    if image.rank() != 3 {
        return Err(Error::invalid_argument(format!(
            "vit_patchify expects [C, H, W], got {:?}",
            image.shape()
        )));
    }
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::invalid_argument(format!(
            "patch size {patch} must divide image extents {h}x{w}"
        )));
    }
    let (gh, gw) = (h / patch, w / patch);
    let mut out = Tensor::zeros(&[gh * gw, c * patch * patch]);
    let cols = c * patch * patch;
    for py in 0..gh {
        for px in 0..gw {
            let row = py * gw + px;
            for ch in 0..c {
                for dy in 0..patch {
                    for dx in 0..patch {
                        let src = (ch * h + py * patch + dy) * w + px * patch + dx;
                        let dst = row * cols + (ch * patch + dy) * patch + dx;
                        out.data_mut()[dst] = image.data()[src];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reassemble patches produced by [`vit_patchify`] into the original image.
pub fn vit_unpatchify(patches: &Tensor, channels: usize, height: usize, width: usize, patch: usize) -> Result<Tensor> {
    if patch == 0 || !height.is_multiple_of(patch) || !width.is_multiple_of(patch) {
        return Err(Error::invalid_argument("patch size must divide image extents"));
    }
    let (gh, gw) = (height / patch, width / patch);
    let cols = channels * patch * patch;
    if patches.shape() != [gh * gw, cols] {
        return Err(Error::ShapeMismatch {
            context: "vit_unpatchify",
            lhs: patches.shape().to_vec(),
            rhs: vec![gh * gw, cols],
        });
    }
    let mut out = Tensor::zeros(&[channels, height, width]);
    for py in 0..gh {
        for px in 0..gw {
            let row = py * gw + px;
            for ch in 0..channels {
                for dy in 0..patch {
                    for dx in 0..patch {
                        let dst = (ch * height + py * patch + dy) * width + px * patch + dx;
                        let src = row * cols + (ch * patch + dy) * patch + dx;
                        out.data_mut()[dst] = patches.data()[src];
                    }
                }
            }
        }
    }
    Ok(out)
}
