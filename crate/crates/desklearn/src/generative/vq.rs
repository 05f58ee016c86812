//! Vector quantization with a straight-through gradient.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Learnable codebook of `K` embedding vectors of width `d`.
pub struct Codebook {
    pub entries: Param,
    /// Weight on the commitment term that pulls the encoder output toward
    /// its chosen code.
    pub commitment_weight: f64,
}

impl Codebook {
    pub fn new(k: usize, dim: usize, commitment_weight: f64, rng: &mut SplitRng) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::invalid_argument("codebook needs k >= 1 and dim >= 1"));
        }
        Ok(Self {
            entries: Param::new("vq.entries", Tensor::rand_uniform(&[k, dim], -1.0, 1.0, rng)),
            commitment_weight,
        })
    }

    pub fn from_tensor(entries: Tensor, commitment_weight: f64) -> Result<Self> {
        if entries.rank() != 2 || entries.shape()[0] == 0 {
            return Err(Error::invalid_argument(format!(
                "codebook must be a non-empty [K x d] matrix, got {:?}",
                entries.shape()
            )));
        }
        if !entries.is_finite() {
            return Err(Error::invalid_argument("codebook entries must be finite"));
        }
        Ok(Self { entries: Param::new("vq.entries", entries), commitment_weight })
    }

    pub fn len(&self) -> usize {
        self.entries.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.entries.shape()[1]
    }
}

/// Result of quantizing one encoder vector.
pub struct VqOutput {
    /// Index of the nearest codebook entry (ties: lowest index).
    pub index: usize,
    /// Forward value is the code `e_k`; backward passes the gradient through
    /// to the encoder output unchanged.
    pub quantized: Var,
    /// `||sg[h] - e_k||^2`: moves the chosen code toward the encoder output.
    pub codebook_loss: Var,
    /// `beta * ||h - sg[e_k]||^2`: commits the encoder to its code.
    pub commitment_loss: Var,
}

/// Quantize `h` to its nearest codebook entry by Euclidean distance.
pub fn vq_quantize(tape: &Tape, h: &Var, book: &Codebook) -> Result<VqOutput> {
    let hv = h.value();
    if hv.shape() != [book.dim()] {
        return Err(Error::ShapeMismatch {
            context: "vq_quantize",
            lhs: hv.shape().to_vec(),
            rhs: vec![book.dim()],
        });
    }
    let entries = book.entries.value();
    let mut best = f64::INFINITY;
    let mut index = 0;
    for k in 0..book.len() {
        let d2: f64 = entries
            .row(k)
            .iter()
            .zip(hv.data())
            .map(|(e, x)| (e - x) * (e - x))
            .sum();
        if d2 < best {
            best = d2;
            index = k;
        }
    }

    let entries_var = tape.param(&book.entries);
    let e_k = entries_var.select_rows(&[index])?.reshape(&[book.dim()])?;

    // straight-through: value becomes exactly e_k, gradient stays with h
    let quantized = h.straight_through_to(e_k.value())?;

    let sg_h = tape.constant(hv);
    let codebook_loss = sg_h.sub(&e_k)?.powi(2).sum_all()?;
    let sg_e = e_k.detach();
    let commitment_loss = h.sub(&sg_e)?.powi(2).sum_all()?.mul_scalar(book.commitment_weight);

    Ok(VqOutput { index, quantized, codebook_loss, commitment_loss })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(entries: &[Vec<f64>]) -> Codebook {
        Codebook::from_tensor(Tensor::from_rows(entries).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn exact_match_has_zero_losses() {
        let b = book(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::from_slice(&[0.5, 0.5]));
        let out = vq_quantize(&tape, &h, &b).unwrap();
        assert_eq!(out.index, 2);
        assert_eq!(out.codebook_loss.item().unwrap(), 0.0);
        assert_eq!(out.commitment_loss.item().unwrap(), 0.0);
        assert_eq!(out.quantized.value().data(), &[0.5, 0.5]);
    }

    #[test]
    fn single_entry_codebook_always_picks_it() {
        let b = book(&[vec![3.0, -1.0]]);
        let tape = Tape::new();
        for xs in [[-5.0, 5.0], [0.0, 0.0], [3.0, -1.0]] {
            let h = tape.leaf(Tensor::from_slice(&xs));
            let out = vq_quantize(&tape, &h, &b).unwrap();
            assert_eq!(out.index, 0);
            assert_eq!(out.quantized.value().data(), &[3.0, -1.0]);
        }
    }

    #[test]
    fn hand_distances_and_codebook_loss() {
        // h=[0,0], entries {[1,0],[0,0.5]} -> k=1, codebook_loss = 0.25
        let b = book(&[vec![1.0, 0.0], vec![0.0, 0.5]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::zeros(&[2]));
        let out = vq_quantize(&tape, &h, &b).unwrap();
        assert_eq!(out.index, 1);
        assert_eq!(out.codebook_loss.item().unwrap(), 0.25);
        // commitment = beta * same distance
        assert_eq!(out.commitment_loss.item().unwrap(), 0.25 * 0.25);
    }

    #[test]
    fn ties_pick_the_lowest_index() {
        let b = book(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::zeros(&[2]));
        assert_eq!(vq_quantize(&tape, &h, &b).unwrap().index, 0);
    }

    #[test]
    fn straight_through_gradient_is_exact() {
        // gradient of a downstream scalar w.r.t. h equals the gradient
        // w.r.t. the quantized output, elementwise, exactly
        let b = book(&[vec![0.9, -0.3]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::from_slice(&[0.2, 0.4]));
        let out = vq_quantize(&tape, &h, &b).unwrap();
        let loss = out.quantized.powi(2).sum_all().unwrap();
        tape.backward(&loss).unwrap();
        let gh = h.grad().unwrap();
        let gq = out.quantized.grad().unwrap();
        assert_eq!(gh.data(), gq.data());
        // and the quantized gradient is 2 * e_k
        assert_eq!(gq.data(), &[1.8, -0.6]);
    }

    #[test]
    fn losses_update_the_right_sides() {
        let b = book(&[vec![1.0, 1.0]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::zeros(&[2]));
        let out = vq_quantize(&tape, &h, &b).unwrap();
        // codebook loss moves entries, not h
        tape.backward(&out.codebook_loss).unwrap();
        assert!(h.grad().is_none());
        assert_eq!(b.entries.take_grad().unwrap().data(), &[2.0, 2.0]);
        // commitment loss moves h, not entries
        let tape = Tape::new();
        let h = tape.leaf(Tensor::zeros(&[2]));
        let out = vq_quantize(&tape, &h, &b).unwrap();
        tape.backward(&out.commitment_loss).unwrap();
        assert_eq!(h.grad().unwrap().data(), &[-0.5, -0.5]); // 0.25 * 2 * (0-1)
        assert!(b.entries.grad().is_none());
    }

    #[test]
    fn rejects_empty_or_mismatched() {
        assert!(Codebook::from_tensor(Tensor::zeros(&[0, 2]), 0.25).is_err());
        let b = book(&[vec![1.0, 0.0]]);
        let tape = Tape::new();
        let h = tape.leaf(Tensor::from_slice(&[1.0, 2.0, 3.0]));
        assert!(vq_quantize(&tape, &h, &b).is_err());
    }
}
