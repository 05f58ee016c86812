//! Desk-scale deep learning, built from scratch.
//!
//! Everything here runs on plain `f64` tensors small enough to reason about
//! by hand, with correctness pinned by finite-difference gradient checks,
//! analytic invariants, and small-instance oracles:
//!
//! - [`tensor`] / [`autograd`] — dense tensors and a reverse-mode tape
//! - [`layers`] — linear, activations, convolutions, pooling, normalization,
//!   dropout, residual and SE blocks, channel shuffle, RNN cell, LoRA
//! - [`losses`] — information-theoretic quantities and training objectives
//! - [`optim`] — SGD, momentum, Adam
//! - [`bpe`] — byte-pair-encoding tokenizer
//! - [`transformer`] — attention, positional encodings, a toy GPT
//! - [`generative`] — VAE, vector quantization, coupling flows, diffusion
//! - [`classic`] — k-means and Hopfield associative memory
//! - [`alignment`] — reward-model, PPO, and DPO objectives
//! - [`efficiency`] — scaling/compression calculators and quantization
//! - [`experiments`] — the seeded experiment runners behind the CLI
//!
//! Each major capability has a runnable example under `examples/`; the
//! `desklearn` binary exposes the experiments as subcommands.

pub mod alignment;
pub mod autograd;
pub mod bpe;
pub mod classic;
pub mod efficiency;
pub mod error;
pub mod experiments;
pub mod generative;
pub mod layers;
pub mod losses;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod transformer;

pub use error::{Error, Result};
