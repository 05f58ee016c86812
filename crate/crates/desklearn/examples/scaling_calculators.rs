//! Scaling and compression arithmetic: parameter counts, vanishing-gradient
//! factors, compound scaling, token budgets, expert gating, pruning, and
//! quantization.
//!
//! ```sh
//! cargo run -p desklearn --example scaling_calculators
//! ```

use desklearn::autograd::Tape;
use desklearn::efficiency::{
    chinchilla_tokens, compound_scale, conv_param_counts, dequantize, fake_quantize,
    mlp_param_count, moe_gate, prune_by_magnitude, quantize, vanishing_factor, QuantParams,
    ScalingCoefficients, CHINCHILLA_TOKENS_PER_PARAM,
};
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    let c = mlp_param_count(150_000, 1_000)?;
    println!("dense 150k -> 1k: {} weights + {} biases", c.weights, c.biases);
    println!(
        "conv 128->128 k=3: standard {} vs separable {} weights",
        conv_param_counts(128, 128, 3, false)?,
        conv_param_counts(128, 128, 3, true)?
    );

    println!("\ngradient attenuation:");
    for (a, l) in [(0.9, 30u32), (0.8, 10), (0.8, 30)] {
        println!("  {a}^{l} = {:.6}", vanishing_factor(a, l)?);
    }

    for phi in [0.0, 1.0, 2.0] {
        let coeffs = ScalingCoefficients::standard(phi)?;
        let dims = compound_scale(16, 32, 224, &coeffs);
        println!(
            "compound phi={phi}: depth {} width {} resolution {}",
            dims.depth, dims.width, dims.resolution
        );
    }

    println!(
        "\n70e9 params at {} tokens/param -> {:.2e} training tokens",
        CHINCHILLA_TOKENS_PER_PARAM,
        chinchilla_tokens(70e9, CHINCHILLA_TOKENS_PER_PARAM)?
    );

    println!("\nMoE gate over logits [2,1,0], top-2: {:?}", moe_gate(&[2.0, 1.0, 0.0], 2)?);

    let w = Tensor::from_slice(&[1.0, -4.0, 0.1, 3.0]);
    let (mask, pruned) = prune_by_magnitude(&w, 0.5)?;
    println!("prune half of {:?}: {:?} (mask {:?})", w.data(), pruned.data(), mask);

    // int8 over ±2.5: the classic mapping
    let qp = QuantParams::symmetric(8, 2.5)?;
    let xs = Tensor::from_slice(&[2.5, -2.5, 0.0, 1.234]);
    let q = quantize(&xs, &qp);
    let back = dequantize(&q, &qp);
    println!("\nint8 symmetric over ±2.5 (scale {:.5}):", qp.scale);
    for ((x, qv), b) in xs.data().iter().zip(&q.values).zip(back.data()) {
        println!("  {x:6} -> {qv:4} -> {b:.5}");
    }

    // fake-quantize keeps training differentiable via the straight-through rule
    let tape = Tape::new();
    let x = tape.leaf(Tensor::from_slice(&[0.3, 5.0]));
    let y = fake_quantize(&x, &qp)?;
    tape.backward(&y.sum_all()?)?;
    println!(
        "fake-quantize [0.3, 5.0]: forward {:?}, gradient {:?} (out-of-range is clamped)",
        y.value().data(),
        x.grad().unwrap().data()
    );
    Ok(())
}
