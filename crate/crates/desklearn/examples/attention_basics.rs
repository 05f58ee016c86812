//! The attention stack piece by piece: scaled dot-product weights, causal
//! masking, sinusoidal positions, multi-head projection, and the
//! position-wise FFN.
//!
//! ```sh
//! cargo run -p desklearn --example attention_basics
//! ```

use desklearn::autograd::Tape;
use desklearn::rng::SplitRng;
use desklearn::tensor::Tensor;
use desklearn::transformer::{
    attention_weights, causal_mask, ffn, scaled_dot_product_attention, sinusoidal_pe,
    AttentionConfig, MultiHeadAttention,
};

fn main() -> desklearn::Result<()> {
    let tape = Tape::new();

    // one query against two keys whose scaled scores are [2, 1]
    let q = tape.leaf(Tensor::from_rows(&[vec![1.0]])?);
    let k = tape.leaf(Tensor::from_rows(&[vec![2.0], vec![1.0]])?);
    let v = tape.leaf(Tensor::from_rows(&[vec![10.0], vec![20.0]])?);
    let w = attention_weights(&q, &k, None)?;
    println!("attention weights for scores [2, 1]: {:?}", w.value().data());
    let out = scaled_dot_product_attention(&q, &k, &v, None)?;
    println!("blended value: {:?}", out.value().data());

    // the look-ahead mask forbids attending to the future
    let mask = causal_mask(4)?;
    println!("\ncausal mask (1 = can attend):");
    for row in mask.row_strings() {
        println!("  {row}");
    }
    let mut rng = SplitRng::new(1);
    let x = tape.leaf(Tensor::rand_uniform(&[4, 2], -1.0, 1.0, &mut rng));
    let weights = attention_weights(&x, &x, Some(&mask))?.value();
    println!("masked self-attention weights (each row sums to 1):");
    for r in 0..4 {
        let row: Vec<String> = weights.row(r).iter().map(|v| format!("{v:.3}")).collect();
        println!("  [{}]", row.join(", "));
    }

    // positions get unique sinusoidal fingerprints
    println!("\nPE(0, 8)  = {:?}", sinusoidal_pe(0, 8)?.data());
    println!("PE(1, 8)  = {:?}", sinusoidal_pe(1, 8)?.data().iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());

    // multi-head attention with 2 heads over d_model = 4
    let cfg = AttentionConfig::new(4, 2, 8)?;
    let mha = MultiHeadAttention::new(cfg, &mut rng);
    let seq = tape.leaf(Tensor::rand_uniform(&[3, 4], -1.0, 1.0, &mut rng));
    let attended = mha.self_forward(&tape, &seq, Some(&causal_mask(3)?))?;
    println!("\nmulti-head self-attention: {:?} -> {:?}", seq.shape(), attended.shape());

    // FFN: W2 max(0, W1 x + b1) + b2
    let w1 = tape.leaf(Tensor::from_rows(&[vec![2.0]])?);
    let b1 = tape.leaf(Tensor::from_slice(&[1.0]));
    let w2 = tape.leaf(Tensor::from_rows(&[vec![3.0]])?);
    let b2 = tape.leaf(Tensor::from_slice(&[0.5]));
    let y = ffn(&tape.leaf(Tensor::from_slice(&[2.0])), &w1, &b1, &w2, &b2)?;
    println!("\nffn(2) with w1=2 b1=1 w2=3 b2=0.5 -> {:?}", y.value().data());
    Ok(())
}
