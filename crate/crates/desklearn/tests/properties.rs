//! Property tests over randomized inputs.

use desklearn::autograd::{grad_check, Tape};
use desklearn::bpe::{bpe_decode, bpe_encode, bpe_train, TrainOptions};
use desklearn::efficiency::{dequantize, moe_gate, prune_by_magnitude, quantize, QuantParams};
use desklearn::generative::Flow;
use desklearn::layers::{lora_forward, shuffle_channels, DepthwiseSeparable, Init, LinearLayer, LoraAdapter};
use desklearn::rng::SplitRng;
use desklearn::tensor::{broadcast_shape, Tensor};
use proptest::prelude::*;

fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0..2.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elementwise_identities(xs in small_vec(6)) {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_slice(&xs));
        let zero = tape.leaf(Tensor::zeros(&[6]));
        let one = tape.leaf(Tensor::ones(&[6]));
        let plus_zero = a.add(&zero).unwrap().value();
        let times_one = a.mul(&one).unwrap().value();
        let minus_self = a.sub(&a).unwrap().value();
        prop_assert_eq!(plus_zero.data(), &xs[..]);
        prop_assert_eq!(times_one.data(), &xs[..]);
        prop_assert_eq!(minus_self.data(), &[0.0; 6][..]);
    }

    #[test]
    fn broadcast_shape_is_commutative(a in proptest::collection::vec(1usize..4, 1..4),
                                      b in proptest::collection::vec(1usize..4, 1..4)) {
        let ab = broadcast_shape(&a, &b);
        let ba = broadcast_shape(&b, &a);
        match (ab, ba) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "broadcastability must be symmetric"),
        }
    }

    #[test]
    fn softmax_rows_are_distributions(xs in small_vec(12)) {
        let tape = Tape::new();
        let t = tape.leaf(Tensor::new(&[3, 4], xs).unwrap());
        let s = t.softmax(1).unwrap().value();
        let _keep = &s;
        for r in 0..3 {
            let sum: f64 = s.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sum_gradient_is_ones(xs in small_vec(5)) {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&xs));
        let loss = x.sum_all().unwrap();
        tape.backward(&loss).unwrap();
        let grad = x.grad().unwrap();
        prop_assert_eq!(grad.data(), &[1.0; 5][..]);
    }

    #[test]
    fn product_rule_matches_finite_differences(xs in small_vec(3), ys in small_vec(3)) {
        let report = grad_check(
            |_, v| v[0].mul(&v[1])?.tanh()?.sum_all(),
            &[Tensor::from_slice(&xs), Tensor::from_slice(&ys)],
            1e-5,
        ).unwrap();
        prop_assert!(report.within(1e-4), "{:?}", report);
    }

    #[test]
    fn bpe_round_trip(words in proptest::collection::vec("[a-z]{1,8}", 1..6), merges in 0usize..12) {
        let text = words.join(" ");
        let counts = desklearn::bpe::word_counts(&text);
        let corpus: Vec<(&str, usize)> = counts.iter().map(|(w, c)| (w.as_str(), *c)).collect();
        let table = bpe_train(&corpus, merges, &TrainOptions::default()).unwrap();
        let tokens = bpe_encode(&text, &table);
        prop_assert_eq!(bpe_decode(&tokens, &table.marker), text.clone());
        // every token is in the vocabulary or is a single character
        for tok in &tokens {
            prop_assert!(table.vocab.contains(tok) || tok.chars().count() == 1);
        }
    }

    #[test]
    fn bpe_token_count_non_increasing(words in proptest::collection::vec("[a-z]{1,6}", 1..5)) {
        let text = words.join(" ");
        let counts = desklearn::bpe::word_counts(&text);
        let corpus: Vec<(&str, usize)> = counts.iter().map(|(w, c)| (w.as_str(), *c)).collect();
        let mut last = usize::MAX;
        for merges in 0..8 {
            let table = bpe_train(&corpus, merges, &TrainOptions::default()).unwrap();
            let n = bpe_encode(&text, &table).len();
            prop_assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn shuffle_then_inverse_is_identity(seed in 0u64..1000, groups in prop::sample::select(vec![1usize, 2, 3, 6])) {
        let mut rng = SplitRng::new(seed);
        let tape = Tape::new();
        let x = tape.leaf(Tensor::rand_uniform(&[6, 2, 2], -1.0, 1.0, &mut rng));
        let shuffled = shuffle_channels(&x, groups).unwrap();
        let back = shuffle_channels(&shuffled, 6 / groups).unwrap().value();
        let original = x.value();
        prop_assert_eq!(back.data(), original.data());
    }

    #[test]
    fn quantization_round_trip_bound(bits in 2u32..9, lo in -3.0..-0.1f64, width in 0.2..6.0f64, seed in 0u64..500) {
        let qp = QuantParams::affine(bits, lo, lo + width).unwrap();
        let mut rng = SplitRng::new(seed);
        for _ in 0..50 {
            let x = rng.uniform_in(lo, lo + width);
            let back = dequantize(&quantize(&Tensor::from_slice(&[x]), &qp), &qp);
            prop_assert!((back.data()[0] - x).abs() <= qp.scale / 2.0 + 1e-12);
        }
    }

    #[test]
    fn moe_gate_sparse_distribution(seed in 0u64..1000, e in 2usize..9) {
        let mut rng = SplitRng::new(seed);
        let k = 1 + rng.below(e);
        let logits: Vec<f64> = (0..e).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let w = moe_gate(&logits, k).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().filter(|&&v| v != 0.0).count() <= k);
    }

    #[test]
    fn prune_zero_count_is_exact(seed in 0u64..1000, n in 1usize..30, f in 0.0..1.0f64) {
        let mut rng = SplitRng::new(seed);
        let w = Tensor::rand_uniform(&[n], -2.0, 2.0, &mut rng);
        let (mask, pruned) = prune_by_magnitude(&w, f).unwrap();
        let zeros = mask.iter().filter(|&&m| !m).count();
        prop_assert_eq!(zeros, (f * n as f64).floor() as usize);
        for (i, &keep) in mask.iter().enumerate() {
            prop_assert_eq!(pruned.data()[i], if keep { w.data()[i] } else { 0.0 });
        }
    }

    #[test]
    fn flow_round_trip(seed in 0u64..300, dims in prop::sample::select(vec![2usize, 4, 8]), layers in 1usize..5) {
        let mut rng = SplitRng::new(seed);
        let flow = Flow::alternating(dims, layers, 8, &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::rand_uniform(&[dims], -2.0, 2.0, &mut rng));
        let (z, ld_inv) = flow.inverse(&tape, &x).unwrap();
        let (back, ld_fwd) = flow.forward(&tape, &z).unwrap();
        prop_assert!(back.value().max_abs_diff(&x.value()) < 1e-10);
        // inverse log-det negates the forward log-det at the matching point
        prop_assert!((ld_inv.item().unwrap() + ld_fwd.item().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn lora_and_separable_gradients(seed in 0u64..200) {
        let mut rng = SplitRng::new(seed);
        // LoRA forward differentiates through base and adapter
        let base = LinearLayer::new(3, 2, Init::Xavier, &mut rng);
        let adapter = LoraAdapter::new(3, 2, 1, 0.7, &mut rng).unwrap();
        adapter.b.set_value(Tensor::rand_uniform(&[2, 1], -1.0, 1.0, &mut rng));
        let x0 = Tensor::rand_uniform(&[3], -1.0, 1.0, &mut rng);
        let report = grad_check(
            |tape, v| lora_forward(tape, &base, &adapter, &v[0])?.powi(2).sum_all(),
            &[x0],
            1e-5,
        ).unwrap();
        prop_assert!(report.within(1e-4));

        // depthwise-separable conv input gradient
        let sep = DepthwiseSeparable::new(2, 3, 3, 1, 1, Init::Xavier, &mut rng).unwrap();
        let x0 = Tensor::rand_uniform(&[2, 3, 3], -1.0, 1.0, &mut rng);
        let report = grad_check(
            |tape, v| sep.forward(tape, &v[0])?.powi(2).sum_all(),
            &[x0],
            1e-5,
        ).unwrap();
        prop_assert!(report.within(1e-4));
    }
}
