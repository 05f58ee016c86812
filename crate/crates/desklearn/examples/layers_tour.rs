//! A walk through the layer zoo: linear, activations, convolutions,
//! pooling, normalization, dropout, residual blocks, squeeze-excite,
//! channel shuffle, and a LoRA adapter.
//!
//! ```sh
//! cargo run -p desklearn --example layers_tour
//! ```

use desklearn::autograd::Tape;
use desklearn::layers::{
    activation, conv_output_extent, lora_forward, max_pool2d, residual_block, se_recalibrate,
    shuffle_channels, Activation, Conv2dLayer, DepthwiseSeparable, Init, LinearLayer, LoraAdapter,
    NormLayer, NormMode,
};
use desklearn::rng::SplitRng;
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    let mut rng = SplitRng::new(0);
    let tape = Tape::new();

    let layer = LinearLayer::from_tensors(
        Tensor::from_rows(&[vec![1.0, 2.0]])?,
        Tensor::from_slice(&[3.0]),
    )?;
    let x = tape.leaf(Tensor::from_slice(&[4.0, 5.0]));
    println!("linear [[1,2]]x + [3] at [4,5] -> {:?}", layer.forward(&tape, &x)?.value());

    let v = tape.leaf(Tensor::from_slice(&[-3.0, 2.0]));
    println!("relu(-3, 2)     -> {:?}", activation(Activation::Relu, &v)?.value());
    let logits = tape.leaf(Tensor::from_slice(&[2.0, 1.0]));
    println!("softmax(2, 1)   -> {:?}", activation(Activation::Softmax { axis: 0 }, &logits)?.value());

    // convolution output sizing: H' = floor((H + 2p - k)/s) + 1
    println!("\nconv extent H=5 k=3 s=1 p=0 -> {}", conv_output_extent(5, 3, 1, 0));
    let conv = Conv2dLayer::new(2, 4, 3, 1, 1, 1, Init::Xavier, &mut rng)?;
    let image = tape.leaf(Tensor::rand_uniform(&[2, 6, 6], -1.0, 1.0, &mut rng));
    let feat = conv.forward(&tape, &image)?;
    println!("conv 2->4 ch, k=3, pad 1: {:?} -> {:?}", image.shape(), feat.shape());
    let pooled = max_pool2d(&tape, &feat, 2, 2)?;
    println!("max pool 2x2: -> {:?}", pooled.shape());

    // depthwise separable uses far fewer weights
    let sep = DepthwiseSeparable::new(128, 128, 3, 1, 1, Init::Xavier, &mut rng)?;
    let standard = Conv2dLayer::new(128, 128, 3, 1, 1, 1, Init::Xavier, &mut rng)?;
    println!(
        "\nweights at 128->128, k=3: standard {}, separable {}",
        standard.weight_count(),
        sep.weight_count()
    );

    // normalization standardizes features
    let norm = NormLayer::new(3, NormMode::Batch);
    let batch = tape.leaf(Tensor::rand_uniform(&[16, 3], -4.0, 4.0, &mut rng));
    let normed = norm.forward(&tape, &batch, true)?.value();
    let col0: Vec<f64> = (0..16).map(|r| normed.row(r)[0]).collect();
    let mean: f64 = col0.iter().sum::<f64>() / 16.0;
    println!("\nbatch norm: feature-0 mean after normalize = {mean:.2e}");

    // residual identity path
    let r = tape.leaf(Tensor::from_slice(&[1.0, -1.0]));
    let out = residual_block(&r, |v| Ok(v.mul_scalar(0.0)))?;
    println!("residual with F = 0 keeps x: {:?}", out.value());

    // squeeze-excitation with zero logits halves every channel
    let fm = tape.leaf(Tensor::ones(&[2, 2, 2]));
    let se = se_recalibrate(&fm, |pooled| Ok(pooled.mul_scalar(0.0)))?;
    println!("SE with sigmoid(0) gate: all values {:?}", se.value().data()[0]);

    // channel shuffle permutation and its inverse
    let ch = tape.leaf(Tensor::new(&[4, 1, 1], vec![0.0, 1.0, 2.0, 3.0])?);
    let shuffled = shuffle_channels(&ch, 2)?;
    println!("\nshuffle C=4 g=2: {:?}", shuffled.value().data());
    println!("shuffle again   : {:?}", shuffle_channels(&shuffled, 2)?.value().data());

    // dropout: identity at inference, scaled mask in training
    let d = tape.leaf(Tensor::ones(&[8]));
    let trained = d.dropout(0.5, true, &mut rng)?;
    println!("\ndropout p=0.5 training: {:?}", trained.value().data());

    // a fresh LoRA adapter leaves the base layer untouched (B starts at 0)
    let base = LinearLayer::new(4, 3, Init::Xavier, &mut rng);
    let adapter = LoraAdapter::new(4, 3, 2, 1.0, &mut rng)?;
    base.set_trainable(false);
    let input = tape.leaf(Tensor::rand_uniform(&[4], -1.0, 1.0, &mut rng));
    let plain = base.forward(&tape, &input)?.value();
    let adapted = lora_forward(&tape, &base, &adapter, &input)?.value();
    println!("LoRA fresh adapter matches base: {}", plain == adapted);
    Ok(())
}
