//! Save and restore model parameters with the binary container format.
//!
//! ```sh
//! cargo run -p desklearn --example checkpoint_params
//! ```

use desklearn::autograd::Tape;
use desklearn::layers::{entries_of, load_params, restore_into, save_params};
use desklearn::rng::SplitRng;
use desklearn::transformer::{GptConfig, GptModel};

fn main() -> desklearn::Result<()> {
    let mut rng = SplitRng::new(7);
    let cfg = GptConfig {
        vocab: 11,
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_layers: 2,
        max_len: 8,
        ..GptConfig::small(11)
    };
    let model = GptModel::new(cfg, &mut rng)?;
    let params = model.params();
    println!("model has {} parameter tensors", params.len());

    let dir = std::env::temp_dir().join("desklearn_checkpoint");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("gpt.dlp");
    save_params(&path, &entries_of(&params))?;
    println!("saved to {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    // a second model with different weights converges to the same logits
    // once the checkpoint is restored into it
    let mut other_rng = SplitRng::new(99);
    let twin = GptModel::new(cfg, &mut other_rng)?;
    let ids = [1usize, 2, 3];
    let before = twin.forward(&Tape::new(), &ids)?.value();
    restore_into(&path, &twin.params())?;
    let after = twin.forward(&Tape::new(), &ids)?.value();
    let original = model.forward(&Tape::new(), &ids)?.value();
    println!("logits differ before restore : {}", before.max_abs_diff(&original) > 0.0);
    println!("logits match after restore   : {}", after.max_abs_diff(&original) == 0.0);

    // the index is readable on its own
    for (name, tensor) in load_params(&path)?.iter().take(4) {
        println!("  {name}: {:?}", tensor.shape());
    }
    Ok(())
}
