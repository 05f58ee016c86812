//! Train a tiny character-level GPT on a repetitive corpus and watch the
//! loss fall, then generate text greedily and with temperature sampling.
//!
//! ```sh
//! cargo run -p desklearn --example char_gpt
//! ```

use desklearn::experiments::{run_char_gpt, CharGptOptions, ExperimentConfig};

fn main() -> desklearn::Result<()> {
    let sentence = "the quick brown fox jumps over the lazy dog. ";
    let mut corpus = String::new();
    while corpus.len() < 10 * 1024 {
        corpus.push_str(sentence);
    }
    let dir = std::env::temp_dir().join("desklearn_char_gpt");
    std::fs::create_dir_all(&dir)?;
    let corpus_path = dir.join("corpus.txt");
    std::fs::write(&corpus_path, &corpus)?;

    let config = ExperimentConfig::new("char-gpt", 0);
    let opts = CharGptOptions { steps: 800, target_ratio: 0.05, ..Default::default() };
    let run = run_char_gpt(&config, &corpus_path, &opts)?;

    println!("vocab size   : {}", run.value("vocab_size").unwrap());
    println!("initial loss : {:.4}  (ln vocab)", run.value("initial_loss").unwrap());
    println!("final loss   : {:.4}", run.value("final_loss").unwrap());
    println!("steps run    : {}", run.value("steps_run").unwrap());
    println!("\nloss curve (every 10th step):");
    for (i, v) in run.series("loss").iter().enumerate().step_by(10) {
        println!("  step {i:4}: {v:.4}");
    }
    println!("\ngreedy sample:\n{}", run.text("sample").unwrap());
    Ok(())
}
