//! Character-level GPT training on a small corpus.

use std::collections::BTreeMap;
use std::path::Path;

use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::losses::cross_entropy_loss_var;
use crate::optim::Optimizer;
use crate::rng::SplitRng;
use crate::transformer::{generate, GptConfig, GptModel, Sampler};

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub struct CharGptOptions {
    pub steps: usize,
    pub lr: f64,
    pub context: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub sample_len: usize,
    /// Stop once the loss falls below this fraction of the initial loss.
    pub target_ratio: f64,
}

impl Default for CharGptOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 3e-3,
            context: 32,
            d_model: 64,
            n_heads: 4,
            d_ff: 128,
            n_layers: 2,
            sample_len: 200,
            target_ratio: 0.6,
        }
    }
}

/// Character vocabulary: sorted unique characters of the corpus.
struct CharVocab {
    chars: Vec<char>,
    ids: BTreeMap<char, usize>,
}

impl CharVocab {
    fn new(text: &str) -> Self {
        let set: std::collections::BTreeSet<char> = text.chars().collect();
        let chars: Vec<char> = set.into_iter().collect();
        let ids = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self { chars, ids }
    }

    fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.ids[&c]).collect()
    }

    fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.chars[i]).collect()
    }

    fn len(&self) -> usize {
        self.chars.len()
    }
}

/// Train a small decoder-only model to predict the next character of the
/// corpus, logging the loss per step, then generate a greedy sample.
pub fn run_char_gpt(
    config: &ExperimentConfig,
    corpus_path: &Path,
    opts: &CharGptOptions,
) -> Result<ExperimentRun> {
    let text = std::fs::read_to_string(corpus_path)
        .map_err(|e| Error::invalid_argument(format!("unreadable corpus {corpus_path:?}: {e}")))?;
    if text.len() < 1024 {
        return Err(Error::invalid_argument(format!(
            "corpus must be at least 1 KiB, got {} bytes",
            text.len()
        )));
    }
    let vocab = CharVocab::new(&text);
    let ids = vocab.encode(&text);
    if ids.len() < opts.context + 2 {
        return Err(Error::invalid_argument("corpus shorter than one context window"));
    }

    let mut rng = SplitRng::new(config.seed);
    let gpt_config = GptConfig {
        vocab: vocab.len(),
        d_model: opts.d_model,
        n_heads: opts.n_heads,
        d_ff: opts.d_ff,
        n_layers: opts.n_layers,
        max_len: opts.context,
        ..GptConfig::small(vocab.len())
    };
    let model = GptModel::new(gpt_config, &mut rng)?;
    let params = model.params();
    let mut opt = Optimizer::adam(opts.lr)?;

    let mut run = ExperimentRun::new();
    let mut initial_loss = f64::NAN;
    let mut final_loss = f64::NAN;
    let mut steps_run = 0u64;
    let mut reached = false;
    for step in 0..opts.steps {
        let start = rng.below(ids.len() - opts.context - 1);
        let window = &ids[start..start + opts.context];
        let targets = &ids[start + 1..start + opts.context + 1];

        let tape = Tape::new();
        let logits = model.forward(&tape, window)?;
        let loss = cross_entropy_loss_var(&logits, targets)?;
        let value = loss.item()?;
        run.log(step as u64, "loss", value);
        if step == 0 {
            initial_loss = value;
        }
        final_loss = value;
        steps_run = step as u64 + 1;
        tape.backward(&loss)?;
        opt.step_params(&params)?;
        if value < opts.target_ratio * initial_loss {
            reached = true;
            break;
        }
    }

    let prompt = vec![ids[0]];
    let sample = generate(&model, &prompt, opts.sample_len, Sampler::Greedy)?;
    let sample_text = vocab.decode(&sample);

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        crate::layers::save_params(dir.join("model.dlp"), &crate::layers::entries_of(&params))?;
    }

    run.set("vocab_size", vocab.len() as u64);
    run.set("initial_loss", initial_loss);
    run.set("final_loss", final_loss);
    run.set("steps_run", steps_run);
    run.set("reached_target", reached);
    run.set("loss_ratio", final_loss / initial_loss);
    run.set("sample", sample_text);
    run.set("seed", config.seed);
    run.finish(config)
}

/// A 10 KiB repetitive corpus for smoke tests.
#[cfg(test)]
pub(crate) fn repetitive_corpus() -> String {
    let sentence = "the quick brown fox jumps over the lazy dog. ";
    let mut text = String::new();
    while text.len() < 10 * 1024 {
        text.push_str(sentence);
    }
    text
}
