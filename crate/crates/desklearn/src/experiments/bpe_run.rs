//! BPE subcommands: train a merge table from a corpus, encode text, decode
//! tokens.

use std::path::Path;

use crate::bpe::{bpe_decode, bpe_encode, bpe_train, word_counts, MergeTable, TrainOptions};
use crate::error::Result;

use super::{ExperimentConfig, ExperimentRun};

/// The worked three-word corpus.
pub const BOOK_CORPUS: &str = "low lowest newer";

/// Train a merge table from a corpus file (default: the three-word corpus)
/// and save it when an output path is given.
pub fn run_bpe_train(
    config: &ExperimentConfig,
    corpus_path: Option<&Path>,
    num_merges: usize,
    table_out: Option<&Path>,
) -> Result<ExperimentRun> {
    let text = match corpus_path {
        Some(p) => std::fs::read_to_string(p)?,
        None => BOOK_CORPUS.to_string(),
    };
    let counts = word_counts(&text);
    let corpus: Vec<(&str, usize)> = counts.iter().map(|(w, c)| (w.as_str(), *c)).collect();
    let table = bpe_train(&corpus, num_merges, &TrainOptions::default())?;

    let mut run = ExperimentRun::new();
    run.set("distinct_words", corpus.len() as u64);
    run.set("merges_requested", num_merges as u64);
    run.set("merges_learned", table.len() as u64);
    run.set("vocab_size", table.vocab.len() as u64);
    let merges: Vec<Vec<String>> = table
        .merges
        .iter()
        .map(|(l, r)| vec![l.clone(), r.clone()])
        .collect();
    run.set("merges", serde_json::to_value(&merges)?);
    if let Some(out) = table_out {
        table.save(out)?;
        run.set("table_path", out.display().to_string());
    }
    run.finish(config)
}

/// Encode text with a saved merge table.
pub fn run_bpe_encode(config: &ExperimentConfig, table_path: &Path, text: &str) -> Result<ExperimentRun> {
    let table = MergeTable::load(table_path)?;
    let tokens = bpe_encode(text, &table);
    let mut run = ExperimentRun::new();
    run.set("token_count", tokens.len() as u64);
    run.set("tokens", serde_json::to_value(&tokens)?);
    run.set("encoded", tokens.join(" "));
    run.finish(config)
}

/// Decode whitespace-separated tokens with a saved merge table.
pub fn run_bpe_decode(config: &ExperimentConfig, table_path: &Path, tokens: &str) -> Result<ExperimentRun> {
    let table = MergeTable::load(table_path)?;
    let toks: Vec<String> = tokens.split_whitespace().map(str::to_string).collect();
    let text = bpe_decode(&toks, &table.marker);
    let mut run = ExperimentRun::new();
    run.set("text", text);
    run.finish(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn book_corpus_merges_match() {
        let config = ExperimentConfig::new("bpe", 0);
        let run = run_bpe_train(&config, None, 3, None).unwrap();
        let merges = run.summary()["merges"].clone();
        let expect = serde_json::json!([["l", "o"], ["lo", "w"], ["e", "r"]]);
        assert_eq!(merges, expect);
    }

    #[test]
    fn train_encode_decode_round_trip_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.txt");
        std::fs::write(&corpus, "banana bandana banana").unwrap();
        let table = dir.path().join("merges.bpe");
        let config = ExperimentConfig::new("bpe", 0);
        run_bpe_train(&config, Some(&corpus), 5, Some(&table)).unwrap();
        assert!(table.exists());

        let enc = run_bpe_encode(&config, &table, "banana").unwrap();
        let tokens = enc.text("encoded").unwrap().to_string();
        let dec = run_bpe_decode(&config, &table, &tokens).unwrap();
        assert_eq!(dec.text("text").unwrap(), "banana");
    }
}
