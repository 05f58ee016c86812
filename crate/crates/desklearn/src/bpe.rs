//! Byte-pair-encoding subword tokenization: training, encoding, decoding.
//!
//! Words are pre-tokenized on whitespace and get an end-of-word marker
//! appended. Training repeatedly merges the most frequent adjacent symbol
//! pair (ties broken lexicographically by `(left, right)`, which makes
//! training deterministic); encoding applies the learned merges in order.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MARKER: &str = "▁";

pub const TABLE_HEADER: &str = "#bpe v1";

/// A pre-tokenized word: its symbols (ending in the marker) and its corpus count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub symbols: Vec<String>,
    pub count: usize,
}

impl Word {
    pub fn new(text: &str, count: usize, marker: &str) -> Result<Self> {
        if text.is_empty() || count == 0 {
            return Err(Error::invalid_argument("word must be non-empty with positive count"));
        }
        let mut symbols: Vec<String> = text.chars().map(String::from).collect();
        symbols.push(marker.to_string());
        Ok(Self { symbols, count })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub marker: String,
    /// Stop early once the best pair occurs only once. Off by default: the
    /// worked corpora keep merging count-1 pairs.
    pub stop_when_unrepeated: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { marker: DEFAULT_MARKER.to_string(), stop_when_unrepeated: false }
    }
}

/// Ordered merge rules plus the vocabulary they can produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTable {
    pub merges: Vec<(String, String)>,
    pub vocab: BTreeSet<String>,
    pub marker: String,
}

impl MergeTable {
    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Serialize as the `#bpe v1` text format: header line, then one merge
    /// per line as `left right`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{TABLE_HEADER}");
        let _ = writeln!(out, "#marker {}", self.marker);
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TABLE_HEADER => {}
            other => {
                return Err(Error::Format(format!(
                    "expected header {TABLE_HEADER:?}, got {other:?}"
                )))
            }
        }
        let mut marker = DEFAULT_MARKER.to_string();
        let mut merges = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(m) = line.strip_prefix("#marker ") {
                marker = m.to_string();
                continue;
            }
            let mut parts = line.splitn(2, ' ');
            match (parts.next(), parts.next()) {
                (Some(l), Some(r)) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()));
                }
                _ => return Err(Error::Format(format!("line {}: expected `left right`", n + 2))),
            }
        }
        let mut vocab = BTreeSet::new();
        vocab.insert(marker.clone());
        for (l, r) in &merges {
            vocab.insert(l.clone());
            vocab.insert(r.clone());
            vocab.insert(format!("{l}{r}"));
        }
        Ok(Self { merges, vocab, marker })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Apply one merge rule left-to-right through a symbol sequence.
fn apply_merge(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut out: Vec<String> = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(std::mem::take(&mut symbols[i]));
            i += 1;
        }
    }
    *symbols = out;
}

/// Learn `num_merges` merge rules from a word -> count corpus.
///
/// Each round counts every adjacent symbol pair (weighted by word count,
/// overlapping occurrences included), merges the most frequent one, and
/// repeats; training stops early when no adjacent pair remains.
pub fn bpe_train(corpus: &[(&str, usize)], num_merges: usize, opts: &TrainOptions) -> Result<MergeTable> {
    if corpus.is_empty() {
        return Err(Error::invalid_argument("empty corpus"));
    }
    let mut words: Vec<Word> = Vec::new();
    let mut vocab = BTreeSet::new();
    vocab.insert(opts.marker.clone());
    for (text, count) in corpus {
        let w = Word::new(text, *count, &opts.marker)?;
        for s in &w.symbols {
            vocab.insert(s.clone());
        }
        words.push(w);
    }

    let mut merges = Vec::with_capacity(num_merges);
    for _ in 0..num_merges {
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        for w in &words {
            for pair in w.symbols.windows(2) {
                *counts.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += w.count;
            }
        }
        // highest count; ties broken by the lexicographically smallest pair
        let Some((pair, best)) = counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
        else {
            break;
        };
        if opts.stop_when_unrepeated && best < 2 {
            break;
        }
        for w in &mut words {
            apply_merge(&mut w.symbols, &pair.0, &pair.1);
        }
        vocab.insert(format!("{}{}", pair.0, pair.1));
        merges.push(pair);
    }
    Ok(MergeTable { merges, vocab, marker: opts.marker.clone() })
}

/// Tokenize: split on whitespace, append the marker to each word, then apply
/// every merge rule in learned order, exhaustively. Unknown characters stay
/// as single-character tokens.
pub fn bpe_encode(text: &str, table: &MergeTable) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        symbols.push(table.marker.clone());
        for (l, r) in &table.merges {
            apply_merge(&mut symbols, l, r);
        }
        tokens.extend(symbols);
    }
    tokens
}

/// Concatenate tokens, turn end-of-word markers into spaces, and trim the
/// trailing space.
pub fn bpe_decode(tokens: &[String], marker: &str) -> String {
    let joined: String = tokens.concat();
    let spaced = joined.replace(marker, " ");
    spaced.trim_end_matches(' ').to_string()
}

/// Count whitespace-separated words of a text, for feeding [`bpe_train`].
pub fn word_counts(text: &str) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for w in text.split_whitespace() {
        *counts.entry(w.to_string()).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book_corpus() -> Vec<(&'static str, usize)> {
        vec![("low", 1), ("lowest", 1), ("newer", 1)]
    }

    fn pairs(merges: &[(String, String)]) -> Vec<(&str, &str)> {
        merges.iter().map(|(l, r)| (l.as_str(), r.as_str())).collect()
    }

    #[test]
    fn worked_corpus_reproduces_the_merge_sequence() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        assert_eq!(pairs(&table.merges), vec![("l", "o"), ("lo", "w"), ("e", "r")]);
    }

    #[test]
    fn zero_merges_gives_empty_table() {
        let table = bpe_train(&book_corpus(), 0, &TrainOptions::default()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn overlapping_pairs_count_per_position() {
        // "aaaa": (a,a) occurs 3 times
        let table = bpe_train(&[("aaaa", 1)], 1, &TrainOptions::default()).unwrap();
        assert_eq!(pairs(&table.merges), vec![("a", "a")]);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(bpe_train(&[], 1, &TrainOptions::default()).is_err());
    }

    #[test]
    fn early_stop_flag() {
        // all pairs in this corpus occur once
        let stopper = TrainOptions { stop_when_unrepeated: true, ..Default::default() };
        let table = bpe_train(&[("abc", 1)], 5, &stopper).unwrap();
        assert!(table.is_empty());
        // default keeps merging
        let table = bpe_train(&[("abc", 1)], 5, &TrainOptions::default()).unwrap();
        assert!(!table.is_empty());
    }

    #[test]
    fn encode_lowest_with_three_merges() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        let tokens = bpe_encode("lowest", &table);
        assert_eq!(tokens, vec!["low", "e", "s", "t", DEFAULT_MARKER]);
    }

    #[test]
    fn encode_whole_word_in_vocab() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        assert!(table.vocab.contains("low"));
        assert_eq!(bpe_encode("low", &table), vec!["low", DEFAULT_MARKER]);
    }

    #[test]
    fn encode_empty_and_unknown() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        assert!(bpe_encode("", &table).is_empty());
        let tokens = bpe_encode("zq", &table);
        assert_eq!(tokens, vec!["z", "q", DEFAULT_MARKER]);
    }

    #[test]
    fn decode_cases() {
        assert_eq!(bpe_decode(&[], DEFAULT_MARKER), "");
        let toks: Vec<String> =
            ["ne", "w", "er", DEFAULT_MARKER].iter().map(|s| s.to_string()).collect();
        assert_eq!(bpe_decode(&toks, DEFAULT_MARKER), "newer");
    }

    #[test]
    fn round_trip_normalizes_whitespace() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        let text = "  low   lowest\tnewer ";
        let tokens = bpe_encode(text, &table);
        assert_eq!(bpe_decode(&tokens, DEFAULT_MARKER), "low lowest newer");
    }

    #[test]
    fn token_count_non_increasing_in_merges() {
        let corpus = vec![("banana", 3), ("bandana", 2), ("cabana", 1)];
        let text = "banana bandana cabana banana";
        let mut last = usize::MAX;
        for merges in 0..12 {
            let table = bpe_train(&corpus, merges, &TrainOptions::default()).unwrap();
            let n = bpe_encode(text, &table).len();
            assert!(n <= last, "{n} > {last} at {merges} merges");
            last = n;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = vec![("abcd", 2), ("bcda", 2), ("cdab", 1)];
        let a = bpe_train(&corpus, 6, &TrainOptions::default()).unwrap();
        let b = bpe_train(&corpus, 6, &TrainOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encoded_tokens_come_from_vocab() {
        let corpus = vec![("hello", 2), ("help", 1), ("yelp", 1)];
        let table = bpe_train(&corpus, 5, &TrainOptions::default()).unwrap();
        for tok in bpe_encode("hello yelp whale", &table) {
            let known = table.vocab.contains(&tok) || tok.chars().count() == 1;
            assert!(known, "token {tok:?} not in vocab and not a single character");
        }
    }

    #[test]
    fn table_text_round_trip() {
        let table = bpe_train(&book_corpus(), 3, &TrainOptions::default()).unwrap();
        let text = table.to_text();
        assert!(text.starts_with(TABLE_HEADER));
        let parsed = MergeTable::from_text(&text).unwrap();
        assert_eq!(parsed.merges, table.merges);
        assert_eq!(parsed.marker, table.marker);
        // parsed vocab covers everything needed to re-encode
        assert_eq!(bpe_encode("lowest", &parsed), bpe_encode("lowest", &table));
    }

    #[test]
    fn table_rejects_bad_header() {
        assert!(MergeTable::from_text("#bpe v2\nl o\n").is_err());
        assert!(MergeTable::from_text("").is_err());
    }

    #[test]
    fn custom_marker() {
        let opts = TrainOptions { marker: "_".to_string(), ..Default::default() };
        let table = bpe_train(&book_corpus(), 3, &opts).unwrap();
        assert_eq!(pairs(&table.merges), vec![("l", "o"), ("lo", "w"), ("e", "r")]);
        let tokens = bpe_encode("low", &table);
        assert_eq!(tokens, vec!["low", "_"]);
        assert_eq!(bpe_decode(&tokens, "_"), "low");
    }
}
