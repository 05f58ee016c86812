//! Byte-pair encoding on the classic three-word corpus: watch the merges
//! happen, then encode and decode.
//!
//! ```sh
//! cargo run -p desklearn --example bpe_tokenizer
//! ```

use desklearn::bpe::{bpe_decode, bpe_encode, bpe_train, MergeTable, TrainOptions};

fn main() -> desklearn::Result<()> {
    let corpus = [("low", 1), ("lowest", 1), ("newer", 1)];
    println!("corpus: {corpus:?}\n");

    for merges in 0..=4 {
        let table = bpe_train(&corpus, merges, &TrainOptions::default())?;
        let tokens = bpe_encode("lowest", &table);
        println!("{merges} merges: rules {:?} -> lowest = {tokens:?}", table.merges);
    }

    let table = bpe_train(&corpus, 3, &TrainOptions::default())?;
    let tokens = bpe_encode("low lowest newer", &table);
    println!("\nencode(\"low lowest newer\") = {tokens:?}");
    println!("decode(...) = {:?}", bpe_decode(&tokens, &table.marker));

    // unknown characters fall back to single-character tokens
    println!("encode(\"lower!\") = {:?}", bpe_encode("lower!", &table));

    // the table serializes to a small text format
    let text = table.to_text();
    println!("\ntable file:\n{text}");
    let reloaded = MergeTable::from_text(&text)?;
    assert_eq!(reloaded.merges, table.merges);
    Ok(())
}
