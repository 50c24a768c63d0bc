//! Write the two synthetic item banks used by the demo config.
//!
//! `cargo run --example write_fixtures -- <dir> [seed]`

use std::path::PathBuf;

use item_align::corpus::write_corpus;
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "demo".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    std::fs::create_dir_all(&dir)?;
    for (name, counts, file) in [
        ("Test A", TABLE1_TEST_A, "test_a.jsonl"),
        ("Test B", TABLE1_TEST_B, "test_b.jsonl"),
    ] {
        let corpus = table1_corpus(name, counts, seed);
        std::fs::write(dir.join(file), write_corpus(&corpus))?;
        println!("{}: {} items", dir.join(file).display(), corpus.len());
    }
    Ok(())
}
