//! Parse a corpus file and print its label counts as CSV.

use item_align::corpus::{parse_corpus, summarize, write_corpus, LabelScheme};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| item_align::Error::io(path, e))?,
        None => write_corpus(&table1_corpus("Test A", TABLE1_TEST_A, 1)),
    };
    let corpus = parse_corpus("Test A", &text, &LabelScheme::canonical())?;
    print!("{}", summarize(&corpus).to_csv());
    Ok(())
}
