//! The file formats exchanged with an external embedding provider: the
//! composed-input file it reads, and the embedding file and token report
//! it writes back.

use item_align::corpus::{compose_input, read_token_report, write_composed, ComposedInput, InputCondition, WhitespaceTokenCounter};
use item_align::embedding::{read_embeddings, write_embeddings, EmbeddingSet};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test A", TABLE1_TEST_A, 9);
    let cond = InputCondition::PromptTableFigureOptionsKeyRationale;
    let inputs: Vec<ComposedInput> = corpus.items()[..3]
        .iter()
        .map(|it| compose_input(it, cond, 512, &WhitespaceTokenCounter))
        .collect();
    let composed = write_composed(&inputs);
    let first: String = composed.lines().next().unwrap_or_default().chars().take(160).collect();
    println!("composed-input file:\n{first}...");

    // stand-in for the provider: a toy 3-d vector per line
    let records = inputs
        .iter()
        .map(|c| (c.id.clone(), vec![c.token_count as f64, c.text.len() as f64, 1.0]))
        .collect();
    let set = EmbeddingSet::new("toy-encoder/mean", cond, 3, records)?;
    let file = write_embeddings(&set);
    print!("embedding file:\n{file}");
    assert_eq!(read_embeddings(&file)?, set);

    let report: String = inputs
        .iter()
        .map(|c| format!("{{\"id\":\"{}\",\"token_count\":{},\"truncated\":false}}\n", c.id, c.token_count + 2))
        .collect();
    let t = read_token_report(&report, cond, 100)?;
    println!("token report: {}/{} over budget 100", t.truncated, t.total);
    Ok(())
}
