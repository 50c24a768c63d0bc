//! Average pairwise cosine between label groups of two banks, in the
//! between/within layout.

use item_align::corpus::{Corpus, InputCondition, Level};
use item_align::diagnostics::{alignment_pairs, cosine_table, Bank};
use item_align::embedding::{synthetic_embeddings, EmbeddingSet, OverlapPair, PlantedConfig};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};

fn embed(c: &Corpus, pairs: Vec<OverlapPair>) -> item_align::Result<EmbeddingSet> {
    let cfg = PlantedConfig {
        n_classes: 10,
        dim: 64,
        class_separation: 10.0,
        noise_sigma: 1.0,
        overlap_pairs: pairs,
        seed: 6,
    };
    let ids: Vec<&str> = c.items().iter().map(|i| i.id.as_str()).collect();
    synthetic_embeddings(&ids, &cfg, |id| c.get(id).map(|i| i.skill), InputCondition::PromptOnly)
}

fn main() -> item_align::Result<()> {
    let a = table1_corpus("Test A", TABLE1_TEST_A, 6);
    let b = table1_corpus("Test B", TABLE1_TEST_B, 6);
    let ea = embed(&a, vec![])?;
    let eb = embed(&b, [3, 4].map(|moved| OverlapPair { anchor: 7, moved, separation: 0.5 }).to_vec())?;
    let banks = [Bank { corpus: &a, embeddings: &ea }, Bank { corpus: &b, embeddings: &eb }];
    let table = cosine_table(&alignment_pairs("Test A", "Test B", Level::Skill, &[3, 4], 7), &banks)?;
    print!("{}", table.to_markdown());
    Ok(())
}
