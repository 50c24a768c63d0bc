//! Smoothed-histogram KL divergence from one group to every skill of the
//! other bank, in one shared 2-D PCA basis.

use item_align::corpus::{Corpus, InputCondition};
use item_align::diagnostics::{kl_table, Bank, GridSpec, GroupSelector};
use item_align::embedding::{synthetic_embeddings, EmbeddingSet, OverlapPair, PlantedConfig};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};

fn embed(c: &Corpus, pairs: Vec<OverlapPair>) -> item_align::Result<EmbeddingSet> {
    let cfg = PlantedConfig {
        n_classes: 10,
        dim: 64,
        class_separation: 10.0,
        noise_sigma: 1.0,
        overlap_pairs: pairs,
        seed: 7,
    };
    let ids: Vec<&str> = c.items().iter().map(|i| i.id.as_str()).collect();
    synthetic_embeddings(&ids, &cfg, |id| c.get(id).map(|i| i.skill), InputCondition::PromptOnly)
}

fn main() -> item_align::Result<()> {
    let a = table1_corpus("Test A", TABLE1_TEST_A, 7);
    let b = table1_corpus("Test B", TABLE1_TEST_B, 7);
    let ea = embed(&a, vec![])?;
    let eb = embed(&b, vec![OverlapPair { anchor: 7, moved: 3, separation: 0.5 }])?;
    let banks = [Bank { corpus: &a, embeddings: &ea }, Bank { corpus: &b, embeddings: &eb }];
    let from = GroupSelector::skill("Test B", 3);
    let targets: Vec<GroupSelector> = (0..10).map(|i| GroupSelector::skill("Test A", i)).collect();
    let spec = GridSpec::default();
    let table = kl_table(&from, &targets, &banks, &spec)?;
    print!("{}", table.to_markdown());
    let nearest = table.argmin(|s| s.index != 3).expect("targets remain");
    println!("closest other skill: {}", nearest.to);
    Ok(())
}
