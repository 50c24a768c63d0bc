//! All nine classifiers on one split, as a Markdown table.

use item_align::corpus::{stratified_split, Fractions, InputCondition, Level};
use item_align::embedding::{synthetic_embeddings, PlantedConfig};
use item_align::experiments::{named_suite, run_model_comparison, runs_table, SplitData};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test A", TABLE1_TEST_A, 3);
    let cfg = PlantedConfig {
        n_classes: 10,
        dim: 16,
        class_separation: 8.0,
        noise_sigma: 1.0,
        overlap_pairs: vec![],
        seed: 3,
    };
    let ids: Vec<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
    let emb = synthetic_embeddings(&ids, &cfg, |id| corpus.get(id).map(|i| i.skill), InputCondition::PromptOnly)?;
    let split = stratified_split(&corpus, Fractions::default(), 3, Level::Skill)?;
    let data = SplitData::from_split(&corpus, &split, &emb, Level::Skill)?;
    let runs = run_model_comparison(&named_suite(), &data, true, 0)?;
    print!("{}", runs_table(&runs).to_markdown());
    Ok(())
}
