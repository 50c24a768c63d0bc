//! Sample size by input condition, on embeddings whose class signal is
//! present only when option text is part of the input.

use item_align::classifiers::{ModelSpec, SoftmaxParams};
use item_align::corpus::{InputCondition, ItemField, Level};
use item_align::embedding::{synthetic_embeddings, EmbeddingSet, PlantedConfig};
use item_align::experiments::{grid_table, run_ablation, AblationGrid};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test A", TABLE1_TEST_A, 4);
    let ids: Vec<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
    let conditions = [
        InputCondition::PromptOnly,
        InputCondition::PromptTableFigure,
        InputCondition::PromptTableFigureOptions,
        InputCondition::PromptTableFigureOptionsKeyRationale,
    ];
    let sets = conditions
        .iter()
        .map(|&cond| {
            let cfg = PlantedConfig {
                n_classes: 10,
                dim: 16,
                class_separation: if cond.includes(ItemField::Options) { 8.0 } else { 0.0 },
                noise_sigma: 1.0,
                overlap_pairs: vec![],
                seed: 4,
            };
            synthetic_embeddings(&ids, &cfg, |id| corpus.get(id).map(|i| i.skill), cond)
        })
        .collect::<item_align::Result<Vec<EmbeddingSet>>>()?;
    let mut grid = AblationGrid::standard(corpus.len(), Level::Skill, ModelSpec::SoftmaxRegression(SoftmaxParams::default()), 4);
    grid.conditions = conditions.to_vec();
    let cells = run_ablation(&grid, &corpus, &sets, 0)?;
    print!("{}", grid_table(&cells).to_markdown());
    Ok(())
}
