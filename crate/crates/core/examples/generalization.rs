//! Train on one bank, test on another whose skills 4 and 5 sit next to
//! skill 8, and show where the external skill-4 items land.

use item_align::corpus::{InputCondition, Level};
use item_align::embedding::{synthetic_embeddings, OverlapPair, PlantedConfig};
use item_align::experiments::{named_suite, run_generalization, CrossTestSpec};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};

fn main() -> item_align::Result<()> {
    let a = table1_corpus("Test A", TABLE1_TEST_A, 5);
    let b = table1_corpus("Test B", TABLE1_TEST_B, 5);
    let base = PlantedConfig {
        n_classes: 10,
        dim: 32,
        class_separation: 10.0,
        noise_sigma: 1.0,
        overlap_pairs: vec![],
        seed: 5,
    };
    let shifted = PlantedConfig {
        overlap_pairs: [3, 4].map(|moved| OverlapPair { anchor: 7, moved, separation: 0.5 }).to_vec(),
        ..base.clone()
    };
    let embed = |c: &item_align::corpus::Corpus, cfg: &PlantedConfig| {
        let ids: Vec<&str> = c.items().iter().map(|i| i.id.as_str()).collect();
        synthetic_embeddings(&ids, cfg, |id| c.get(id).map(|i| i.skill), InputCondition::PromptTableFigureOptionsKeyRationale)
    };
    let (ea, eb) = (embed(&a, &base)?, embed(&b, &shifted)?);
    let spec = CrossTestSpec {
        train_corpus: a.name.clone(),
        test_corpus: b.name.clone(),
        level: Level::Skill,
        models: named_suite().into_iter().take(3).collect(),
        seed: 5,
        fractions: Default::default(),
        merge_validation: true,
    };
    let result = run_generalization(&spec, (&a, &ea), (&b, &eb), 0)?;
    println!("internal\n{}", result.internal_table().to_markdown());
    println!("external\n{}", result.external_table().to_markdown());
    println!("{}", result.per_class_f1()?.to_markdown());
    let cm = result.external_confusion("Logistic Regression").expect("model ran");
    let row = &cm.counts()[3];
    println!("Test B skill 4 predictions by skill: {row:?}");
    Ok(())
}
