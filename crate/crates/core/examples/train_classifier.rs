//! Train softmax regression on planted embeddings, save it, reload it and
//! score the held-out split.

use item_align::classifiers::{ModelSpec, SoftmaxParams, TrainedModel};
use item_align::corpus::{stratified_split, Fractions, InputCondition, Level};
use item_align::embedding::{synthetic_embeddings, PlantedConfig};
use item_align::experiments::{evaluate, fit_model, SplitData};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test A", TABLE1_TEST_A, 1);
    let cfg = PlantedConfig {
        n_classes: 4,
        dim: 32,
        class_separation: 6.0,
        noise_sigma: 1.0,
        overlap_pairs: vec![],
        seed: 1,
    };
    let ids: Vec<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
    let emb = synthetic_embeddings(&ids, &cfg, |id| corpus.get(id).map(|i| i.domain), InputCondition::PromptOnly)?;
    let split = stratified_split(&corpus, Fractions::default(), 1, Level::Domain)?;
    let data = SplitData::from_split(&corpus, &split, &emb, Level::Domain)?;

    let spec = ModelSpec::SoftmaxRegression(SoftmaxParams::default());
    let model = fit_model(&spec, &data.train, data.validation.as_ref(), true)?;
    let history = model.loss_history().unwrap_or_default();
    println!("{} iterations, final loss {:.4}", history.len(), history.last().unwrap_or(&f64::NAN));

    let reloaded = TrainedModel::from_json(&model.to_json())?;
    let r = evaluate(&reloaded, &data.test)?;
    println!("test accuracy {:.3}, weighted F1 {:.3}, kappa {:.3}", r.accuracy, r.weighted_f1, r.kappa);
    Ok(())
}
