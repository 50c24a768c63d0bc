//! PCA, t-SNE and ISOMAP of two skills from two banks; writes CSV and SVG
//! files into the directory given as the first argument.

use std::collections::BTreeMap;
use std::path::PathBuf;

use item_align::corpus::InputCondition;
use item_align::diagnostics::{isomap_project_auto, pca_project, scatter_svg, tsne_project, ProjectionResult, TsneParams, DEFAULT_PALETTE};
use item_align::embedding::{synthetic_embeddings, PlantedConfig};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "projections".into()));
    std::fs::create_dir_all(&out)?;
    let cfg = PlantedConfig {
        n_classes: 10,
        dim: 32,
        class_separation: 10.0,
        noise_sigma: 1.0,
        overlap_pairs: vec![],
        seed: 8,
    };
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut labels = BTreeMap::new();
    for corpus in [table1_corpus("Test A", TABLE1_TEST_A, 8), table1_corpus("Test B", TABLE1_TEST_B, 8)] {
        let members: Vec<_> = corpus.items().iter().filter(|i| i.skill == 3 || i.skill == 7).collect();
        let member_ids: Vec<&str> = members.iter().map(|i| i.id.as_str()).collect();
        let emb = synthetic_embeddings(&member_ids, &cfg, |id| corpus.get(id).map(|i| i.skill), InputCondition::PromptOnly)?;
        for it in members {
            labels.insert(it.id.clone(), format!("{} Skill {}", corpus.name, it.skill + 1));
            rows.push(emb.get(&it.id).expect("embedded").to_vec());
            ids.push(it.id.clone());
        }
    }
    let x = DMatrix::from_fn(rows.len(), cfg.dim, |r, c| rows[r][c]);
    let results: Vec<ProjectionResult> = vec![
        pca_project(&ids, &x, 2)?,
        tsne_project(&ids, &x, &TsneParams { seed: 8, ..TsneParams::default() })?,
        isomap_project_auto(&ids, &x, 5, 2)?,
    ];
    for r in &results {
        let name = r.method.as_str();
        std::fs::write(out.join(format!("{name}.csv")), r.to_csv(|id| labels.get(id).cloned()))?;
        std::fs::write(out.join(format!("{name}.svg")), scatter_svg(r, &labels, &DEFAULT_PALETTE, name)?)?;
        println!("{name}: {:?}", r.meta);
    }
    Ok(())
}
