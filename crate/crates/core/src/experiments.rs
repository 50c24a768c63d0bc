//! Experiment designs over embedded corpora: the sample-size by
//! input-condition ablation grid, side-by-side model comparison, and
//! train-on-one-bank, test-on-another generalization.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, Dataset, ModelSpec, TrainedModel};
use crate::corpus::{stratified_split, subsample, Corpus, Fractions, InputCondition, Level, Split, SplitAssignment};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::metrics::{self, ClassificationReport, ConfusionMatrix};
use crate::seed;
use crate::table::{fmt3, fmt_full, Table};

/// Features and labels for every item of `corpus`, in corpus order.
pub fn build_dataset(corpus: &Corpus, embeddings: &EmbeddingSet, level: Level) -> Result<Dataset> {
    let ids: Vec<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
    let features = embeddings.matrix_for(&ids)?;
    let labels = corpus.items().iter().map(|i| i.label(level)).collect();
    Dataset::new(features, labels, corpus.scheme().labels(level).to_vec())
}

fn stack(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    let (na, nb, d) = (a.len(), b.len(), a.dim());
    let features = nalgebra::DMatrix::from_fn(na + nb, d, |r, c| {
        if r < na {
            a.features()[(r, c)]
        } else {
            b.features()[(r - na, c)]
        }
    });
    let labels = a.labels().iter().chain(b.labels()).cloned().collect();
    Dataset::new(features, labels, a.class_names().to_vec())
}

/// Train `spec`. The MLP uses `validation` for best-epoch selection; other
/// models train on train and validation together when `merge_validation`
/// is set, and on the train rows alone otherwise.
pub fn fit_model(
    spec: &ModelSpec,
    train: &Dataset,
    validation: Option<&Dataset>,
    merge_validation: bool,
) -> Result<TrainedModel> {
    match (spec, validation) {
        (ModelSpec::Mlp(_), v) => classifiers::train_with_validation(spec, train, v),
        (_, Some(v)) if merge_validation => classifiers::train(spec, &stack(train, v)?),
        _ => classifiers::train(spec, train),
    }
}

pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<ClassificationReport> {
    let pred = model.predict(test.features())?;
    metrics::report(&metrics::confusion(test.labels(), &pred.labels, test.class_names())?)
}

/// Train, validation and test sets drawn from one split assignment.
pub struct SplitData {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub test: Dataset,
}

impl SplitData {
    pub fn from_split(corpus: &Corpus, split: &SplitAssignment, embeddings: &EmbeddingSet, level: Level) -> Result<Self> {
        let part = |s: Split| build_dataset(&split.select(corpus, &[s]), embeddings, level);
        let validation = if split.count(Split::Validation) > 0 {
            Some(part(Split::Validation)?)
        } else {
            None
        };
        Ok(Self {
            train: part(Split::Train)?,
            validation,
            test: part(Split::Test)?,
        })
    }

    /// Number of items a non-MLP model trains on.
    pub fn training_size(&self, merge_validation: bool) -> usize {
        self.train.len() + if merge_validation { self.validation.as_ref().map_or(0, Dataset::len) } else { 0 }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub model: ModelSpec,
}

pub fn named_suite() -> Vec<NamedModel> {
    classifiers::standard_suite()
        .into_iter()
        .map(|(name, model)| NamedModel { name, model })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub total_sizes: Vec<usize>,
    pub conditions: Vec<InputCondition>,
    pub level: Level,
    pub model: ModelSpec,
    pub seed: u64,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default = "default_true")]
    pub merge_validation: bool,
}

impl AblationGrid {
    /// Sizes 500, 750, 1000 (those below the corpus size) plus the full
    /// corpus, all nine conditions.
    pub fn standard(corpus_len: usize, level: Level, model: ModelSpec, seed: u64) -> Self {
        let mut total_sizes: Vec<usize> = [500, 750, 1000].into_iter().filter(|&s| s < corpus_len).collect();
        total_sizes.push(corpus_len);
        Self {
            total_sizes,
            conditions: InputCondition::ALL.to_vec(),
            level,
            model,
            seed,
            fractions: Fractions::default(),
            merge_validation: true,
        }
    }
}

/// Seed of one grid cell; depends only on the master seed and the cell key.
pub fn cell_seed(master: u64, size: usize, condition: InputCondition) -> u64 {
    seed::derive_seed(master, &[b"cell", &(size as u64).to_le_bytes(), condition.name().as_bytes()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCell {
    pub size: usize,
    pub condition: InputCondition,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub report: ClassificationReport,
    pub wall_time: Duration,
}

fn find_set(embeddings: &[EmbeddingSet], condition: InputCondition) -> Result<&EmbeddingSet> {
    embeddings
        .iter()
        .find(|e| e.header().condition == condition)
        .ok_or_else(|| Error::InvalidArgument(format!("no embeddings for condition `{condition}`")))
}

fn run_cell(grid: &AblationGrid, corpus: &Corpus, set: &EmbeddingSet, size: usize, condition: InputCondition) -> Result<ExperimentCell> {
    let start = Instant::now();
    let seed = cell_seed(grid.seed, size, condition);
    let sub = subsample(corpus, size, seed::derive_seed(seed, &[b"subsample"]))?;
    let split = stratified_split(&sub, grid.fractions, seed::derive_seed(seed, &[b"split"]), grid.level)?;
    let data = SplitData::from_split(&sub, &split, set, grid.level)?;
    let model = fit_model(&grid.model, &data.train, data.validation.as_ref(), grid.merge_validation)?;
    let report = evaluate(&model, &data.test)?;
    Ok(ExperimentCell {
        size,
        condition,
        seed,
        train_size: data.training_size(grid.merge_validation),
        test_size: data.test.len(),
        report,
        wall_time: start.elapsed(),
    })
}

/// Every (size, condition) cell: stratified subsample, per-cell split,
/// train, evaluate on the held-out test rows. Cells run on up to `workers`
/// threads (0 = all cores) and are returned size-major in grid order;
/// results do not depend on the worker count.
pub fn run_ablation(grid: &AblationGrid, corpus: &Corpus, embeddings: &[EmbeddingSet], workers: usize) -> Result<Vec<ExperimentCell>> {
    if grid.total_sizes.is_empty() || grid.conditions.is_empty() {
        return Err(Error::InvalidArgument("grid needs at least one size and one condition".into()));
    }
    grid.fractions.validate()?;
    grid.model.validate()?;
    if let Some(&s) = grid.total_sizes.iter().find(|&&s| s == 0 || s > corpus.len()) {
        return Err(Error::InvalidArgument(format!(
            "grid size {s} outside 1..={}",
            corpus.len()
        )));
    }
    let mut keys = Vec::new();
    for &size in &grid.total_sizes {
        for &condition in &grid.conditions {
            keys.push((size, condition, find_set(embeddings, condition)?));
        }
    }
    pool(workers)?.install(|| {
        keys.par_iter()
            .map(|&(size, condition, set)| run_cell(grid, corpus, set, size, condition))
            .collect()
    })
}

/// Columns size, condition, accuracy, precision, recall, weighted_f1, kappa.
pub fn grid_csv(cells: &[ExperimentCell]) -> String {
    let mut t = Table::new(["size", "condition", "accuracy", "precision", "recall", "weighted_f1", "kappa"]);
    for c in cells {
        let r = &c.report;
        t.push([
            c.size.to_string(),
            c.condition.name().to_string(),
            fmt_full(r.accuracy),
            fmt_full(r.precision),
            fmt_full(r.recall),
            fmt_full(r.weighted_f1),
            fmt_full(r.kappa),
        ]);
    }
    t.to_csv()
}

/// Size-outer, condition-inner layout; the size column shows the number of
/// training items and is printed once per size block.
pub fn grid_table(cells: &[ExperimentCell]) -> Table {
    let mut t = Table::new([
        "Sample Sizes",
        "Input Conditions",
        "Accuracy",
        "Precision",
        "Recall",
        "Weighted F1",
        "Cohen's Kappa",
    ]);
    let mut last = None;
    for c in cells {
        let size = if last == Some(c.size) { String::new() } else { c.train_size.to_string() };
        last = Some(c.size);
        let r = &c.report;
        t.push([
            size,
            c.condition.name().to_string(),
            fmt3(r.accuracy),
            fmt3(r.precision),
            fmt3(r.recall),
            fmt3(r.weighted_f1),
            fmt3(r.kappa),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub name: String,
    pub report: ClassificationReport,
    pub model: TrainedModel,
}

/// One row per model in input order, each trained on the same data.
pub fn run_model_comparison(models: &[NamedModel], data: &SplitData, merge_validation: bool, workers: usize) -> Result<Vec<ModelRun>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("model list is empty".into()));
    }
    pool(workers)?.install(|| {
        models
            .par_iter()
            .map(|m| {
                let model = fit_model(&m.model, &data.train, data.validation.as_ref(), merge_validation)?;
                let report = evaluate(&model, &data.test)?;
                Ok(ModelRun {
                    name: m.name.clone(),
                    report,
                    model,
                })
            })
            .collect()
    })
}

pub fn runs_table(runs: &[ModelRun]) -> Table {
    let rows: Vec<(String, &ClassificationReport)> = runs.iter().map(|r| (r.name.clone(), &r.report)).collect();
    metrics::comparison_table(&rows)
}

pub fn runs_csv(runs: &[ModelRun]) -> String {
    let rows: Vec<(String, &ClassificationReport)> = runs.iter().map(|r| (r.name.clone(), &r.report)).collect();
    metrics::metrics_csv(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTestSpec {
    pub train_corpus: String,
    pub test_corpus: String,
    pub level: Level,
    pub models: Vec<NamedModel>,
    pub seed: u64,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default = "default_true")]
    pub merge_validation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRun {
    pub name: String,
    /// On the held-out test rows of the training bank.
    pub internal: ClassificationReport,
    /// On every item of the external bank.
    pub external: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationResult {
    pub spec: CrossTestSpec,
    pub runs: Vec<CrossRun>,
}

impl GeneralizationResult {
    fn rows(&self, external: bool) -> Vec<(String, &ClassificationReport)> {
        self.runs
            .iter()
            .map(|r| (r.name.clone(), if external { &r.external } else { &r.internal }))
            .collect()
    }

    pub fn internal_table(&self) -> Table {
        metrics::comparison_table(&self.rows(false))
    }

    pub fn external_table(&self) -> Table {
        metrics::comparison_table(&self.rows(true))
    }

    pub fn external_csv(&self) -> String {
        metrics::metrics_csv(&self.rows(true))
    }

    /// Per-class F1 on the external bank, one row per model.
    pub fn per_class_f1(&self) -> Result<Table> {
        metrics::per_class_f1_table(&self.rows(true), self.spec.level.title())
    }

    pub fn external_confusion(&self, model: &str) -> Option<&ConfusionMatrix> {
        self.runs.iter().find(|r| r.name == model).map(|r| &r.external.confusion)
    }
}

/// Check that two embedding sets were produced the same way.
pub fn check_compatible(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    let (ha, hb) = (a.header(), b.header());
    if ha.provider != hb.provider || ha.condition != hb.condition || ha.dim != hb.dim {
        return Err(Error::Incompatible(format!(
            "embeddings differ: ({}, {}, dim {}) vs ({}, {}, dim {})",
            ha.provider, ha.condition, ha.dim, hb.provider, hb.condition, hb.dim
        )));
    }
    Ok(())
}

/// Train every model on the training portion of bank A, then evaluate on
/// A's held-out rows and on all of bank B. Compatibility is checked before
/// any training.
pub fn run_generalization(
    spec: &CrossTestSpec,
    train_bank: (&Corpus, &EmbeddingSet),
    test_bank: (&Corpus, &EmbeddingSet),
    workers: usize,
) -> Result<GeneralizationResult> {
    let (a, a_emb) = train_bank;
    let (b, b_emb) = test_bank;
    if a.name != spec.train_corpus || b.name != spec.test_corpus {
        return Err(Error::InvalidArgument(format!(
            "expected corpora `{}` and `{}`, got `{}` and `{}`",
            spec.train_corpus, spec.test_corpus, a.name, b.name
        )));
    }
    if a.scheme() != b.scheme() {
        return Err(Error::Scheme(format!("`{}` and `{}` use different label schemes", a.name, b.name)));
    }
    check_compatible(a_emb, b_emb)?;
    if spec.models.is_empty() {
        return Err(Error::InvalidArgument("model list is empty".into()));
    }
    let split = stratified_split(a, spec.fractions, seed::derive_seed(spec.seed, &[b"generalize-split"]), spec.level)?;
    let data = SplitData::from_split(a, &split, a_emb, spec.level)?;
    let external = build_dataset(b, b_emb, spec.level)?;
    let runs = pool(workers)?.install(|| {
        spec.models
            .par_iter()
            .map(|m| {
                let model = fit_model(&m.model, &data.train, data.validation.as_ref(), spec.merge_validation)?;
                Ok(CrossRun {
                    name: m.name.clone(),
                    internal: evaluate(&model, &data.test)?,
                    external: evaluate(&model, &external)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(GeneralizationResult {
        spec: spec.clone(),
        runs,
    })
}

/// Map a skill-level confusion matrix onto domains.
pub fn collapse_to_domains(cm: &ConfusionMatrix, scheme: &crate::corpus::LabelScheme) -> Result<ConfusionMatrix> {
    let mapping: Vec<usize> = (0..scheme.n_classes(Level::Skill)).map(|s| scheme.domain_of(s)).collect();
    cm.collapse(&mapping, scheme.domains().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{synthetic_embeddings, PlantedConfig};
    use crate::fixtures;

    fn planted(corpus: &Corpus, condition: InputCondition, separation: f64) -> EmbeddingSet {
        let ids: Vec<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
        let cfg = PlantedConfig {
            n_classes: 10,
            dim: 16,
            class_separation: separation,
            noise_sigma: 1.0,
            overlap_pairs: vec![],
            seed: 4,
        };
        synthetic_embeddings(&ids, &cfg, |id| corpus.get(id).map(|i| i.skill), condition).unwrap()
    }

    #[test]
    fn grid_is_complete_and_worker_independent() {
        let corpus = fixtures::table1_corpus("Test A", [20; 10], 1);
        let sets: Vec<EmbeddingSet> = [InputCondition::PromptOnly, InputCondition::PromptTableFigureOptions]
            .iter()
            .map(|&c| planted(&corpus, c, 8.0))
            .collect();
        let grid = AblationGrid {
            total_sizes: vec![100, 200],
            conditions: vec![InputCondition::PromptOnly, InputCondition::PromptTableFigureOptions],
            level: Level::Skill,
            model: ModelSpec::GaussianNb(Default::default()),
            seed: 9,
            fractions: Fractions::default(),
            merge_validation: true,
        };
        let one = run_ablation(&grid, &corpus, &sets, 1).unwrap();
        let four = run_ablation(&grid, &corpus, &sets, 4).unwrap();
        assert_eq!(one.len(), 4);
        assert_eq!(grid_csv(&one), grid_csv(&four));
        assert_eq!(one[0].train_size, 80);
        let md = grid_table(&one).to_markdown();
        assert!(md.contains("| 80 | prompt_only |"));
        assert!(md.contains("|  | prompt_table_figure_options |"));
    }

    #[test]
    fn missing_condition_is_an_error() {
        let corpus = fixtures::table1_corpus("Test A", [10; 10], 1);
        let sets = vec![planted(&corpus, InputCondition::PromptOnly, 8.0)];
        let mut grid = AblationGrid::standard(corpus.len(), Level::Skill, ModelSpec::GaussianNb(Default::default()), 1);
        assert_eq!(grid.total_sizes, vec![100]);
        grid.conditions = vec![InputCondition::PromptTableFigure];
        assert!(run_ablation(&grid, &corpus, &sets, 1).is_err());
    }

    #[test]
    fn skill_collapse_never_lowers_accuracy() {
        let corpus = fixtures::table1_corpus("Test A", [15; 10], 2);
        let set = planted(&corpus, InputCondition::PromptOnly, 3.0);
        let split = stratified_split(&corpus, Fractions::default(), 3, Level::Skill).unwrap();
        let data = SplitData::from_split(&corpus, &split, &set, Level::Skill).unwrap();
        let model = fit_model(&ModelSpec::Knn(Default::default()), &data.train, data.validation.as_ref(), true).unwrap();
        let skill = evaluate(&model, &data.test).unwrap();
        let domain = metrics::report(&collapse_to_domains(&skill.confusion, corpus.scheme()).unwrap()).unwrap();
        assert!(domain.accuracy >= skill.accuracy);
    }

    #[test]
    fn mismatched_conditions_rejected_before_training() {
        let a = fixtures::table1_corpus("Test A", [5; 10], 1);
        let b = fixtures::table1_corpus("Test B", [5; 10], 2);
        let ea = planted(&a, InputCondition::PromptOnly, 8.0);
        let eb = planted(&b, InputCondition::PromptTableFigure, 8.0);
        let spec = CrossTestSpec {
            train_corpus: "Test A".into(),
            test_corpus: "Test B".into(),
            level: Level::Skill,
            models: named_suite(),
            seed: 0,
            fractions: Fractions::default(),
            merge_validation: true,
        };
        assert!(matches!(run_generalization(&spec, (&a, &ea), (&b, &eb), 1), Err(Error::Incompatible(_))));
    }
}
