//! Command-line driver: one JSON run config, one subcommand per pipeline
//! stage, every artifact written under the output directory and recorded
//! with its SHA-256 in `manifest.json`.
//!
//! Relative paths in a config file resolve against the file's directory;
//! without a config file they resolve against the working directory.
//! Command-line flags override config values.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ModelSpec, SoftmaxParams, TrainedModel};
use crate::corpus::{
    compose_input, parse_corpus, read_split, read_token_report, stratified_split, summarize,
    truncation_report, write_composed, write_corpus, write_split, Corpus, Fractions, InputCondition,
    ItemField, LabelScheme, Level, SplitAssignment, TruncationReport, WhitespaceTokenCounter,
};
use crate::diagnostics::{
    alignment_pairs, cosine_table, isomap_project, isomap_project_auto, kl_table, pca_project,
    resolve, scatter_svg, tsne_project, Bank, GridSpec, GroupSelector, Method, ProjectionResult,
    TsneParams, DEFAULT_PALETTE,
};
use crate::embedding::{l2_normalize, read_embeddings, synthetic_embeddings, write_embeddings, EmbeddingSet, OverlapPair, PlantedConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    self, evaluate, fit_model, grid_csv, grid_table, named_suite, run_ablation, run_generalization,
    run_model_comparison, runs_csv, runs_table, AblationGrid, CrossTestSpec, NamedModel, SplitData,
};
use crate::metrics::{self, ClassificationReport};
use crate::seed;

pub const MANIFEST: &str = "manifest.json";
/// Condition for everything except the ablation grid; question text is left
/// out since its templates repeat within a label.
pub const DEFAULT_CONDITION: InputCondition = InputCondition::PromptTableFigureOptionsKeyRationale;

#[derive(Debug, Parser)]
#[command(name = "item-align", version, about = "Item alignment experiments from text embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `domain` or `skill`.
    #[arg(long, global = true)]
    pub level: Option<Level>,
    /// Input condition name, e.g. `prompt_only`.
    #[arg(long, global = true)]
    pub condition: Option<InputCondition>,
    /// Worker threads for grid cells and model runs (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub token_budget: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate corpus files and write canonical copies.
    Ingest,
    /// Label counts per corpus.
    Summarize,
    /// Composed-input files and truncation fractions.
    Compose,
    /// Stratified train/validation/test assignment per corpus.
    Split,
    /// Planted-structure embeddings for every corpus.
    EmbedSynthetic,
    /// Fit the configured models on the training corpus and save them.
    Train,
    /// Score saved models on the training corpus's test split.
    Evaluate,
    /// Sample-size by input-condition grid.
    Ablate,
    /// All configured models on one split.
    Compare,
    /// Train on one corpus, test on the other.
    Generalize,
    /// Average pairwise cosine between label groups.
    DiagnoseCosine,
    /// Density KL divergence from one group to several.
    DiagnoseKl,
    /// 2-D projection of label groups as CSV and SVG.
    Project {
        #[arg(long)]
        method: Option<Method>,
        /// Raise ISOMAP's k until the neighborhood graph is connected.
        #[arg(long)]
        auto_k: bool,
    },
    /// Concatenate the Markdown artifacts into `report.md`.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Summarize => "summarize",
            Command::Compose => "compose",
            Command::Split => "split",
            Command::EmbedSynthetic => "embed-synthetic",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
            Command::Compare => "compare",
            Command::Generalize => "generalize",
            Command::DiagnoseCosine => "diagnose-cosine",
            Command::DiagnoseKl => "diagnose-kl",
            Command::Project { .. } => "project",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
}

/// An embedding file for one corpus; the condition is read from its header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingEntry {
    pub corpus: String,
    pub path: PathBuf,
}

/// A provider token report for one corpus under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenReportEntry {
    pub corpus: String,
    pub condition: InputCondition,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Overlap pairs per corpus name; class indices are zero-based.
    #[serde(default)]
    pub overlap_pairs: BTreeMap<String, Vec<OverlapPair>>,
    /// Give conditions without option text zero class separation.
    #[serde(default)]
    pub option_signal_only: bool,
    /// Conditions to generate. Defaults to all nine when
    /// `option_signal_only` is set and to the run condition otherwise.
    #[serde(default)]
    pub conditions: Option<Vec<InputCondition>>,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            class_separation: default_separation(),
            noise_sigma: default_sigma(),
            overlap_pairs: BTreeMap::new(),
            option_signal_only: false,
            conditions: None,
        }
    }
}

fn default_dim() -> usize {
    64
}
fn default_separation() -> f64 {
    10.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_budget() -> usize {
    512
}
fn default_level() -> Level {
    Level::Skill
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub total_sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub conditions: Option<Vec<InputCondition>>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineConfig {
    /// Explicit pair list; when absent the focus/anchor layout is used.
    #[serde(default)]
    pub pairs: Option<Vec<(GroupSelector, GroupSelector)>>,
    #[serde(default = "default_focus")]
    pub focus: Vec<usize>,
    #[serde(default = "default_anchor")]
    pub anchor: usize,
}

fn default_focus() -> Vec<usize> {
    vec![3, 4]
}
fn default_anchor() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlConfig {
    pub from: GroupSelector,
    pub to: Vec<GroupSelector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub groups: Vec<GroupSelector>,
    #[serde(default)]
    pub tsne: TsneParams,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub auto_k: bool,
}

fn default_method() -> Method {
    Method::Tsne
}
fn default_k() -> usize {
    10
}

/// Everything a run needs. Optional sections are filled with defaults
/// before any command runs, and the filled config is what the manifest
/// records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub scheme: Option<LabelScheme>,
    #[serde(default)]
    pub corpora: Vec<CorpusEntry>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingEntry>,
    /// Split files per corpus name; missing corpora are split from the seed.
    #[serde(default)]
    pub splits: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub token_reports: Vec<TokenReportEntry>,
    #[serde(default)]
    pub train_corpus: Option<String>,
    #[serde(default)]
    pub test_corpus: Option<String>,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default = "default_budget")]
    pub token_budget: usize,
    #[serde(default = "default_level")]
    pub level: Level,
    #[serde(default)]
    pub condition: Option<InputCondition>,
    /// L2-normalize embeddings after loading.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_true")]
    pub merge_validation: bool,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub models: Option<Vec<NamedModel>>,
    #[serde(default)]
    pub planted: Option<PlantedSpec>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub cosine: Option<CosineConfig>,
    #[serde(default)]
    pub kl: Option<KlConfig>,
    #[serde(default)]
    pub density: GridSpec,
    #[serde(default)]
    pub projection: Option<ProjectionConfig>,
}

impl RunConfig {
    pub fn from_json(source: &str) -> Result<Self> {
        serde_json::from_str(source).map_err(|e| Error::Config(e.to_string()))
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(l) = o.level {
            self.level = l;
        }
        if let Some(c) = o.condition {
            self.condition = Some(c);
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(b) = o.token_budget {
            self.token_budget = b;
        }
    }

    /// Fill every optional section with its default.
    fn fill_defaults(&mut self, corpus_len: usize) -> Result<()> {
        let seed = self.seed.ok_or_else(|| Error::Config("`seed` is required".into()))?;
        self.fractions.validate()?;
        if self.token_budget == 0 {
            return Err(Error::Config("token budget must be at least 1".into()));
        }
        if self.out.is_none() {
            return Err(Error::Config("an output directory is required (`out` or --out)".into()));
        }
        let names: Vec<String> = self.corpora.iter().map(|c| c.name.clone()).collect();
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::Config("corpus names must be unique".into()));
        }
        if self.train_corpus.is_none() {
            self.train_corpus = names.first().cloned();
        }
        if self.test_corpus.is_none() {
            self.test_corpus = names.get(1).cloned();
        }
        for name in self.train_corpus.iter().chain(&self.test_corpus) {
            if !names.contains(name) {
                return Err(Error::Config(format!("no corpus named `{name}`")));
            }
        }
        if self.scheme.is_none() {
            self.scheme = Some(LabelScheme::canonical());
        }
        if self.condition.is_none() {
            self.condition = Some(DEFAULT_CONDITION);
        }
        if self.models.is_none() {
            self.models = Some(named_suite());
        }
        for m in self.models.iter().flatten() {
            m.model.validate()?;
        }
        if self.planted.is_none() {
            self.planted = Some(PlantedSpec::default());
        }
        let grid = self.grid.get_or_insert(GridConfig {
            total_sizes: None,
            conditions: None,
            model: None,
        });
        if grid.total_sizes.is_none() || grid.conditions.is_none() {
            let std = AblationGrid::standard(corpus_len.max(1), self.level, ModelSpec::SoftmaxRegression(SoftmaxParams::default()), seed);
            grid.total_sizes.get_or_insert(std.total_sizes);
            grid.conditions.get_or_insert(std.conditions);
        }
        grid.model.get_or_insert(ModelSpec::SoftmaxRegression(SoftmaxParams::default()));
        if self.cosine.is_none() {
            self.cosine = Some(CosineConfig {
                pairs: None,
                focus: default_focus(),
                anchor: default_anchor(),
            });
        }
        if let (Some(a), Some(b)) = (&self.train_corpus, &self.test_corpus) {
            if self.kl.is_none() {
                let n = self.scheme.as_ref().expect("filled").n_classes(self.level);
                self.kl = Some(KlConfig {
                    from: GroupSelector::new(b.clone(), self.level, 3.min(n - 1)),
                    to: (0..n).map(|i| GroupSelector::new(a.clone(), self.level, i)).collect(),
                });
            }
            let proj = self.projection.get_or_insert(ProjectionConfig {
                method: default_method(),
                groups: Vec::new(),
                tsne: TsneParams::default(),
                k_neighbors: default_k(),
                auto_k: false,
            });
            if proj.groups.is_empty() {
                for c in [a, b] {
                    for i in [3, 7] {
                        proj.groups.push(GroupSelector::new(c.clone(), self.level, i));
                    }
                }
            }
            proj.tsne.seed = seed::derive_seed(seed, &[b"tsne"]);
        }
        Ok(())
    }
}

fn validated_scheme(s: &LabelScheme) -> Result<LabelScheme> {
    LabelScheme::new(s.domains().to_vec(), s.skills().to_vec(), (0..s.skills().len()).map(|k| s.domain_of(k)).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Artifact path relative to the output directory → SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    /// Resolved config of the last run of each command.
    pub commands: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// File-name-safe form of a corpus or model name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    s.trim_matches('-').to_string()
}

struct Workspace {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    scheme: LabelScheme,
    inputs: BTreeSet<PathBuf>,
    manifest: Manifest,
    corpora: Vec<Corpus>,
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Workspace {
    fn open(overrides: &Overrides) -> Result<Self> {
        let (mut cfg, base) = match &overrides.config {
            Some(path) => {
                let cfg = RunConfig::from_json(&read_text(path)?)?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, dir)
            }
            None => (
                RunConfig::from_json("{\"seed\":null}")?,
                PathBuf::from("."),
            ),
        };
        let from_cli_out = overrides.out.is_some();
        cfg.apply(overrides);
        let scheme = validated_scheme(cfg.scheme.as_ref().unwrap_or(&LabelScheme::canonical()))?;
        let resolve_in = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let mut corpora = Vec::new();
        let mut inputs = BTreeSet::new();
        for entry in &cfg.corpora {
            let path = resolve_in(&entry.path);
            inputs.insert(absolute(&path));
            corpora.push(parse_corpus(&entry.name, &read_text(&path)?, &scheme)?);
        }
        let train_len = cfg
            .train_corpus
            .as_ref()
            .and_then(|n| corpora.iter().find(|c| &c.name == n))
            .or(corpora.first())
            .map_or(0, Corpus::len);
        cfg.fill_defaults(train_len)?;
        let out_raw = cfg.out.clone().expect("filled");
        let out = if from_cli_out || out_raw.is_absolute() { out_raw } else { base.join(out_raw) };
        for p in cfg.embeddings.iter().map(|e| &e.path).chain(cfg.splits.values()).chain(cfg.token_reports.iter().map(|t| &t.path)) {
            inputs.insert(absolute(&resolve_in(p)));
        }
        let out_abs = absolute(&out);
        if inputs.contains(&out_abs) {
            return Err(Error::Config("output directory coincides with an input path".into()));
        }
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let manifest = Manifest::load(&out)?;
        Ok(Self {
            cfg,
            base,
            out,
            scheme,
            inputs,
            manifest,
            corpora,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.expect("filled")
    }

    fn condition(&self) -> InputCondition {
        self.cfg.condition.expect("filled")
    }

    fn input_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        let path = self.out.join(rel);
        if self.inputs.contains(&absolute(&path)) {
            return Err(Error::Config(format!("refusing to overwrite input `{}`", path.display())));
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn finish(&mut self, command: &str) -> Result<()> {
        let resolved = serde_json::to_value(&self.cfg).expect("config serializes");
        self.manifest.commands.insert(command.to_string(), resolved);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        let path = self.out.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn require_corpora(&self) -> Result<()> {
        if self.corpora.is_empty() {
            return Err(Error::Config("no corpora configured".into()));
        }
        Ok(())
    }

    fn corpus(&self, name: &str) -> Result<&Corpus> {
        self.corpora
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("no corpus named `{name}`")))
    }

    fn train_name(&self) -> Result<String> {
        self.require_corpora()?;
        Ok(self.cfg.train_corpus.clone().expect("filled when corpora exist"))
    }

    fn test_name(&self) -> Result<String> {
        self.cfg
            .test_corpus
            .clone()
            .ok_or_else(|| Error::Config("a second corpus is required".into()))
    }

    /// Configured embedding file for `(corpus, condition)`, or the file
    /// `embed-synthetic` writes under the output directory.
    fn embeddings(&self, corpus: &Corpus, condition: InputCondition) -> Result<EmbeddingSet> {
        let mut set = None;
        for entry in self.cfg.embeddings.iter().filter(|e| e.corpus == corpus.name) {
            let s = read_embeddings(&read_text(&self.input_path(&entry.path))?)?;
            if s.header().condition == condition {
                set = Some(s);
                break;
            }
        }
        let set = match set {
            Some(s) => s,
            None => {
                let path = self.out.join(embedding_rel(&corpus.name, condition));
                if !path.exists() {
                    return Err(Error::MissingEmbedding(format!(
                        "no embeddings for corpus `{}` under condition `{condition}`",
                        corpus.name
                    )));
                }
                read_embeddings(&read_text(&path)?)?
            }
        };
        if self.cfg.normalize {
            l2_normalize(&set)
        } else {
            Ok(set)
        }
    }

    fn split(&self, corpus: &Corpus) -> Result<SplitAssignment> {
        match self.cfg.splits.get(&corpus.name) {
            Some(p) => SplitAssignment::from_map(corpus, read_split(&read_text(&self.input_path(p))?)?),
            None => stratified_split(corpus, self.cfg.fractions, split_seed(self.seed(), &corpus.name), self.cfg.level),
        }
    }

    fn models(&self) -> &[NamedModel] {
        self.cfg.models.as_deref().expect("filled")
    }

    fn train_data(&self) -> Result<(Corpus, SplitData)> {
        let corpus = self.corpus(&self.train_name()?)?.clone();
        let emb = self.embeddings(&corpus, self.condition())?;
        let split = self.split(&corpus)?;
        let data = SplitData::from_split(&corpus, &split, &emb, self.cfg.level)?;
        Ok((corpus, data))
    }
}

fn split_seed(master: u64, corpus: &str) -> u64 {
    seed::derive_seed(master, &[b"split", corpus.as_bytes()])
}

pub fn embedding_rel(corpus: &str, condition: InputCondition) -> String {
    format!("embeddings/{}/{}.emb", slug(corpus), condition.name())
}

fn truncation_csv(reports: &[TruncationReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "token_budget", "truncated", "total", "fraction"]).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.condition.name().to_string(),
            r.token_budget.to_string(),
            r.truncated.to_string(),
            r.total.to_string(),
            r.fraction_display(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn ingest(ws: &mut Workspace) -> Result<()> {
    ws.require_corpora()?;
    for c in ws.corpora.clone() {
        ws.write(&format!("ingest/{}.jsonl", slug(&c.name)), write_corpus(&c))?;
    }
    Ok(())
}

fn summarize_cmd(ws: &mut Workspace) -> Result<()> {
    ws.require_corpora()?;
    for c in ws.corpora.clone() {
        ws.write(&format!("summary/{}.csv", slug(&c.name)), summarize(&c).to_csv())?;
    }
    Ok(())
}

fn compose(ws: &mut Workspace, explicit_condition: bool) -> Result<()> {
    ws.require_corpora()?;
    let conditions: Vec<InputCondition> = if explicit_condition {
        vec![ws.condition()]
    } else {
        InputCondition::ALL.to_vec()
    };
    let budget = ws.cfg.token_budget;
    for c in ws.corpora.clone() {
        let dir = format!("composed/{}", slug(&c.name));
        let mut reports = Vec::new();
        for &cond in &conditions {
            let inputs: Vec<_> = c.items().iter().map(|it| compose_input(it, cond, budget, &WhitespaceTokenCounter)).collect();
            ws.write(&format!("{dir}/{}.jsonl", cond.name()), write_composed(&inputs))?;
            reports.push(truncation_report(&c, cond, budget)?);
        }
        ws.write(&format!("{dir}/truncation.csv"), truncation_csv(&reports))?;
        let provided: Vec<TruncationReport> = ws
            .cfg
            .token_reports
            .iter()
            .filter(|t| t.corpus == c.name)
            .map(|t| read_token_report(&read_text(&ws.input_path(&t.path))?, t.condition, budget))
            .collect::<Result<_>>()?;
        if !provided.is_empty() {
            ws.write(&format!("{dir}/truncation_provider.csv"), truncation_csv(&provided))?;
        }
    }
    Ok(())
}

fn split_cmd(ws: &mut Workspace) -> Result<()> {
    ws.require_corpora()?;
    for c in ws.corpora.clone() {
        let s = ws.split(&c)?;
        ws.write(&format!("splits/{}.jsonl", slug(&c.name)), write_split(&s))?;
    }
    Ok(())
}

fn embed_synthetic(ws: &mut Workspace, explicit_condition: bool) -> Result<()> {
    ws.require_corpora()?;
    let spec = ws.cfg.planted.clone().expect("filled");
    let conditions = match (&spec.conditions, explicit_condition) {
        (Some(c), false) => c.clone(),
        (_, true) => vec![ws.condition()],
        (None, false) if spec.option_signal_only => InputCondition::ALL.to_vec(),
        (None, false) => vec![ws.condition()],
    };
    let level = ws.cfg.level;
    let base_seed = seed::derive_seed(ws.seed(), &[b"planted"]);
    for name in spec.overlap_pairs.keys() {
        ws.corpus(name)?;
    }
    for c in ws.corpora.clone() {
        let ids: Vec<&str> = c.items().iter().map(|i| i.id.as_str()).collect();
        for &cond in &conditions {
            let separation = if spec.option_signal_only && !cond.includes(ItemField::Options) {
                0.0
            } else {
                spec.class_separation
            };
            let cfg = PlantedConfig {
                n_classes: ws.scheme.n_classes(level),
                dim: spec.dim,
                class_separation: separation,
                noise_sigma: spec.noise_sigma,
                overlap_pairs: spec.overlap_pairs.get(&c.name).cloned().unwrap_or_default(),
                seed: base_seed,
            };
            let set = synthetic_embeddings(&ids, &cfg, |id| c.get(id).map(|it| it.label(level)), cond)?;
            ws.write(&embedding_rel(&c.name, cond), write_embeddings(&set))?;
        }
    }
    Ok(())
}

fn model_rel(name: &str) -> String {
    format!("models/{}.json", slug(name))
}

fn train_cmd(ws: &mut Workspace) -> Result<()> {
    let (_, data) = ws.train_data()?;
    let merge = ws.cfg.merge_validation;
    for m in ws.models().to_vec() {
        let model = fit_model(&m.model, &data.train, data.validation.as_ref(), merge)?;
        ws.write(&model_rel(&m.name), model.to_json())?;
    }
    Ok(())
}

fn evaluate_cmd(ws: &mut Workspace) -> Result<()> {
    let (_, data) = ws.train_data()?;
    let mut rows: Vec<(String, ClassificationReport)> = Vec::new();
    for m in ws.models().to_vec() {
        let path = ws.out.join(model_rel(&m.name));
        let model = TrainedModel::from_json(&read_text(&path)?)?;
        let report = evaluate(&model, &data.test)?;
        ws.write(&format!("evaluate/confusion/{}.csv", slug(&m.name)), report.confusion.to_csv())?;
        rows.push((m.name.clone(), report));
    }
    let refs: Vec<(String, &ClassificationReport)> = rows.iter().map(|(n, r)| (n.clone(), r)).collect();
    ws.write("evaluate/metrics.csv", metrics::metrics_csv(&refs))?;
    ws.write("evaluate/metrics.md", metrics::comparison_table(&refs).to_markdown())?;
    Ok(())
}

fn ablate(ws: &mut Workspace) -> Result<()> {
    let corpus = ws.corpus(&ws.train_name()?)?.clone();
    let g = ws.cfg.grid.clone().expect("filled");
    let grid = AblationGrid {
        total_sizes: g.total_sizes.expect("filled"),
        conditions: g.conditions.expect("filled"),
        level: ws.cfg.level,
        model: g.model.expect("filled"),
        seed: ws.seed(),
        fractions: ws.cfg.fractions,
        merge_validation: ws.cfg.merge_validation,
    };
    let sets = grid.conditions.iter().map(|&c| ws.embeddings(&corpus, c)).collect::<Result<Vec<_>>>()?;
    let cells = run_ablation(&grid, &corpus, &sets, ws.cfg.workers)?;
    ws.write("ablation/grid.csv", grid_csv(&cells))?;
    ws.write("ablation/grid.md", grid_table(&cells).to_markdown())?;
    Ok(())
}

fn compare(ws: &mut Workspace) -> Result<()> {
    let (_, data) = ws.train_data()?;
    let runs = run_model_comparison(ws.models(), &data, ws.cfg.merge_validation, ws.cfg.workers)?;
    ws.write("compare/metrics.csv", runs_csv(&runs))?;
    ws.write("compare/metrics.md", runs_table(&runs).to_markdown())?;
    Ok(())
}

fn generalize(ws: &mut Workspace) -> Result<()> {
    let (a, b) = (ws.corpus(&ws.train_name()?)?.clone(), ws.corpus(&ws.test_name()?)?.clone());
    let cond = ws.condition();
    let (ea, eb) = (ws.embeddings(&a, cond)?, ws.embeddings(&b, cond)?);
    let spec = CrossTestSpec {
        train_corpus: a.name.clone(),
        test_corpus: b.name.clone(),
        level: ws.cfg.level,
        models: ws.models().to_vec(),
        seed: ws.seed(),
        fractions: ws.cfg.fractions,
        merge_validation: ws.cfg.merge_validation,
    };
    let result = run_generalization(&spec, (&a, &ea), (&b, &eb), ws.cfg.workers)?;
    ws.write("generalize/internal.md", result.internal_table().to_markdown())?;
    ws.write("generalize/external.md", result.external_table().to_markdown())?;
    ws.write("generalize/external.csv", result.external_csv())?;
    let f1 = result.per_class_f1()?;
    ws.write("generalize/per_class_f1.md", f1.to_markdown())?;
    ws.write("generalize/per_class_f1.csv", f1.to_csv())?;
    for run in &result.runs {
        let cm = &run.external.confusion;
        ws.write(&format!("generalize/confusion/{}.csv", slug(&run.name)), cm.to_csv())?;
        if spec.level == Level::Skill {
            let domains = experiments::collapse_to_domains(cm, &ws.scheme)?;
            ws.write(&format!("generalize/confusion/{}.domain.csv", slug(&run.name)), domains.to_csv())?;
        }
    }
    Ok(())
}

/// Corpora paired with their embeddings under the run condition.
fn load_banks(ws: &Workspace) -> Result<Vec<(Corpus, EmbeddingSet)>> {
    ws.require_corpora()?;
    let cond = ws.condition();
    ws.corpora.iter().map(|c| Ok((c.clone(), ws.embeddings(c, cond)?))).collect()
}

fn banks(loaded: &[(Corpus, EmbeddingSet)]) -> Vec<Bank<'_>> {
    loaded.iter().map(|(c, e)| Bank { corpus: c, embeddings: e }).collect()
}

fn diagnose_cosine(ws: &mut Workspace) -> Result<()> {
    let cfg = ws.cfg.cosine.clone().expect("filled");
    let pairs = match cfg.pairs {
        Some(p) => p,
        None => alignment_pairs(&ws.train_name()?, &ws.test_name()?, ws.cfg.level, &cfg.focus, cfg.anchor),
    };
    let loaded = load_banks(ws)?;
    let table = cosine_table(&pairs, &banks(&loaded))?;
    ws.write("diagnostics/cosine.csv", table.to_csv())?;
    ws.write("diagnostics/cosine.md", table.to_markdown())?;
    Ok(())
}

fn diagnose_kl(ws: &mut Workspace) -> Result<()> {
    let cfg = ws
        .cfg
        .kl
        .clone()
        .ok_or_else(|| Error::Config("`kl` needs a source and targets (or two corpora)".into()))?;
    let loaded = load_banks(ws)?;
    let table = kl_table(&cfg.from, &cfg.to, &banks(&loaded), &ws.cfg.density)?;
    ws.write("diagnostics/kl.csv", table.to_csv())?;
    ws.write("diagnostics/kl.md", table.to_markdown())?;
    ws.write("diagnostics/kl_grid.json", serde_json::to_string_pretty(&table.grid).expect("grid serializes") + "\n")?;
    Ok(())
}

fn project(ws: &mut Workspace, method: Option<Method>, auto_k: bool) -> Result<()> {
    let proj = ws
        .cfg
        .projection
        .as_mut()
        .ok_or_else(|| Error::Config("`projection` needs groups (or two corpora)".into()))?;
    if let Some(m) = method {
        proj.method = m;
    }
    proj.auto_k |= auto_k;
    let proj = proj.clone();
    if proj.groups.is_empty() {
        return Err(Error::Config("projection group list is empty".into()));
    }
    let loaded = load_banks(ws)?;
    let b = banks(&loaded);
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = BTreeMap::new();
    for sel in &proj.groups {
        let g = resolve(&b, sel)?;
        for (i, id) in g.ids.iter().enumerate() {
            if labels.insert(id.clone(), sel.to_string()).is_some() {
                return Err(Error::InvalidArgument(format!("item `{id}` appears in two projection groups")));
            }
            ids.push(id.clone());
            rows.push(g.vectors.row(i).iter().cloned().collect());
        }
    }
    let dim = rows[0].len();
    let x = nalgebra::DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    let result: ProjectionResult = match proj.method {
        Method::Pca => pca_project(&ids, &x, 2)?,
        Method::Tsne => tsne_project(&ids, &x, &proj.tsne)?,
        Method::Isomap if proj.auto_k => isomap_project_auto(&ids, &x, proj.k_neighbors, 2)?,
        Method::Isomap => isomap_project(&ids, &x, proj.k_neighbors, 2)?,
    };
    let name = proj.method.as_str();
    ws.write(&format!("projections/{name}.csv"), result.to_csv(|id| labels.get(id).cloned()))?;
    let title = format!("{} projection", name.to_uppercase());
    ws.write(&format!("projections/{name}.svg"), scatter_svg(&result, &labels, &DEFAULT_PALETTE, &title)?)?;
    ws.write(&format!("projections/{name}.meta.json"), serde_json::to_string_pretty(&result.meta).expect("meta serializes") + "\n")?;
    Ok(())
}

fn report(ws: &mut Workspace) -> Result<()> {
    let sections: Vec<String> = ws
        .manifest
        .artifacts
        .keys()
        .filter(|k| k.ends_with(".md") && k.as_str() != "report.md")
        .cloned()
        .collect();
    if sections.is_empty() {
        return Err(Error::Empty("no Markdown artifacts to report; run other commands first".into()));
    }
    let mut doc = String::from("# Run report\n");
    for rel in sections {
        let body = read_text(&ws.out.join(&rel))?;
        doc.push_str(&format!("\n## {rel}\n\n{body}"));
    }
    ws.write("report.md", doc)
}

/// Run one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut ws = Workspace::open(&cli.overrides)?;
    let explicit_condition = cli.overrides.condition.is_some();
    match &cli.command {
        Command::Ingest => ingest(&mut ws)?,
        Command::Summarize => summarize_cmd(&mut ws)?,
        Command::Compose => compose(&mut ws, explicit_condition)?,
        Command::Split => split_cmd(&mut ws)?,
        Command::EmbedSynthetic => embed_synthetic(&mut ws, explicit_condition)?,
        Command::Train => train_cmd(&mut ws)?,
        Command::Evaluate => evaluate_cmd(&mut ws)?,
        Command::Ablate => ablate(&mut ws)?,
        Command::Compare => compare(&mut ws)?,
        Command::Generalize => generalize(&mut ws)?,
        Command::DiagnoseCosine => diagnose_cosine(&mut ws)?,
        Command::DiagnoseKl => diagnose_kl(&mut ws)?,
        Command::Project { method, auto_k } => project(&mut ws, *method, *auto_k)?,
        Command::Report => report(&mut ws)?,
    }
    ws.finish(cli.command.name())
}

/// Parse arguments and run; returns the process exit code
/// (0 success, 1 validation error, 2 I/O error).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Test A"), "test-a");
        assert_eq!(slug("Logistic Regression"), "logistic-regression");
    }

    #[test]
    fn seed_is_required() {
        let mut cfg = RunConfig::from_json(r#"{"out": "x"}"#).unwrap();
        assert!(matches!(cfg.fill_defaults(10), Err(Error::Config(_))));
        cfg.seed = Some(1);
        cfg.fill_defaults(10).unwrap();
        assert_eq!(cfg.condition, Some(DEFAULT_CONDITION));
        assert_eq!(cfg.models.as_ref().unwrap().len(), 9);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 1, "sed": 2}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig::from_json(r#"{"seed": 1, "level": "domain", "token_budget": 100}"#).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            level: Some(Level::Skill),
            ..Default::default()
        });
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.level, Level::Skill);
        assert_eq!(cfg.token_budget, 100);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["item-align", "no-such-command"]), 1);
        assert_eq!(run(["item-align", "summarize", "--config", "/nonexistent/run.json"]), 2);
        assert_eq!(run(["item-align", "summarize", "--out", "/tmp/x"]), 1);
    }
}
