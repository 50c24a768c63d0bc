use std::path::Path;

use item_align::cli::{self, Manifest, MANIFEST};
use item_align::corpus::write_corpus;
use item_align::embedding::read_embeddings;
use item_align::fixtures::{table1_corpus, TABLE1_TEST_A, TABLE1_TEST_B};
use serde_json::json;

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("item-align").chain(args.iter().copied()))
}

fn setup(dir: &Path, extra: serde_json::Value) -> String {
    for (name, counts, file) in [("Test A", TABLE1_TEST_A, "a.jsonl"), ("Test B", TABLE1_TEST_B, "b.jsonl")] {
        std::fs::write(dir.join(file), write_corpus(&table1_corpus(name, counts, 3))).unwrap();
    }
    let mut cfg = json!({
        "seed": 5,
        "out": "out",
        "corpora": [{"name": "Test A", "path": "a.jsonl"}, {"name": "Test B", "path": "b.jsonl"}],
        "planted": {"dim": 8},
        "models": [{"name": "Logistic Regression", "model": {"kind": "softmax_regression"}}]
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(MANIFEST)).unwrap()).unwrap()
}

#[test]
fn summarize_writes_table1_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    assert_eq!(run(&["summarize", "--config", &cfg]), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/summary/test-a.csv")).unwrap();
    assert!(csv.contains("skill,Inferences,93\n"));
    assert!(csv.ends_with("total,Total,1270\n"));
    let m = manifest(dir.path());
    assert!(m.artifacts.contains_key("summary/test-b.csv"));
    assert_eq!(m.commands["summarize"]["seed"], 5);
}

#[test]
fn one_cell_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        json!({"grid": {"total_sizes": [300], "conditions": ["prompt_only"]}}),
    );
    assert_eq!(run(&["embed-synthetic", "--config", &cfg, "--condition", "prompt_only"]), 0);
    assert_eq!(run(&["ablate", "--config", &cfg]), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/ablation/grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "size,condition,accuracy,precision,recall,weighted_f1,kappa");
    assert!(lines[1].starts_with("300,prompt_only,"));
}

#[test]
fn exit_codes_distinguish_validation_from_io() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    assert_eq!(run(&["compare", "--config", &cfg]), 1, "embeddings missing");
    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["summarize", "--config", missing.to_str().unwrap()]), 2);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"seed\": 1, \"bogus\": true}").unwrap();
    assert_eq!(run(&["summarize", "--config", bad.to_str().unwrap()]), 1);
    assert_eq!(run(&["summarize", "--config", &cfg, "--level", "chapter"]), 1);
}

#[test]
fn seed_flag_overrides_config_and_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    assert_eq!(run(&["split", "--config", &cfg]), 0);
    let first = manifest(dir.path()).artifacts["splits/test-a.jsonl"].clone();
    assert_eq!(run(&["split", "--config", &cfg, "--seed", "6"]), 0);
    let m = manifest(dir.path());
    assert_ne!(m.artifacts["splits/test-a.jsonl"], first);
    assert_eq!(m.commands["split"]["seed"], 6);
}

#[test]
fn normalization_flag_applies_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let raw = setup(dir.path(), json!({"projection": {"method": "pca"}}));
    assert_eq!(run(&["embed-synthetic", "--config", &raw]), 0);
    let name = "embeddings/test-a/prompt_table_figure_options_key_rationale.emb";
    let set = read_embeddings(&std::fs::read_to_string(dir.path().join("out").join(name)).unwrap()).unwrap();
    let norm = set.iter().next().unwrap().1.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() > 1e-3, "stored vectors stay raw");
    assert_eq!(run(&["project", "--config", &raw]), 0);
    let before = manifest(dir.path()).artifacts["projections/pca.csv"].clone();

    let normalized = dir.path().join("normalized.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&raw).unwrap()).unwrap();
    cfg["normalize"] = json!(true);
    std::fs::write(&normalized, cfg.to_string()).unwrap();
    assert_eq!(run(&["project", "--config", normalized.to_str().unwrap()]), 0);
    let m = manifest(dir.path());
    assert_ne!(m.artifacts["projections/pca.csv"], before);
    assert_eq!(m.commands["project"]["normalize"], true);
}

#[test]
fn train_then_evaluate_round_trips_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    assert_eq!(run(&["embed-synthetic", "--config", &cfg]), 0);
    assert_eq!(run(&["train", "--config", &cfg]), 0);
    assert!(dir.path().join("out/models/logistic-regression.json").exists());
    assert_eq!(run(&["evaluate", "--config", &cfg]), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/evaluate/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn isomap_auto_k_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        json!({"projection": {"method": "isomap", "k_neighbors": 1,
            "groups": [{"corpus": "Test A", "level": "skill", "index": 9},
                       {"corpus": "Test B", "level": "skill", "index": 9}]}}),
    );
    assert_eq!(run(&["embed-synthetic", "--config", &cfg]), 0);
    assert_eq!(run(&["project", "--config", &cfg]), 1, "k=1 leaves the graph disconnected");
    assert_eq!(run(&["project", "--config", &cfg, "--auto-k"]), 0);
    let svg = std::fs::read_to_string(dir.path().join("out/projections/isomap.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 51 + 36);
}

#[test]
fn inputs_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({}));
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    // point the output directory at the inputs' directory
    assert_eq!(run(&["ingest", "--config", &cfg, "--out", dir.path().to_str().unwrap()]), 0);
    assert_eq!(std::fs::read(dir.path().join("a.jsonl")).unwrap(), a);
    let hostile = dir.path().join("hostile.json");
    std::fs::write(
        &hostile,
        json!({"seed": 1, "out": ".", "corpora": [{"name": "Test A", "path": "ingest/test-a.jsonl"}]}).to_string(),
    )
    .unwrap();
    assert_eq!(run(&["ingest", "--config", hostile.to_str().unwrap()]), 1);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), json!({"projection": {"method": "pca"}}));
    let steps = ["compose", "embed-synthetic", "compare", "generalize", "diagnose-kl", "project", "report"];
    for s in steps {
        assert_eq!(run(&[s, "--config", &cfg]), 0, "{s}");
    }
    let first = manifest(dir.path()).artifacts;
    for s in steps {
        assert_eq!(run(&[s, "--config", &cfg, "--workers", "2"]), 0, "{s}");
    }
    assert_eq!(manifest(dir.path()).artifacts, first);
    assert!(std::fs::read_to_string(dir.path().join("out/report.md")).unwrap().contains("## generalize/external.md"));
}

#[test]
fn token_reports_feed_truncation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tokens.jsonl"),
        "{\"id\":\"x1\",\"token_count\":600,\"truncated\":true}\n{\"id\":\"x2\",\"token_count\":20,\"truncated\":false}\n",
    )
    .unwrap();
    let cfg = setup(
        dir.path(),
        json!({"token_reports": [{"corpus": "Test A", "condition": "prompt_only", "path": "tokens.jsonl"}]}),
    );
    assert_eq!(run(&["compose", "--config", &cfg, "--condition", "prompt_only", "--token-budget", "512"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/composed/test-a/truncation_provider.csv")).unwrap();
    assert!(csv.contains("prompt_only,512,1,2,0.5000"));
}
