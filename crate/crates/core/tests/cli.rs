//! Runs the `modaudit` binary end to end against offline fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modaudit::output::csv_reader;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> PathBuf {
    crate_dir().join("tests/fixtures").join(name)
}

fn modaudit(args: &[&str], work: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modaudit"))
        .args(args)
        .arg("--out")
        .arg(work.join("out"))
        .arg("--cache-dir")
        .arg(work.join("cache"))
        .env_remove("MODAUDIT_OPENAI_KEY")
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# modaudit "), "{} lacks a stamp", path.display());
    csv_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn bias_manifest() -> String {
    crate_dir().join("manifests/bias_injection.toml").display().to_string()
}

#[test]
fn mock_query_scores_every_sentence_and_rerun_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = crate_dir().join("assets/mini_corpus.jsonl");
    let corpus = corpus.to_str().unwrap();
    let o = modaudit(&["query", "--mock", "--dataset", corpus], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("64 scored, 0 failed (64 calls"), "{}", stderr(&o));
    let scores = std::fs::read_to_string(dir.path().join("out/scores/mock__mini_corpus.jsonl")).unwrap();
    assert_eq!(scores.lines().count(), 65);

    let o = modaudit(&["query", "--mock", "--dataset", corpus], dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("(0 calls, 64 cache hits"), "{}", stderr(&o));
}

#[test]
fn missing_credential_is_a_config_error_naming_the_variable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = crate_dir().join("assets/mini_corpus.jsonl");
    let o = modaudit(
        &["query", "--provider", "openai", "--dataset", corpus.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MODAUDIT_OPENAI_KEY"), "{}", stderr(&o));
}

#[test]
fn metrics_before_query_reports_missing_scores() {
    let dir = tempfile::tempdir().unwrap();
    let o = modaudit(&["metrics", "--manifest", &bias_manifest()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no scores for provider `mock`"), "{}", stderr(&o));
}

#[test]
fn unreachable_provider_gives_partial_failure_exit() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(
        &manifest,
        format!(
            "providers = [\"deadend\"]\ndatasets = [\"{}\"]\nprovider_registry = \"{}\"\n",
            fixture("no_identity.jsonl").display(),
            fixture("unreachable_registry.toml").display()
        ),
    )
    .unwrap();
    let o = modaudit(
        &["query", "--manifest", manifest.to_str().unwrap(), "--max-retries", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let errors = csv_rows(&dir.path().join("out/scores/deadend__no_identity.errors.csv"));
    assert_eq!(errors.len(), 4);
}

#[test]
fn one_class_dataset_leaves_auc_empty_and_logs_skips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("one_class.jsonl");
    let corpus = corpus.to_str().unwrap();
    assert!(modaudit(&["query", "--mock", "--dataset", corpus], dir.path()).status.success());
    let o = modaudit(&["metrics", "--mock", "--dataset", corpus], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let agg = csv_rows(&dir.path().join("out/metrics/aggregate.csv"));
    assert_eq!(agg.len(), 1);
    assert_eq!(&agg[0][5], "");
    let skipped = csv_rows(&dir.path().join("out/metrics/skipped.csv"));
    let reasons: Vec<(String, String)> = skipped.iter().map(|r| (r[2].to_string(), r[3].to_string())).collect();
    assert!(reasons.contains(&("aggregate".into(), "single gold class; AUC undefined".into())));
    assert!(reasons.contains(&("asian".into(), "group absent from dataset".into())));
    let groups = csv_rows(&dir.path().join("out/metrics/groups.csv"));
    assert_eq!(groups.len(), 2);
    assert!(groups.iter().all(|r| r[9].is_empty()));
}

#[test]
fn corpus_without_identity_tokens_gives_empty_psa_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("no_identity.jsonl");
    let o = modaudit(&["psa", "--mock", "--dataset", corpus.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no counterfactual matches"));
    assert!(csv_rows(&dir.path().join("out/psa/ctf.csv")).is_empty());
}

#[test]
fn zero_misclassifications_give_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(
        &manifest,
        format!(
            "providers = [\"mock\"]\ndatasets = [\"{}\"]\n[mock]\nbase_score = 0.25\n[mock.token_weights]\nvermin = 0.4\nscum = 0.4\n",
            fixture("no_identity.jsonl").display()
        ),
    )
    .unwrap();
    let m = manifest.to_str().unwrap();
    assert!(modaudit(&["query", "--manifest", m], dir.path()).status.success());
    let o = modaudit(&["shap", "--manifest", m], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["global_fp.csv", "global_fn.csv", "coding_fp.csv", "coding_fn.csv"] {
        assert!(csv_rows(&dir.path().join("out/shap").join(f)).is_empty(), "{f}");
    }
}

#[test]
fn report_is_byte_identical_on_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let o = modaudit(&["report", "--manifest", &bias_manifest()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let index = dir.path().join("out/index.json");
    let first = std::fs::read(&index).unwrap();
    let o = modaudit(&["report", "--manifest", &bias_manifest()], dir.path());
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(&index).unwrap());

    let parsed: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let files: Vec<&str> = parsed["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for expected in ["metrics/aggregate.csv", "metrics/groups.csv", "psa/ctf.csv", "psa/ctf_mock.svg", "shap/global_fp.csv"] {
        assert!(files.contains(&expected), "{expected} missing from index");
    }
}

#[test]
fn a_different_seed_changes_the_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let m = bias_manifest();
    assert!(modaudit(&["query", "--manifest", &m], dir.path()).status.success());
    assert!(modaudit(&["metrics", "--manifest", &m, "--seed", "99"], dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("out/metrics/groups.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("seed=99"));
    let rows = csv_rows(&dir.path().join("out/metrics/groups.csv"));
    assert!(rows.iter().all(|r| &r[12] == "99"));
}
