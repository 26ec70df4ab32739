use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ltn(dir: &Path, args: &[&str]) -> Output {
    let out_set = format!("output_dir={}", dir.display());
    Command::new(env!("CARGO_BIN_EXE_ltn-offer"))
        .args(["--set", &out_set])
        .args(args)
        .env_remove("LTN_OFFER_LLM_URL")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ltn(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const SYNTH: [&str; 4] = ["--set", "corpus.synthetic.n=60", "--set", "corpus.synthetic.positive_rate=0.35"];

fn with<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = SYNTH.to_vec();
    v.extend_from_slice(extra);
    v
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--set", "corpus.synthetic.n=200", "--set", "corpus.synthetic.positive_rate=0.35", "generate"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let read = |d: &Path| std::fs::read(d.join("corpus.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let docs = jsonl(&a.path().join("corpus.jsonl"));
    assert_eq!(docs.len(), 200);
    assert_eq!(docs.iter().filter(|d| d["label"] == 1).count(), 70);
}

#[test]
fn zero_positive_rate_gives_only_negatives() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--set", "corpus.synthetic.n=30", "--set", "corpus.synthetic.positive_rate=0", "generate"]);
    let docs = jsonl(&d.path().join("corpus.jsonl"));
    assert_eq!(docs.len(), 30);
    assert!(docs.iter().all(|d| d["label"] == 0));
}

#[test]
fn oracle_extract_writes_eight_estimates_per_document() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &with(&["extract"]));
    let est = jsonl(&d.path().join("estimates.jsonl"));
    assert_eq!(est.len(), 60 * 8);
    assert!(est.iter().all(|e| e["method"] == "ORACLE"));
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = ltn(d.path(), &["--set", "corpus.path=/nonexistent/corpus.jsonl", "evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ltn(d.path(), &["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flags_and_config_keys_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(ltn(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(ltn(d.path(), &with(&["--set", "no_such_key=1", "evaluate"])).status.code(), Some(2));
    assert_eq!(ltn(d.path(), &with(&["--jobs", "0", "evaluate"])).status.code(), Some(2));
}

#[test]
fn all_backends_produce_one_row_and_file_each() {
    let d = tempfile::tempdir().unwrap();
    let stdout = ok(d.path(), &with(&["--set", "ltn.backend=all", "--set", "cv.repetitions=1", "evaluate"]));
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("oracle")).collect();
    assert_eq!(rows.len(), 3, "{stdout}");
    for b in ["godel", "product", "lukasiewicz"] {
        let r: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join(format!("results-{b}.json"))).unwrap()).unwrap();
        assert_eq!(r["backend"], b);
        assert_eq!(r["per_fold"].as_array().unwrap().len(), 5);
        assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn unlabeled_corpus_fails_before_cross_validation() {
    let d = tempfile::tempdir().unwrap();
    let corpus = d.path().join("c.jsonl");
    std::fs::write(
        &corpus,
        "{\"id\":\"a\",\"text\":\"Angebot Nr. 1\",\"label\":1}\n{\"id\":\"b\",\"text\":\"Rechnung\"}\n",
    )
    .unwrap();
    let set = format!("corpus.path={}", corpus.display());
    let out = ltn(d.path(), &["--set", &set, "--set", "method=ie", "evaluate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));
    assert!(!d.path().join("results.json").exists());
}

#[test]
fn explain_a_positive_document() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &with(&["generate"]));
    let docs = jsonl(&d.path().join("corpus.jsonl"));
    let pos = docs.iter().find(|d| d["label"] == 1).unwrap()["id"].as_str().unwrap().to_string();
    ok(d.path(), &with(&["train"]));
    let stdout = ok(d.path(), &with(&["explain", &pos]));
    let report: Value = serde_json::from_str(&stdout).unwrap();
    ltn_offer::ltn::validate_report_json(&report).unwrap();
    assert_eq!(report["label"], 1);
    assert!(report["rules"]["pos_feature"].as_f64().unwrap() > 0.0);

    let out = ltn(d.path(), &with(&["explain", "no-such-doc"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_extraction_is_visible_in_the_audit() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &with(&["extract"]));
    let path = d.path().join("estimates.jsonl");
    let mut est = jsonl(&path);
    let target = est[0]["doc_id"].as_str().unwrap().to_string();
    est[0]["value"] = 0.0.into();
    est[0]["flags"] = serde_json::json!(["extraction_failed"]);
    let text: String = est.iter().map(|e| format!("{e}\n")).collect();
    std::fs::write(&path, text).unwrap();

    let set = format!("extraction.estimates_path={}", path.display());
    ok(d.path(), &with(&["--set", &set, "train"]));
    let report: Value = serde_json::from_str(&ok(d.path(), &with(&["--set", &set, "explain", &target]))).unwrap();
    let flagged: Vec<&Value> = report["predicates"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["flags"].as_array().is_some_and(|f| f.iter().any(|x| x == "extraction_failed")))
        .collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!(flagged[0]["value"], 0.0);
}

#[test]
fn model_methods_without_a_backend_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let out = ltn(d.path(), &with(&["--set", "method=cisc", "extract"]));
    assert_eq!(out.status.code(), Some(2));
    let out = ltn(d.path(), &with(&["--set", "method=tfidf_ltn", "train"]));
    assert_eq!(out.status.code(), Some(2));
}
