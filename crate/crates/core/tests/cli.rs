use std::path::Path;
use std::process::{Command, Output};

use chronotag::corpus::{load_corpus, CorpusFormat};
use chronotag::eval::ScoreReport;
use serde_json::Value;

fn chronotag(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chronotag"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = chronotag(cwd, args);
    assert!(out.status.success(), "chronotag {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth(cwd: &Path, docs: usize, seed: &str, out: &str) {
    std::fs::write(cwd.join("synth.json"), format!(r#"{{"generator": {{"documents": {docs}}}}}"#)).unwrap();
    ok(cwd, &["synth", "--config", "synth.json", "--seed", seed, "--out", out]);
}

/// Splits stdout of `eval` into the table and the parsed JSON report.
fn eval_output(out: &Output) -> (String, ScoreReport) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let at = text.find('{').expect("json follows the table");
    (text[..at].to_string(), serde_json::from_str(&text[at..]).unwrap())
}

#[test]
fn synth_writes_parseable_deterministic_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 7, "3", "a");
    synth(cwd, 7, "3", "b");
    let conll = load_corpus(&cwd.join("a/corpus.conll"), CorpusFormat::Conll).unwrap();
    let json = load_corpus(&cwd.join("a/corpus.json"), CorpusFormat::Json).unwrap();
    assert_eq!(conll.len(), 7);
    assert_eq!(conll, json);
    for name in ["corpus.conll", "corpus.json"] {
        assert_eq!(std::fs::read(cwd.join("a").join(name)).unwrap(), std::fs::read(cwd.join("b").join(name)).unwrap());
    }
    synth(cwd, 7, "4", "c");
    assert_ne!(std::fs::read(cwd.join("a/corpus.conll")).unwrap(), std::fs::read(cwd.join("c/corpus.conll")).unwrap());
}

#[test]
fn crf_train_tag_eval_reproduces_training_score() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 30, "1", "syn");
    std::fs::write(cwd.join("crf.json"), r#"{"task": "crf-run2", "crf": {"klass": "EVENT"}}"#).unwrap();
    ok(cwd, &["train", "--config", "crf.json", "--seed", "2", "--out", "model", "syn/corpus.conll"]);
    for name in ["weights.tsv", "manifest.json", "training_log.json", "config.resolved.json"] {
        assert!(cwd.join("model").join(name).is_file(), "{name} missing");
    }
    let resolved: Value = serde_json::from_str(&std::fs::read_to_string(cwd.join("model/config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 2);
    assert_eq!(resolved["task"], "crf-run2");
    let log: Value = serde_json::from_str(&std::fs::read_to_string(cwd.join("model/training_log.json")).unwrap()).unwrap();
    let train_score = log["train_score"].as_f64().unwrap();

    ok(cwd, &["tag", "model", "syn/corpus.conll", "--out", "tagged"]);
    let out = ok(cwd, &["eval", "syn/corpus.conll", "tagged/tagged.conll", "--out", "scores"]);
    let (table, report) = eval_output(&out);
    let event = report.rows.iter().find(|r| r.name == "EVENT").expect("EVENT row");
    assert!((event.score.f1 - train_score).abs() < 1e-6, "{} vs {train_score}", event.score.f1);
    assert_eq!(std::fs::read_to_string(cwd.join("scores/scores.txt")).unwrap(), table);

    // The table and the JSON carry the same rows and numbers.
    let lines: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(lines.len(), report.rows.len());
    for (line, row) in lines.iter().zip(&report.rows) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[0], row.name);
        assert_eq!(cols[1], row.mode);
        assert_eq!(cols[4], format!("{:.6}", row.score.f1));
        assert_eq!(cols[5], row.score.tp.to_string());
    }
}

#[test]
fn gold_against_itself_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 5, "8", "syn");
    let (_, report) = eval_output(&ok(cwd, &["eval", "syn/corpus.conll", "syn/corpus.json"]));
    assert!(report.rows.len() >= 3);
    for row in &report.rows {
        assert_eq!(row.score.f1, 1.0, "{}", row.name);
    }
}

#[test]
fn mismatched_document_ids_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 5, "8", "a");
    synth(cwd, 6, "8", "b");
    let out = chronotag(cwd, &["eval", "a/corpus.conll", "b/corpus.conll"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("only one side"), "{}", stderr(&out));
}

#[test]
fn missing_corpus_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pos.json"), r#"{"task": "pos"}"#).unwrap();
    let out = chronotag(dir.path(), &["train", "--config", "pos.json", "--out", "m", "nowhere.conll"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("does not exist"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    std::fs::write(cwd.join("bad.json"), r#"{"generator": {"documents": 3}, "sede": 4}"#).unwrap();
    let out = chronotag(cwd, &["synth", "--config", "bad.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sede"), "{}", stderr(&out));
}

#[test]
fn empty_input_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 20, "1", "syn");
    std::fs::write(cwd.join("pos.json"), r#"{"task": "pos", "rnn": {"dim": 8, "epochs": 1}}"#).unwrap();
    ok(cwd, &["train", "--config", "pos.json", "--out", "model", "syn/corpus.conll"]);
    std::fs::write(cwd.join("empty.conll"), "").unwrap();
    ok(cwd, &["tag", "model", "empty.conll", "--out", "tagged"]);
    assert_eq!(std::fs::read_to_string(cwd.join("tagged/tagged.conll")).unwrap(), "");
    assert_eq!(std::fs::read_to_string(cwd.join("tagged/tagged.json")).unwrap().trim(), "[]");
}

#[test]
fn model_and_command_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    synth(cwd, 20, "1", "syn");
    std::fs::write(cwd.join("pos.json"), r#"{"task": "pos", "rnn": {"dim": 8, "epochs": 1}}"#).unwrap();
    ok(cwd, &["train", "--config", "pos.json", "--out", "pos", "syn/corpus.conll"]);
    std::fs::write(cwd.join("p2.json"), r#"{"task": "phase2"}"#).unwrap();
    ok(cwd, &["train", "--config", "p2.json", "--out", "p2", "syn/corpus.conll"]);

    let out = chronotag(cwd, &["predict", "pos", "syn/corpus.conll", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = chronotag(cwd, &["tag", "p2", "syn/corpus.conll", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    ok(cwd, &["predict", "p2", "syn/corpus.conll", "--out", "pred"]);
    let (_, report) = eval_output(&ok(cwd, &["eval", "syn/corpus.conll", "pred/predictions.tsv"]));
    assert!(report.rows.iter().any(|r| r.name == "micro"));
}
