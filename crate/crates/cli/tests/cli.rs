use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quesco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quesco"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = quesco(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

fn small_corpus(dir: &Path) {
    ok(&[
        "gen-corpus",
        "--branching",
        "2,2,2",
        "--per-leaf",
        "4",
        "--templates-per-leaf",
        "2",
        "--label-pairs",
        "10",
        "--seed",
        "3",
        "--out",
        s(dir),
    ]);
}

#[test]
fn gen_corpus_writes_hierarchy_corpus_labels_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    assert_eq!(lines(&tmp.path().join("corpus.jsonl")), 32);
    // Ten pairs for each of the four distances.
    assert_eq!(lines(&tmp.path().join("labels.jsonl")), 40);
    let h: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("hierarchy.json")).unwrap()).unwrap();
    assert!(h.is_object() || h.is_array());
    let m: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "gen-corpus");
    assert_eq!(m["seed"], 3);
}

#[test]
fn augment_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let corpus = tmp.path().join("corpus.jsonl");
    let (a, b) = (tmp.path().join("a.jsonl"), tmp.path().join("b.jsonl"));
    for out in [&a, &b] {
        ok(&["augment", "--corpus", s(&corpus), "--p", "0.5", "--seed", "4", "--out", s(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(lines(&a), 32);
    let first: Value = serde_json::from_str(fs::read_to_string(&a).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["applied"].is_array());
    assert!(tmp.path().join("a.jsonl.manifest.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(quesco(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(quesco(&["augment", "--corpus"]).status.code(), Some(2));
}

#[test]
fn invalid_input_exits_1_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    let out = quesco(&["augment", "--corpus", s(&bad), "--out", s(&tmp.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let missing = quesco(&["augment", "--corpus", s(&tmp.path().join("none.jsonl")), "--out", "x"]);
    assert_eq!(missing.status.code(), Some(1));

    small_corpus(tmp.path());
    let level = quesco(&[
        "eval-concept",
        "--embeddings",
        s(&bad),
        "--corpus",
        s(&tmp.path().join("corpus.jsonl")),
        "--level",
        "3",
        "--out",
        s(&tmp.path().join("r.json")),
    ]);
    assert_eq!(level.status.code(), Some(1));
}

#[test]
fn pretrain_embed_eval_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir);
    let config = dir.join("train.toml");
    fs::write(
        &config,
        "batch_size = 8\nsteps = 4\nbank_capacity = 20\ncheckpoint_every = 2\n\n[model]\nd_embed = 12\nd_ff = 12\nd_hidden = 12\nd_proj = 8\n",
    )
    .unwrap();
    let run = dir.join("run");
    let corpus = dir.join("corpus.jsonl");
    ok(&[
        "pretrain",
        "--corpus",
        s(&corpus),
        "--hierarchy",
        s(&dir.join("hierarchy.json")),
        "--config",
        s(&config),
        "--seed",
        "5",
        "--out-dir",
        s(&run),
    ]);
    assert_eq!(lines(&run.join("metrics.jsonl")), 4);
    assert!(run.join("checkpoint-000002.json").exists());
    assert!(run.join("manifest.json").exists());
    let written = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(written.contains("seed = 5"), "{written}");

    let ckpt = run.join("checkpoint.json");
    let emb = dir.join("emb.jsonl");
    ok(&["embed", "--checkpoint", s(&ckpt), "--corpus", s(&corpus), "--out", s(&emb)]);
    assert_eq!(lines(&emb), 32);
    let rec: Value = serde_json::from_str(fs::read_to_string(&emb).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(rec["rep"].as_array().unwrap().len(), 12);

    let sim = dir.join("sim.json");
    ok(&["eval-similarity", "--embeddings", s(&emb), "--labels", s(&dir.join("labels.jsonl")), "--out", s(&sim)]);
    let sim: Value = serde_json::from_str(&fs::read_to_string(sim).unwrap()).unwrap();
    assert!(sim.to_string().contains("spearman"));

    for level in ["1", "2"] {
        let out = dir.join(format!("concept{level}.json"));
        ok(&["eval-concept", "--embeddings", s(&emb), "--corpus", s(&corpus), "--level", level, "--out", s(&out)]);
        assert!(fs::read_to_string(&out).unwrap().contains("accuracy"));
    }
    let diff = dir.join("diff.json");
    ok(&["eval-difficulty", "--embeddings", s(&emb), "--corpus", s(&corpus), "--out", s(&diff)]);
    assert!(fs::read_to_string(&diff).unwrap().contains("doa"));

    let rep = dir.join("report");
    let table = ok(&["report", "--checkpoint", s(&ckpt), "--corpus", s(&corpus), "--anchors", "16", "--out-dir", s(&rep)]);
    assert!(table.contains("strictly decreasing"));
    for f in ["report.json", "report.txt", "report.svg", "manifest.json"] {
        assert!(rep.join(f).exists(), "{f} missing");
    }
    assert!(fs::read_to_string(rep.join("report.svg")).unwrap().starts_with("<svg"));

    // Resuming from the midpoint reproduces the final checkpoint.
    let resumed = dir.join("resumed");
    ok(&[
        "pretrain",
        "--corpus",
        s(&corpus),
        "--hierarchy",
        s(&dir.join("hierarchy.json")),
        "--config",
        s(&config),
        "--seed",
        "5",
        "--resume",
        s(&run.join("checkpoint-000002.json")),
        "--out-dir",
        s(&resumed),
    ]);
    assert_eq!(
        fs::read(resumed.join("checkpoint.json")).unwrap(),
        fs::read(run.join("checkpoint.json")).unwrap()
    );
}
