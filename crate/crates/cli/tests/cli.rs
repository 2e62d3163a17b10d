use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY_MODEL: &str = r#"{
  "static_dim": 6, "contextual_dim": 6, "contextual_layers": 2,
  "char_dim": 4, "char_filters": 4, "hidden_dim": 6,
  "batch_size": 4, "learning_rate": 0.01, "dropout": 0.1,
  "max_epochs": 3, "patience": 2
}"#;

fn messyseg<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_messyseg"))
        .args(args)
        .env("MESSYSEG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(ws.path("model.json"), TINY_MODEL).unwrap();
        ok(messyseg(&["synth", "--n", "14", "--seed", "3", "--noise", "0.03", "--out", s(&ws.path("all.jsonl"))]));
        ok(messyseg(&[
            "split",
            "--corpus",
            s(&ws.path("all.jsonl")),
            "--ratios",
            "0.6,0.2,0.2",
            "--seed",
            "1",
            "--out-dir",
            s(ws.dir.path()),
        ]));
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, checkpoint: &str, extra: &[&str]) -> Output {
        let mut args: Vec<PathBuf> = vec!["train".into(), "--corpus".into(), self.path("train.jsonl")];
        args.extend(["--dev".into(), self.path("dev.jsonl")]);
        args.extend(["--config".into(), self.path("model.json")]);
        args.extend(["--checkpoint".into(), self.path(checkpoint)]);
        args.extend(extra.iter().map(PathBuf::from));
        messyseg(&args)
    }
}

#[test]
fn synth_is_deterministic_and_reports_stats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let out = ok(messyseg(&["synth", "--n", "20", "--seed", "9", "--noise", "0.05", "--out", s(&a)]));
    ok(messyseg(&["synth", "--n", "20", "--seed", "9", "--noise", "0.05", "--out", s(&b)]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let line = stdout(&out);
    assert!(line.starts_with("docs 20\t"), "{line}");
    assert!(line.contains("median_segments_per_doc"), "{line}");
    assert!(line.contains("median_segment_chars"), "{line}");
}

#[test]
fn synth_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let out = messyseg(&["synth", "--n", "0", "--out", s(&dir.path().join("x.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    let out = messyseg(&["synth", "--n", "2", "--out", s(&blocked.join("x.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(messyseg(&["train", "--bogus"]).status.code(), Some(2));
}

#[test]
fn train_writes_checkpoint_and_log_deterministically() {
    let ws = Workspace::new();
    ok(ws.train("a.ckpt", &["--seed", "4"]));
    ok(ws.train("b.ckpt", &["--seed", "4"]));
    assert_eq!(fs::read(ws.path("a.ckpt")).unwrap(), fs::read(ws.path("b.ckpt")).unwrap());

    let log = fs::read_to_string(ws.path("a.ckpt.log.tsv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch\ttrain_loss\tdev_pk\timproved");
    let epochs = lines.len() - 1;
    assert!((1..=3).contains(&epochs));
    for (i, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{}\t", i + 1)), "{l}");
    }

    ok(ws.train("c.ckpt", &["--seed", "5"]));
    assert_ne!(fs::read(ws.path("a.ckpt")).unwrap(), fs::read(ws.path("c.ckpt")).unwrap());
}

#[test]
fn train_rejects_unlabelled_corpus() {
    let ws = Workspace::new();
    let text = fs::read_to_string(ws.path("train.jsonl")).unwrap();
    let mut first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    first.as_object_mut().unwrap().remove("labels");
    let rest: Vec<&str> = text.lines().skip(1).collect();
    fs::write(ws.path("train.jsonl"), format!("{first}\n{}\n", rest.join("\n"))).unwrap();
    let out = ws.train("x.ckpt", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!ws.path("x.ckpt").exists());
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let ws = Workspace::new();
    let out = ws.train("x.ckpt", &["--learning-rate", "1e300", "--dropout", "0"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_gold_against_itself_is_perfect() {
    let ws = Workspace::new();
    let test = ws.path("test.jsonl");
    let prefix = ws.path("reports/self");
    let out = ok(messyseg(&["evaluate", "--corpus", s(&test), "--predictions", s(&test), "--report", s(&prefix)]));
    let tsv = fs::read_to_string(ws.path("reports/self.tsv")).unwrap();
    assert_eq!(stdout(&out), tsv);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("reports/self.json")).unwrap()).unwrap();
    assert_eq!(json["pk_mean"].as_f64(), Some(0.0));
    let names: Vec<&str> = json["rows"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Bride", "Groom", "BrideResidence", "GroomResidence", "WeddingDate", "all"]);
    let all = json["rows"].as_array().unwrap().last().unwrap();
    assert_eq!(all["f1"].as_f64(), Some(1.0));
}

#[test]
fn evaluate_and_predict_from_checkpoint() {
    let ws = Workspace::new();
    ok(ws.train("m.ckpt", &["--scheme", "bi"]));
    let test = ws.path("test.jsonl");
    let ck = ws.path("m.ckpt");
    ok(messyseg(&["evaluate", "--corpus", s(&test), "--checkpoint", s(&ck), "--report", s(&ws.path("r"))]));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("r.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["scheme"], "BI");

    let pred = ws.path("pred.jsonl");
    ok(messyseg(&["predict", "--corpus", s(&test), "--checkpoint", s(&ck), "--out", s(&pred)]));
    ok(messyseg(&["evaluate", "--corpus", s(&test), "--predictions", s(&pred), "--report", s(&ws.path("p"))]));
    assert_eq!(
        fs::read_to_string(ws.path("r.tsv")).unwrap().lines().skip(1).collect::<Vec<_>>(),
        fs::read_to_string(ws.path("p.tsv")).unwrap().lines().skip(1).collect::<Vec<_>>()
    );

    let out = messyseg(&[
        "evaluate", "--corpus", s(&test), "--checkpoint", s(&ck), "--scheme", "bio", "--report", s(&ws.path("q")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_empty_test_set() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = messyseg(&["evaluate", "--corpus", s(&empty), "--predictions", s(&empty), "--report", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_outside_labels_under_bi() {
    let ws = Workspace::new();
    let test = ws.path("test.jsonl");
    let out = messyseg(&[
        "evaluate", "--corpus", s(&test), "--predictions", s(&test), "--scheme", "bi", "--report", s(&ws.path("r")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablate_logs_every_run_and_one_row_per_cell() {
    let ws = Workspace::new();
    let prefix = ws.path("abl");
    ok(messyseg(&[
        "ablate",
        "--corpus",
        s(&ws.path("train.jsonl")),
        "--dev",
        s(&ws.path("dev.jsonl")),
        "--test",
        s(&ws.path("test.jsonl")),
        "--config",
        s(&ws.path("model.json")),
        "--max-epochs",
        "1",
        "--grid",
        "all,all",
        "--schemes",
        "bio",
        "--seeds",
        "3",
        "--report",
        s(&prefix),
    ]));
    let runs: Vec<_> = fs::read_dir(ws.path("abl.runs")).unwrap().collect();
    assert_eq!(runs.len(), 6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.path("abl.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 2);
    assert_eq!(json["runs"].as_array().unwrap().len(), 6);
    let cmp = &json["comparisons"][0];
    assert_eq!(cmp["a"], "bio/all");
    assert_eq!(cmp["b"], "bio/all#2");
    assert_eq!(cmp["p_value"].as_f64(), Some(1.0));
    let tsv = fs::read_to_string(ws.path("abl.tsv")).unwrap();
    let cell_rows = tsv.split("\n\n").next().unwrap().lines().count() - 1;
    assert_eq!(cell_rows, 2);
}

#[test]
fn ablate_rejects_unknown_comparison() {
    let ws = Workspace::new();
    let out = messyseg(&[
        "ablate",
        "--corpus",
        s(&ws.path("train.jsonl")),
        "--dev",
        s(&ws.path("dev.jsonl")),
        "--test",
        s(&ws.path("test.jsonl")),
        "--grid",
        "all",
        "--schemes",
        "bio",
        "--compare",
        "bio/all:bi/all",
        "--report",
        s(&ws.path("abl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selfcheck_passes_and_catches_injected_fault() {
    let out = ok(messyseg(&["selfcheck"]));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 3);
    let out = messyseg(&["selfcheck", "--inject-fault"]);
    assert!(!out.status.success());
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL\tmodel gradient")));
}
