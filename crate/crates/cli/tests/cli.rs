use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use styledit::config::Config;
use styledit::corpus::SyntheticSpec;
use styledit::edit::{parse_traces, OperatorKind};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_styledit"));
    c.env_remove("STYLEDIT_MODEL_DIR").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn styledit")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "styledit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_config(iterations: u64) -> Config {
    let mut cfg = Config::compact();
    cfg.encoder.emb_dim = 8;
    cfg.encoder.hidden = 8;
    cfg.encoder.attn_dim = 8;
    cfg.lm.emb_dim = 8;
    cfg.lm.hidden = 8;
    cfg.lm.max_epochs = 2;
    cfg.classifier.max_epochs = 2;
    cfg.eval_classifier.max_epochs = 2;
    cfg.eval_classifier.filters = 4;
    cfg.eval_classifier.emb_dim = 8;
    cfg.train.iterations = iterations;
    cfg.train.accumulate = 8;
    cfg
}

fn tiny_spec() -> SyntheticSpec {
    SyntheticSpec {
        dev_size: 20,
        test_size: 12,
        ..SyntheticSpec::default()
    }
}

/// A prepared data directory and fully trained tiny model, shared by the
/// tests that only read them.
struct Fixture {
    _dir: tempfile::TempDir,
    data: PathBuf,
    model: PathBuf,
    config: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let spec = dir.path().join("spec.json");
        tiny_spec().save(&spec).unwrap();
        let config = dir.path().join("config.json");
        tiny_config(64).save(&config).unwrap();
        let data = dir.path().join("data");
        let model = dir.path().join("model");
        ok(&["prepare-data", "--synthetic-spec", p(&spec), "--n-per-style", "80", "--out", p(&data)]);
        for stage in ["pretrain-lm", "pretrain-classifier", "train"] {
            ok(&[stage, "--config", p(&config), "--data", p(&data), "--out", p(&model)]);
        }
        Fixture {
            _dir: dir,
            data,
            model,
            config,
        }
    })
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn prepare_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    tiny_spec().save(&spec).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["prepare-data", "--synthetic-spec", p(&spec), "--n-per-style", "50", "--out", p(out)]);
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.iter().any(|(f, _)| f.ends_with("vocab.txt")));
    assert!(ta.iter().any(|(f, _)| f.ends_with("manifest.json")));
    assert_eq!(ta, tb);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    tiny_spec().save(&spec).unwrap();
    assert_eq!(run(&["prepare-data", "--synthetic-spec", p(&spec)]).status.code(), Some(2));
    let both = run(&[
        "prepare-data",
        "--synthetic-spec",
        p(&spec),
        "--corpus-dir",
        p(dir.path()),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(both.status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn corpus_dir_split_sizes_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    for (style, words) in [("s1", "good"), ("s2", "bad")] {
        let d = dir.path().join("in").join(style);
        fs::create_dir_all(&d).unwrap();
        for (split, n) in [("train", 7), ("dev", 3), ("test", 2)] {
            let text: String = (0..n).map(|k| format!("the food {k} was {words} .\n")).collect();
            fs::write(d.join(format!("{split}.txt")), text).unwrap();
        }
    }
    let out = ok(&["prepare-data", "--corpus-dir", p(&dir.path().join("in")), "--out", p(&dir.path().join("out"))]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("s1: train 7, dev 3, test 2"), "{stdout}");
    assert!(stdout.contains("s2: train 7, dev 3, test 2"), "{stdout}");
}

#[test]
fn train_requires_pretrained_language_models() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--config", p(&f.config), "--data", p(&f.data), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrain-lm required"));
}

#[test]
fn train_requires_pretrained_classifier() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["pretrain-lm", "--config", p(&f.config), "--data", p(&f.data), "--out", p(dir.path())]);
    let out = run(&["train", "--config", p(&f.config), "--data", p(&f.data), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrain-classifier required"));
}

#[test]
fn stages_are_idempotent_and_reference_their_manifests() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("model");
    for stage in ["pretrain-lm", "pretrain-classifier", "train"] {
        ok(&[stage, "--config", p(&f.config), "--data", p(&f.data), "--out", p(&again)]);
    }
    let (a, b) = (tree(&f.model), tree(&again));
    let differing: Vec<_> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
    assert_eq!(a.len(), b.len());
    assert!(differing.is_empty(), "differing files: {differing:?}");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.model.join("manifest-train.json")).unwrap()).unwrap();
    assert_eq!(m["outputs"][0], "policy.ckpt");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(m["code_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let half = dir.path().join("half.json");
    tiny_config(32).save(&half).unwrap();
    let resumed = dir.path().join("resumed");
    for stage in ["pretrain-lm", "pretrain-classifier"] {
        ok(&[stage, "--config", p(&f.config), "--data", p(&f.data), "--out", p(&resumed)]);
    }
    ok(&["train", "--config", p(&half), "--data", p(&f.data), "--out", p(&resumed)]);
    ok(&["train", "--config", p(&f.config), "--data", p(&f.data), "--out", p(&resumed), "--resume"]);
    assert_eq!(
        fs::read(resumed.join("policy.ckpt")).unwrap(),
        fs::read(f.model.join("policy.ckpt")).unwrap()
    );
}

#[test]
fn replace_only_ablation_runs() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(16);
    cfg.train.operators_allowed = vec![OperatorKind::Rep];
    let path = dir.path().join("rep.json");
    cfg.save(&path).unwrap();
    let model = dir.path().join("m");
    for stage in ["pretrain-lm", "pretrain-classifier", "train"] {
        ok(&[stage, "--config", p(&path), "--data", p(&f.data), "--out", p(&model)]);
    }
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model.join("manifest-train.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["train"]["operators_allowed"], serde_json::json!(["Rep"]));
}

#[test]
fn transfer_with_full_threshold_copies_input() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = f.data.join("s1").join("test.txt");
    let out = dir.path().join("out.txt");
    ok(&["transfer", "--model", p(&f.model), "--input", p(&input), "--p-stop", "1.0", "--output", p(&out)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn transfer_traces_replay_to_the_outputs() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = f.data.join("s2").join("test.txt");
    let out = dir.path().join("out.txt");
    let trace = dir.path().join("trace.jsonl");
    ok(&[
        "transfer",
        "--model",
        p(&f.model),
        "--input",
        p(&input),
        "--direction",
        "s2-to-s1",
        "--p-stop",
        "0.1",
        "--j-max",
        "3",
        "--output",
        p(&out),
        "--trace-out",
        p(&trace),
    ]);
    let inputs: Vec<Vec<String>> = fs::read_to_string(&input)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    let outputs: Vec<String> = fs::read_to_string(&out).unwrap().lines().map(String::from).collect();
    let traces = parse_traces(&fs::read_to_string(&trace).unwrap(), inputs.len()).unwrap();
    assert_eq!(outputs.len(), inputs.len());
    assert!(traces.iter().any(|t| !t.steps.is_empty()));
    for ((src, t), o) in inputs.iter().zip(&traces).zip(&outputs) {
        assert!(t.len() <= 3);
        assert_eq!(&t.replay(src).unwrap().join(" "), o);
    }
}

#[test]
fn transfer_reads_model_dir_from_environment() {
    let f = fixture();
    let input = f.data.join("s1").join("test.txt");
    let out = bin()
        .args(["transfer", "--input", p(&input), "--p-stop", "1.0"])
        .env("STYLEDIT_MODEL_DIR", &f.model)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, fs::read(&input).unwrap());
}

#[test]
fn unknown_direction_is_a_usage_error() {
    let f = fixture();
    let input = f.data.join("s1").join("test.txt");
    let out = run(&["transfer", "--model", p(&f.model), "--input", p(&input), "--direction", "up"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_outputs_against_themselves_gives_full_bleu() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let test = f.data.join("s1").join("test.txt");
    let report = dir.path().join("report.json");
    ok(&[
        "evaluate",
        "--model",
        p(&f.model),
        "--outputs",
        p(&test),
        "--test",
        p(&test),
        "--references",
        p(&test),
        "--synthetic-spec",
        p(&f.data.join("synthetic-spec.json")),
        "--report",
        p(&report),
    ]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((r["bleu"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert!((r["bleu_source"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(r["synthetic_oracle"]["style_flip_rate"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_rejects_misaligned_references() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let test = f.data.join("s1").join("test.txt");
    let short = dir.path().join("short.txt");
    fs::write(&short, "the food was bad .\n").unwrap();
    let out = run(&["evaluate", "--model", p(&f.model), "--outputs", p(&test), "--test", p(&test), "--references", p(&short)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("contract violation"));
}

#[test]
fn sweep_writes_csv_and_plot() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "--model", p(&f.model), "--data", p(&f.data), "--jobs", "2", "--out", p(dir.path())]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(fs::metadata(dir.path().join("sweep.svg")).unwrap().len() > 0);
}

#[test]
fn score_emits_one_row_per_sentence() {
    let f = fixture();
    let input = f.data.join("s1").join("test.txt");
    let out = ok(&["score", "--model", p(&f.model), "--style", "s1", "--input", p(&input)]);
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), fs::read_to_string(&input).unwrap().lines().count());
    for r in rows {
        let s = r["score"].as_f64().unwrap();
        assert!(s > 0.0 && s <= 1.0);
    }
}
