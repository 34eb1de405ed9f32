use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use twindann::models::{load_checkpoint, save_checkpoint, Checkpoint, Network};

const BIN: &str = env!("CARGO_BIN_EXE_twindann");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("TWINDANN_OUT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &[&str] = &[
    "--source-traj",
    "2",
    "--target-traj",
    "18",
    "--seq-len",
    "64",
];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_prints_counts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &[
            "generate",
            "--out",
            "a",
            "--source-traj",
            "10",
            "--seq-len",
            "30",
        ],
    );
    assert!(text.contains("source: 90 samples"), "{text}");
    assert!(text.contains("Healthy=10"));
    assert!(text.contains("target: 90 samples"));
    ok(
        dir.path(),
        &[
            "generate",
            "--out",
            "b",
            "--source-traj",
            "10",
            "--seq-len",
            "30",
        ],
    );
    for f in ["source.json", "source.bin", "target.json", "target.bin"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn default_corpus_has_full_scale_counts() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["generate", "--out", "c", "--seq-len", "12"]);
    assert!(text.contains("source: 3600 samples"), "{text}");
    assert!(text.contains("Healthy=400"));
    assert!(text.contains("target: 90 samples"));
}

#[test]
fn output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args([
            "generate",
            "--source-traj",
            "1",
            "--target-traj",
            "9",
            "--seq-len",
            "20",
        ])
        .current_dir(dir.path())
        .env("TWINDANN_OUT", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/source.json").is_file());
}

#[test]
fn train_one_epoch_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &with(&["generate", "--out", "corpus"], SMALL));
    ok(
        d,
        &[
            "train", "--out", "run", "--corpus", "corpus", "--epochs", "1", "--model", "dann",
        ],
    );
    let sidecar = json(&d.join("run/dann.json"));
    assert_eq!(sidecar["extra"]["history"].as_array().unwrap().len(), 1);

    let eval = [
        "eval",
        "--out",
        "run",
        "--corpus",
        "corpus",
        "--checkpoint",
        "run/dann.json",
    ];
    ok(d, &eval);
    let first = fs::read(d.join("run/eval_dann_target.json")).unwrap();
    ok(d, &eval);
    assert_eq!(
        first,
        fs::read(d.join("run/eval_dann_target.json")).unwrap()
    );
    let report = json(&d.join("run/eval_dann_target.json"));
    assert_eq!(report["metrics"]["n"], 18);
}

#[test]
fn trained_checkpoint_beats_its_initialisation_on_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "generate",
            "--out",
            "corpus",
            "--source-traj",
            "4",
            "--target-traj",
            "9",
            "--seq-len",
            "64",
        ],
    );
    ok(
        d,
        &[
            "train", "--out", "run", "--corpus", "corpus", "--epochs", "30", "--model", "cnn",
        ],
    );
    let trained = load_checkpoint(&d.join("run/cnn.json")).unwrap();
    let fresh = Checkpoint {
        network: Network::init(trained.network.kind(), &trained.config, trained.seed).unwrap(),
        ..trained.clone()
    };
    fs::create_dir_all(d.join("fresh")).unwrap();
    save_checkpoint(&fresh, &d.join("fresh/cnn.json")).unwrap();
    let accuracy = |ckpt: &str, out: &str| {
        ok(
            d,
            &[
                "eval",
                "--out",
                out,
                "--corpus",
                "corpus",
                "--checkpoint",
                ckpt,
                "--on",
                "source",
            ],
        );
        json(&d.join(out).join("eval_cnn_source.json"))["metrics"]["accuracy"]
            .as_f64()
            .unwrap()
    };
    let a = accuracy("run/cnn.json", "run");
    let b = accuracy("fresh/cnn.json", "fresh");
    assert!(a >= b, "trained {a} vs initial {b}");
}

#[test]
fn benchmark_report_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = with(
        &[
            "benchmark",
            "--epochs",
            "1",
            "--seeds",
            "0,1",
            "--models",
            "cnn,tcn,dann",
        ],
        SMALL,
    );
    let text = ok(d, &with(&args, &["--out", "one"]));
    let body: Vec<&str> = text.lines().collect();
    for name in ["CNN", "TCN", "DANN"] {
        assert!(
            body.iter().any(|l| l.starts_with(name) && l.contains('±')),
            "{text}"
        );
    }
    let table2 = body.iter().position(|l| l.starts_with("Table II")).unwrap();
    let rows: Vec<&&str> = body[table2 + 2..]
        .iter()
        .filter(|l| !l.is_empty())
        .collect();
    assert_eq!(rows.len(), 9);
    assert!(rows[0].starts_with("Healthy"));
    assert!(rows[8].starts_with("Motor 4 Steady state error"));

    ok(d, &with(&args, &["--out", "two", "--jobs", "2"]));
    for f in ["benchmark.json", "benchmark.txt"] {
        assert_eq!(
            fs::read(d.join("one").join(f)).unwrap(),
            fs::read(d.join("two").join(f)).unwrap(),
            "{f}"
        );
    }
    let report = json(&d.join("one/benchmark.json"));
    assert_eq!(report["seeds"], serde_json::json!([0, 1]));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["transductive"], true);
    assert_eq!(report["runs"].as_array().unwrap().len(), 6);
}

#[test]
fn ablation_splits_ninety_targets_into_63_and_27() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = ok(
        d,
        &[
            "ablate",
            "--out",
            "abl",
            "--epochs",
            "1",
            "--seeds",
            "3",
            "--models",
            "cnn",
            "--source-traj",
            "2",
            "--target-traj",
            "90",
            "--seq-len",
            "64",
        ],
    );
    assert!(
        text.contains("Only real") && text.contains("Twin-supported"),
        "{text}"
    );
    let report = json(&d.join("abl/ablation.json"));
    let split = &report["splits"][0];
    assert_eq!(
        (split["train"].as_u64(), split["test"].as_u64()),
        (Some(63), Some(27))
    );
    assert_eq!(split["stratified"], true);
    assert!(d.join("abl/benchmark.json").is_file());
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let code = |args: &[&str]| run(d, args).status.code().unwrap();
    assert_eq!(code(&["generate", "--config", "bad.toml"]), 2);
    assert_eq!(code(&["benchmark", "--epochs", "0", "--seq-len", "64"]), 2);
    assert_eq!(
        code(&["train", "--corpus", "does-not-exist", "--epochs", "1"]),
        3
    );
    let err = run(d, &["train", "--corpus", "does-not-exist"]);
    assert!(String::from_utf8_lossy(&err.stderr).contains("does-not-exist"));
    assert_eq!(code(&["eval", "--checkpoint", "missing.json"]), 3);
    assert_ne!(code(&["train", "--model", "lstm"]), 0);
}

#[test]
fn edited_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &with(&["generate", "--out", "corpus"], SMALL));
    ok(
        d,
        &[
            "train", "--out", "run", "--corpus", "corpus", "--epochs", "1", "--model", "cnn",
        ],
    );
    let path = d.join("run/cnn.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(
        &path,
        text.replacen("\"filters\": 64", "\"filters\": 32", 1),
    )
    .unwrap();
    let out = run(
        d,
        &["eval", "--corpus", "corpus", "--checkpoint", "run/cnn.json"],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
