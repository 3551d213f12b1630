use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lifi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifi"))
        .args(args)
        .env("LIFI_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = lifi(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, n: usize, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let n = n.to_string();
    let mut args = vec!["gen", "--n", &n, "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out.join("dataset.csv")
}

#[test]
fn gen_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a", 1, &["--seed", "7"]);
    let b = gen(dir.path(), "b", 1, &["--seed", "7"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 1);
    assert!(fs::read_to_string(&a).unwrap().contains("# seed=7"));
}

#[test]
fn without_reflections_both_channels_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.cfg");
    fs::write(&cfg, "zeta_floor = 0\nzeta_ceiling = 0\nzeta_walls = 0\n").unwrap();
    let los = gen(dir.path(), "los", 20, &["--config", s(&cfg), "--channel", "los"]);
    let full = gen(dir.path(), "full", 20, &["--config", s(&cfg), "--channel", "full"]);
    let body = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# channel_flag"))
            .map(String::from)
            .collect()
    };
    assert_eq!(body(&los), body(&full));
}

#[test]
fn train_eval_ber_bench_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "data", 600, &[]);
    let train_to = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--dataset", s(&data), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        out
    };
    let m1 = train_to("mlp1", &["--model", "mlp", "--epochs", "2"]);
    let m2 = train_to("mlp2", &["--model", "mlp", "--epochs", "2"]);
    assert_eq!(fs::read(m1.join("mlp.model")).unwrap(), fs::read(m2.join("mlp.model")).unwrap());
    let loss = fs::read_to_string(m1.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 3);

    let knn = train_to("knn", &["--model", "knn", "--k", "1"]);
    let knn_model = knn.join("knn.model");
    assert!(!knn.join("loss.csv").exists());

    // k = 1 on its own training points reproduces every label
    let eval_dir = dir.path().join("eval_train");
    ok(&["eval", "--model", s(&knn_model), "--dataset", s(&data), "--split", "train", "--out", s(&eval_dir)]);
    let report = fs::read_to_string(eval_dir.join("report.txt")).unwrap();
    let position = report.lines().find(|l| l.starts_with("position mean")).unwrap();
    let value: f64 = position.split_whitespace().last().unwrap().parse().unwrap();
    assert_eq!(value, 0.0);

    let eval_dir = dir.path().join("eval");
    let out = ok(&[
        "eval",
        "--model",
        s(&knn_model),
        "--model",
        s(&m1.join("mlp.model")),
        "--dataset",
        s(&data),
        "--out",
        s(&eval_dir),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(eval_dir.join("cdf_knn.csv").exists());
    assert!(fs::read_to_string(eval_dir.join("cdf_mlp.csv")).unwrap().starts_with("error_cm,cdf\n"));

    let ber_dir = dir.path().join("ber");
    ok(&["ber", "--model", s(&knn_model), "--dataset", s(&data), "--snr-grid", "0:10:30", "--out", s(&ber_dir)]);
    let ber = fs::read_to_string(ber_dir.join("ber.csv")).unwrap();
    assert!(ber.starts_with("snr_db,ber_exact,ber_est\n"));
    assert_eq!(ber.lines().count(), 5);

    let out = ok(&["bench", "--model", s(&knn_model), "--dataset", s(&data), "--queries", "50"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("ms/point"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = lifi(&["train", "--dataset", s(&missing), "--model", "knn", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    let data = gen(dir.path(), "data", 200, &[]);
    let cfg = dir.path().join("big.cfg");
    fs::write(&cfg, "room_l = 6\n").unwrap();
    let other = gen(dir.path(), "other", 200, &["--config", s(&cfg)]);
    let knn = dir.path().join("knn");
    ok(&["train", "--dataset", s(&data), "--model", "knn", "--out", s(&knn)]);
    let out = lifi(&["eval", "--model", s(&knn.join("knn.model")), "--dataset", s(&other), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));

    let out = lifi(&["gen", "--n", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "room_l = -1\n").unwrap();
    let out = lifi(&["gen", "--n", "5", "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
