use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qmalware(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmalware"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 60 rows of three numeric features plus a `Class` column.
fn write_raw(dir: &Path) -> PathBuf {
    let mut text = String::from("pslist.nproc,handles.avg,malfind.ninjections,Class\n");
    for i in 0..60 {
        let t = i as f64;
        let a = 40.0 + 6.0 * (1.3 * t).sin();
        let b = 200.0 + 25.0 * (0.7 * t).cos();
        let c = ((0.37 * t) % 1.0) * 4.0;
        let label = if (a - 40.0) / 6.0 + (b - 200.0) / 25.0 > 0.0 { "Malware" } else { "Benign" };
        text.push_str(&format!("{a},{b},{c},{label}\n"));
    }
    let path = dir.join("raw.csv");
    fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "seed": 3,
  "circuit": {{ "n_qubits": 3, "n_layers": 1, "repetitions": 1 }},
  "training": {{ "epochs": 5, "learning_rate": 0.1 }},
  "evaluation": {{ "bootstrap_iterations": 200, "test_fraction": 0.25 }}{extra}
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&qmalware(&[])), 1);
    assert_eq!(code(&qmalware(&["train", "forest", "--data", "x.csv"])), 1);
    assert_eq!(code(&qmalware(&["--help"])), 0);
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_raw(dir.path());
    let cfg = write_config(dir.path(), "");
    let pre_dir = dir.path().join("pre");
    let out = qmalware(&["preprocess", "--config", s(&cfg), "--data", s(&raw), "--out-dir", s(&pre_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let processed = pre_dir.join("processed.csv");
    let header = fs::read_to_string(&processed).unwrap();
    assert!(header.starts_with("pc1,pc2,pc3,Class\n"), "{header}");

    for kind in ["vqc", "qsvm", "ensemble"] {
        let model_dir = dir.path().join(kind);
        let out = qmalware(&[
            "train", kind, "--config", s(&cfg), "--data", s(&processed), "--out-dir", s(&model_dir),
        ]);
        assert_eq!(code(&out), 0, "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let model_file = fs::read_to_string(model_dir.join("model.json")).unwrap();
        assert!(model_file.contains(&format!("\"model_type\": \"{kind}\"")));
    }

    let vqc_model = dir.path().join("vqc/model.json");
    let pred_dir = dir.path().join("pred");
    let out = qmalware(&[
        "predict", "--config", s(&cfg), "--model", s(&vqc_model), "--data", s(&raw),
        "--preprocess", s(&pre_dir.join("preprocess.json")), "--out-dir", s(&pred_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let preds = fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    assert!(preds.starts_with("sample_index,probability,label\n"));
    assert_eq!(preds.lines().count(), 61);

    let base_dir = dir.path().join("base");
    let out = qmalware(&[
        "predict", "--config", s(&cfg), "--model", s(&dir.path().join("qsvm/model.json")), "--data", s(&raw),
        "--preprocess", s(&pre_dir.join("preprocess.json")), "--out-dir", s(&base_dir),
    ]);
    assert_eq!(code(&out), 0);

    let eval_dir = dir.path().join("eval");
    let out = qmalware(&[
        "evaluate", "--config", s(&cfg), "--predictions", s(&pred_dir.join("predictions.csv")), "--data", s(&raw),
        "--baseline", s(&base_dir.join("predictions.csv")), "--out-dir", s(&eval_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("accuracy") && table.contains("Cohen's kappa"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_dir.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(json["n_samples"], 60);

    let explain_dir = dir.path().join("explain");
    let out = qmalware(&[
        "explain", "--config", s(&cfg), "--model", s(&vqc_model), "--data", s(&processed), "--row", "2",
        "--out-dir", s(&explain_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let attr = fs::read_to_string(explain_dir.join("attribution.csv")).unwrap();
    assert!(attr.starts_with("feature_name,raw_score,weighted_score,rank\npc1,"));

    let out = qmalware(&[
        "explain", "--config", s(&cfg), "--model", s(&dir.path().join("qsvm/model.json")), "--data",
        s(&processed), "--out-dir", s(&explain_dir),
    ]);
    assert_eq!(code(&out), 1);
    let out = qmalware(&[
        "explain", "--config", s(&cfg), "--model", s(&dir.path().join("ensemble/model.json")), "--data",
        s(&processed), "--method", "score", "--out-dir", s(&explain_dir),
    ]);
    assert_eq!(code(&out), 0);

    let kernel_dir = dir.path().join("kernel");
    let out = qmalware(&["kernel", "--config", s(&cfg), "--data", s(&processed), "--out-dir", s(&kernel_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let k = fs::read_to_string(kernel_dir.join("kernel.csv")).unwrap();
    assert_eq!(k.lines().count(), 60);
    assert_eq!(k.lines().next().unwrap().split(',').next().unwrap(), "1");
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_raw(dir.path());
    let cfg = write_config(dir.path(), ",\n  \"model\": \"ensemble\"");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = qmalware(&["run", "--config", s(&cfg), "--data", s(&raw), "--out-dir", s(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["report.json", "report.txt", "model.json", "preprocess.json", "predictions.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    let out = qmalware(&["run", "--config", s(&cfg), "--seed", "4", "--data", s(&raw), "--out-dir", s(&c)]);
    assert_eq!(code(&out), 0);
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_raw(dir.path());
    let out_dir = dir.path().join("out");

    let missing = dir.path().join("nope.csv");
    let out = qmalware(&["run", "--data", s(&missing), "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));

    let deep = write_config(dir.path(), ",\n  \"circuit\": { \"n_layers\": 11, \"repetitions\": 2 }");
    let out = qmalware(&["run", "--config", s(&deep), "--data", s(&raw), "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"seed\": ").unwrap();
    assert_eq!(code(&qmalware(&["run", "--config", s(&bad), "--data", s(&raw)])), 1);

    let cfg = write_config(dir.path(), "");
    let truncated = dir.path().join("model.json");
    fs::write(&truncated, "{\"format_version\": \"1\", \"model_type\": \"vqc\", \"model\": {\"n_qubits\"").unwrap();
    let out = qmalware(&[
        "predict", "--config", s(&cfg), "--model", s(&truncated), "--data", s(&raw), "--out-dir", s(&out_dir),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte"));
}
