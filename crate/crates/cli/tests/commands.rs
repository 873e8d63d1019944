use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multimix::models::{FeatureConfig, TaskModel, TokenTaggerModel};

fn bin(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multimix"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

const SMALL: &str = r#"{"task": "tagging", "synth": {"train_size": 40, "dev_size": 20, "test_size": 20}}"#;

fn synth_data(dir: &Path) -> PathBuf {
    let cfg = write(dir, "synth.json", SMALL);
    let out = dir.join("data");
    assert!(bin(&["synth", "--seed", "3"], &cfg, &out).status.success());
    out
}

#[test]
fn missing_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bin(&["run", "--seed", "1"], &dir.path().join("nope.json"), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let err = String::from_utf8(o.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "Usage");
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    assert_eq!(bin(&["run", "--seed", "1", "--set", "coteach.nope=1"], &cfg, &out).status.code(), Some(1));
    assert_eq!(bin(&["run"], &cfg, &out).status.code(), Some(1));
    assert!(!out.exists());
    let bad = write(dir.path(), "bad.json", r#"{"task": "tagging", "synth": {"rho": 2.0}}"#);
    let o = bin(&["run", "--seed", "1"], &bad, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("ConfigInvalid"));
}

#[test]
fn run_writes_report_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    let o = bin(&["run", "--seed", "2", "--set", "coteach.alpha=0.5"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["coteach"]["alpha"], 0.5);
    assert_eq!(report["config"]["seed"], 2);
    let epochs = report["run"]["epochs"].as_array().unwrap();
    assert_eq!(epochs.len(), 3);
    assert!(epochs.iter().all(|e| e["dev"].as_array().unwrap().len() == 3));
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics, report["test"]);
    let per: Vec<f64> = metrics["multimix"]["per_model"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mean = per.iter().sum::<f64>() / 3.0;
    let std = (per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((metrics["multimix"]["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!((metrics["multimix"]["std"].as_f64().unwrap() - std).abs() < 1e-12);
    for sub in ["warmup", "epoch1", "epoch2", "epoch3", "best"] {
        for m in 1..=3 {
            assert!(out.join("checkpoints").join(sub).join(m.to_string()).is_file(), "{sub}/{m}");
        }
    }
    assert!(out.join("lm.json").is_file());
}

#[test]
fn run_reads_dataset_files() {
    let dir = tempfile::tempdir().unwrap();
    synth_data(dir.path());
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"task": "tagging", "seed": 4,
            "coteach": {"epochs": 1, "distill": {"factors": [80]}},
            "data": {"source_train": "data/source_train.jsonl", "target_train": "data/target_train.jsonl",
                     "target_dev": "data/target_dev.jsonl", "target_test": "data/target_test.jsonl"}}"#,
    );
    let out = dir.path().join("out");
    let o = bin(&["run"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["run"]["sizes"]["source"], 40);
    assert_eq!(report["run"]["epochs"].as_array().unwrap().len(), 1);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(bin(&["synth", "--seed", "5"], &cfg, &a).status.success());
    assert!(bin(&["synth", "--seed", "5"], &cfg, &b).status.success());
    let names = [
        "source_train", "source_dev", "source_test", "target_train", "target_train_gold", "target_dev", "target_test",
    ];
    for name in names {
        let f = format!("{name}.jsonl");
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(lines(&a.join("source_train.jsonl")), 40);
    assert!(!std::fs::read_to_string(a.join("target_train.jsonl")).unwrap().contains("\"labels\""));
}

#[test]
fn augment_emits_delta_samples_each() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_data(dir.path());
    let five: String = std::fs::read_to_string(data.join("target_train.jsonl")).unwrap().lines().take(5).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "five.jsonl", &five);
    let cfg = write(
        dir.path(),
        "aug.json",
        r#"{"task": "tagging", "seed": 1, "data": {"input": "five.jsonl"}, "coteach": {"gen": {"delta": 3}}}"#,
    );
    let out = dir.path().join("out");
    let o = bin(&["augment"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("augmented.jsonl")), 15);
    let first: serde_json::Value = serde_json::from_str(std::fs::read_to_string(out.join("augmented.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["origin_id"].is_string());
}

#[test]
fn distill_keeps_eta_percent_and_logs_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_data(dir.path());
    let ten: String = std::fs::read_to_string(data.join("target_train.jsonl")).unwrap().lines().take(10).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "ten.jsonl", &ten);
    TokenTaggerModel::new(FeatureConfig::default(), 7, 9).save(&dir.path().join("model")).unwrap();
    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"task": "tagging", "seed": 1, "data": {"input": "ten.jsonl"}, "models": ["model"], "distill_factor": 80}"#,
    );
    let out = dir.path().join("out");
    let o = bin(&["distill"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&out.join("distilled.jsonl")), 8);
    let mut rdr = csv::Reader::from_path(out.join("loss_stats.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["id", "length", "loss", "confidence", "goodness"]);
    assert_eq!(rdr.records().count(), 10);
}

#[test]
fn eval_scores_a_checkpoint_directory() {
    let dir = tempfile::tempdir().unwrap();
    synth_data(dir.path());
    let ckpt = dir.path().join("ckpt");
    std::fs::create_dir(&ckpt).unwrap();
    for i in 1..=3u64 {
        TokenTaggerModel::new(FeatureConfig::default(), 7, i).save(&ckpt.join(i.to_string())).unwrap();
    }
    let cfg = write(dir.path(), "e.json", r#"{"seed": 1, "data": {"input": "data/target_test.jsonl"}, "models": ["ckpt"]}"#);
    let out = dir.path().join("out");
    let o = bin(&["eval"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["metric"], "micro_f1");
    assert_eq!(m["scores"]["per_model"].as_array().unwrap().len(), 3);
    assert_eq!(m["prf"].as_array().unwrap().len(), 3);
}
