use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn phenolab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phenolab"))
        .current_dir(dir)
        .env_remove("PHENOLAB_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path) {
    let out = phenolab(dir, &["synth", "--users", "4", "--days", "20", "--seed", "7", "--plant", "wifi", "--out", "d/"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_ablate_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let out = phenolab(tmp.path(), &["ablate", "--data", "d/", "--rounds", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert!(report.starts_with("# fingerprint: "));
    assert!(report.contains("task,model,group,metric,mean,std,n_runs,failed_runs,rank"));
    assert!(report.contains("l_h,fcn,wifi,accuracy,"));
    assert!(report.contains("phq9,fcn,all,rmse,"));
    assert!(tmp.path().join("report.md").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = phenolab(tmp.path(), &["ablate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(phenolab(tmp.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn gradcheck_reports_every_architecture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = phenolab(tmp.path(), &["gradcheck"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ["fcn_stress", "fcn_phq9", "lstm_stress"] {
        assert!(text.lines().any(|l| l.starts_with(kind) && l.contains("pass")), "{text}");
    }
}

#[test]
fn strict_ingest_rejects_malformed_rows() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let mut f = fs::OpenOptions::new().append(true).open(tmp.path().join("d/wifi.csv")).unwrap();
    writeln!(f, "u00,not-a-time,somewhere").unwrap();
    let lenient = phenolab(tmp.path(), &["ingest", "--data", "d", "--out", "clean"]);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stdout).contains("1 rows skipped"));
    let strict = phenolab(tmp.path(), &["ingest", "--data", "d", "--out", "clean2", "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn same_config_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let grid = ["--tasks", "l_h,phq9", "--groups", "all,wifi", "--rounds", "2", "--epochs", "10"];
    let run = |out: &str, jobs: &str| {
        let mut args = vec!["--jobs", jobs, "ablate", "--data", "d", "--out", out];
        args.extend(grid);
        let o = phenolab(tmp.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(tmp.path().join(out).join("report.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    fs::write(tmp.path().join("run.cfg"), "ablation.n_rounds = 1\nablation.hyper.epochs = 2\nlocale = comma\n").unwrap();
    let args = ["--config", "run.cfg", "ablate", "--data", "d", "--tasks", "l_h", "--groups", "wifi", "--rounds", "2"];
    let out = phenolab(tmp.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("l_h,fcn,wifi,accuracy,") && l.ends_with(",2,0,1")), "{report}");
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(config["ablation"]["hyper"]["epochs"], 2);
    assert_eq!(config["locale"], "comma");
}

#[test]
fn train_exports_examples_split_and_model() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let out = phenolab(
        tmp.path(),
        &["train", "--data", "d", "--task", "lm_h", "--model", "lstm", "--group", "wifi", "--rounds", "1", "--epochs", "3", "--out", "t"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let examples = fs::read_to_string(tmp.path().join("t/examples.csv")).unwrap();
    assert!(examples.starts_with("task,user,date,split,target,x0,"));
    assert!(examples.lines().skip(1).all(|l| l.starts_with("lm_h,")));
    let split: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("t/split.json")).unwrap()).unwrap();
    assert_eq!(split["policy"], "chronological8020");
    assert!(fs::read_to_string(tmp.path().join("t/model.json")).unwrap().contains("phenolab-model"));

    let bad = phenolab(tmp.path(), &["train", "--data", "d", "--task", "phq9", "--model", "lstm"]);
    assert_eq!(bad.status.code(), Some(1));
}
