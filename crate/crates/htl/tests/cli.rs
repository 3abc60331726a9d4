//! End-to-end runs of the `htl` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use htl::records::load_records;
use htl_core::harness::{Method, Setting};

fn htl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htl")).args(args).env_remove("HTL_JOBS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = htl(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn synth(dir: &Path, intact: usize) {
    ok(&[
        "synth", "--out", dir.to_str().unwrap(), "--seed", "3", "--intact", &intact.to_string(), "--amputee", "0",
        "--channels", "4", "--movements", "3",
    ]);
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    for args in [&["experiment"][..], &["bogus"], &["grid", "--seed", "x"], &[]] {
        let o = htl(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error[usage]: "), "{err}");
    }
    assert_eq!(htl(&["--help"]).status.code(), Some(0));
    assert_eq!(htl(&["experiment", "--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one_with_their_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let o = htl(&[
        "experiment", "--data", missing.to_str().unwrap(), "--setting", "optimized", "--pairing", "ii", "--methods",
        "notransfer", "--seed", "1", "--out", "x.tsv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[io]: "), "{}", stderr(&o));
}

#[test]
fn pipeline_and_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let feats = dir.path().join("feats");
    synth(&data, 3);
    let listed = ok(&["features", "--data", data.to_str().unwrap(), "--out", feats.to_str().unwrap(), "--kind", "avg"]);
    assert_eq!(listed.lines().count(), 3);
    let f = feats.to_str().unwrap();

    let out = ok(&[
        "grid", "--features", f, "--subject", "intact-01", "--method", "notransfer", "--C", "7", "--gamma", "0.3", "--seed",
        "2", "--subsample", "10",
    ]);
    assert!(out.starts_with("C=7 gamma=0.3 score="), "{out}");

    let sources = dir.path().join("sources");
    fs::create_dir(&sources).unwrap();
    for s in ["intact-02", "intact-03"] {
        let path = sources.join(format!("{s}.json"));
        ok(&[
            "train", "--features", f, "--subject", s, "--method", "notransfer", "--C", "10", "--gamma", "0.1",
            "--subsample", "10", "--out", path.to_str().unwrap(),
        ]);
    }
    let model = dir.path().join("mkt.json");
    ok(&[
        "train", "--features", f, "--subject", "intact-01", "--method", "multikt", "--C", "10", "--gamma", "0.1", "--sources",
        sources.to_str().unwrap(), "--subsample", "10", "--out", model.to_str().unwrap(),
    ]);
    let line = ok(&["eval", "--model", model.to_str().unwrap(), "--features", f]);
    assert!(line.starts_with("subject=intact-01 method=multikt metric=balanced_accuracy value="), "{line}");
    let value: f64 = line.split_whitespace().find_map(|t| t.strip_prefix("value=")).unwrap().parse().unwrap();
    assert!(value > 0.5, "{line}");
}

#[test]
fn realistic_experiment_cardinality_and_config_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 4);
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        format!(
            r#"{{"data": {:?}, "setting": "optimized", "pairing": "ii", "methods": ["notransfer", "prior", "multikt"],
                "seed": 7, "grid-C": [1, 100], "grid-gamma": [0.1], "jobs": 1}}"#,
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = dir.path().join("r.tsv");
    // The command line overrides the configured setting.
    ok(&["--config", config.to_str().unwrap(), "experiment", "--setting", "realistic", "--out", out.to_str().unwrap()]);
    let recs = load_records(&out).unwrap();
    assert_eq!(recs.len(), 4 * 15 * 3);
    assert!(recs.iter().all(|r| r.setting == Setting::Realistic && r.seed == 7));
    for m in [Method::NoTransfer, Method::Prior, Method::MultiKt] {
        assert_eq!(recs.iter().filter(|r| r.method == m).count(), 60);
    }
    assert!(recs.iter().all(|r| (r.method == Method::Prior) == r.gamma.is_none()));
}
