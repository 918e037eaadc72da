use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn thc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thc"))
        .args(args)
        .output()
        .expect("run thc")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small cohort and model so that training takes well under a second.
fn small_cohort(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let o = thc(&[
        "gen-data", "--preset", "separable", "--n", "20", "--size", "8", "--seed", "1", "--out",
        s(&data),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    data
}

const SMALL_MODEL: [&str; 4] = ["--channels", "2,4", "--dense", "4"];

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn gen_data_writes_cohort_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = thc(&["gen-data", "--preset", "lung-like", "--n", "146", "--seed", "7", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let printed = String::from_utf8(o.stdout).unwrap();
        assert_eq!(printed.trim(), s(&out.join("manifest.json")));
    }
    assert_eq!(std::fs::read_dir(a.join("volumes")).unwrap().count(), 146);
    let fa = files(&a);
    let fb = files(&b);
    assert_eq!(fa.len(), 148);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(&a).unwrap(), y.strip_prefix(&b).unwrap());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen-data");
    assert_eq!(manifest["seeds"][0], 7);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 147);
}

#[test]
fn gen_data_rejects_bad_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    for args in [
        vec!["--n", "5"],
        vec!["--preset", "brain"],
        vec!["--size", "30"],
        vec!["--label-noise", "0.9"],
        vec!["--bogus"],
    ] {
        let mut full = vec!["gen-data", "--out", s(&out)];
        full.extend(args.iter());
        assert_eq!(code(&thc(&full)), 2, "{args:?}");
    }
}

#[test]
fn train_writes_loadable_checkpoint_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let out = tmp.path().join("m");
    let mut args = vec!["train", "--alpha", "1.0", "--epochs", "5", "--data", s(&data), "--out", s(&out)];
    args.extend(SMALL_MODEL);
    let o = thc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let model = thc_core::net::checkpoint::load(&out.join("model.thcm")).unwrap();
    assert_eq!(model.config().input_shape, [8, 8, 1]);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
    assert!(trace.starts_with("epoch,rec_loss,pred_loss,total_loss\n"));
}

#[test]
fn train_traces_depend_on_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let trace = |alpha: &str| {
        let out = tmp.path().join(format!("m{alpha}"));
        let mut args = vec!["train", "--alpha", alpha, "--epochs", "3", "--data", s(&data), "--out", s(&out)];
        args.extend(SMALL_MODEL);
        assert_eq!(code(&thc(&args)), 0);
        std::fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    assert_ne!(trace("1.0"), trace("1.5"));
}

#[test]
fn train_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let out = tmp.path().join("m");
    let base = ["train", "--data", s(&data), "--out", s(&out), "--epochs", "2"];
    let run = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend(SMALL_MODEL);
        a.extend(extra);
        thc(&a)
    };
    assert_eq!(code(&run(&["--alpha", "0"])), 2);
    assert_eq!(code(&run(&["--alpha", "-1"])), 2);
    assert_eq!(code(&run(&["--optimizer", "lbfgs"])), 2);
    assert_eq!(code(&run(&["--channels", "2,x"])), 2);
    let missing = thc(&["train", "--data", s(&tmp.path().join("nope")), "--out", s(&out)]);
    assert_eq!(code(&missing), 3);
    let diverged = run(&["--optimizer", "sgd", "--lr", "1e300"]);
    assert_eq!(code(&diverged), 4, "{}", stderr(&diverged));
    assert!(stderr(&diverged).contains("non-finite loss in epoch "), "{}", stderr(&diverged));
}

fn sweep(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut a = vec!["sweep", "--data", s(data), "--out", s(out), "--epochs", "1"];
    a.extend(SMALL_MODEL);
    a.extend(extra);
    thc(&a)
}

#[test]
fn sweep_grid_rows_and_baseline_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let out = tmp.path().join("r");
    let o = sweep(&data, &out, &["--grid", "0.5:2.5:0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let alphas: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(alphas, ["0.500000", "1.000000", "1.500000", "2.000000", "2.500000"]);
    let md = std::fs::read_to_string(out.join("sweep.md")).unwrap();
    assert!(md.contains("N/A (Shannon entropy)"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), md);

    let o = sweep(&data, &tmp.path().join("r2"), &["--grid", "0.5:0.9:0.2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("baseline required"), "{}", stderr(&o));
    assert!(!tmp.path().join("r2").exists());
    let o = sweep(&data, &tmp.path().join("r3"), &["--alphas", "1.0,2.0", "--grid", "1:2:1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_accepts_a_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        format!(
            "alpha_grid = [1.0, 3.0]\nk = 4\ndata = {:?}\n[train]\nepochs = 1\n[model]\nencoder_levels = 2\nchannels_per_level = [2, 2]\ndense_widths = []\n",
            s(&data)
        ),
    )
    .unwrap();
    let out = tmp.path().join("r");
    let o = thc(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("alpha,fold1,fold2,fold3,fold4,average,"));
    assert_eq!(csv.lines().count(), 3);

    std::fs::write(&cfg, "alpha_grid = [1.0]\nepochs = 3\n").unwrap();
    let o = thc(&["sweep", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn report_rerenders_and_rejects_corrupt_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_cohort(tmp.path());
    let out = tmp.path().join("r");
    assert_eq!(code(&sweep(&data, &out, &["--alphas", "1.0,2.0"])), 0);
    let csv_path = out.join("sweep.csv");

    let o = thc(&["report", "--input", s(&csv_path)]);
    assert_eq!(code(&o), 0);
    let md = String::from_utf8(o.stdout).unwrap();
    assert_eq!(md, std::fs::read_to_string(out.join("sweep.md")).unwrap());
    assert!(md.contains("N/A (Shannon entropy)"));

    let again = tmp.path().join("again.csv");
    let o = thc(&["report", "--input", s(&csv_path), "--format", "csv", "--out", s(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&csv_path).unwrap());

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "alpha,fold1,fold2\n0..84,x\n").unwrap();
    let target = tmp.path().join("never.md");
    let o = thc(&["report", "--input", s(&bad), "--out", s(&target)]);
    assert_eq!(code(&o), 3);
    assert!(!target.exists());
    assert!(o.stdout.is_empty());
    assert_eq!(code(&thc(&["report", "--input", s(&tmp.path().join("missing.csv"))])), 3);
    assert_eq!(code(&thc(&["report", "--input", s(&csv_path), "--format", "html"])), 2);
}
