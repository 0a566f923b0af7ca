use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use taxel_core::optics::io::read_depth_raw;

fn taxel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxel")).args(args).output().expect("taxel runs")
}

fn ok(args: &[&str]) -> Output {
    let out = taxel(args);
    assert!(out.status.success(), "taxel {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path → bytes for every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

const SMALL_GRID: &str = r#"{
  "shapes": ["circle", "triangle"],
  "hardness_grades": [20.0, 60.0],
  "press_depths": [0.4, 1.0],
  "repetitions": 3
}"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    data: PathBuf,
}

/// One small dataset shared by the tests of this file.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("grid.json");
        fs::write(&config, SMALL_GRID).unwrap();
        let data = root.join("data");
        ok(&["gen-data", "--config", s(&config), "--out", s(&data), "--seed", "7"]);
        Fixture { _dir: dir, root, config, data }
    })
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn gen_data_twice_gives_identical_trees() {
    let f = fixture();
    let dir = scratch();
    let again = dir.path().join("again");
    let parallel = dir.path().join("parallel");
    ok(&["gen-data", "--config", s(&f.config), "--out", s(&again), "--seed", "7"]);
    ok(&["gen-data", "--config", s(&f.config), "--out", s(&parallel), "--seed", "7", "--jobs", "2"]);
    let first = tree(&f.data);
    assert_eq!(first.keys().filter(|k| k.ends_with("gt.json")).count(), 24);
    assert!(first == tree(&again));
    assert!(first == tree(&parallel));
}

#[test]
fn resolved_config_replays_the_run() {
    let f = fixture();
    let dir = scratch();
    let replay = dir.path().join("replay");
    let resolved = f.data.join("config.resolved.json");
    // no --seed: the replayed seed is used
    ok(&["gen-data", "--config", s(&resolved), "--out", s(&replay)]);
    assert!(tree(&f.data) == tree(&replay));
    // a different seed changes the data
    let other = dir.path().join("other");
    ok(&["gen-data", "--config", s(&resolved), "--out", s(&other), "--seed", "8"]);
    assert_ne!(fs::read(f.data.join("manifest.json")).unwrap(), fs::read(other.join("manifest.json")).unwrap());
}

#[test]
fn reconstructing_the_reference_gives_zero_depth() {
    let dir = scratch();
    let cal = dir.path().join("cal");
    ok(&["calibrate", "--out", s(&cal)]);
    for file in ["lut.bin", "reference.png", "calibration.json", "sweep.csv", "config.resolved.json"] {
        assert!(cal.join(file).exists(), "{file}");
    }
    let reference = cal.join("reference.png");
    let depth = dir.path().join("recon").join("depth.raw");
    ok(&[
        "reconstruct",
        "--frame",
        s(&reference),
        "--ref",
        s(&reference),
        "--lut",
        s(&cal.join("lut.bin")),
        "--out",
        s(&depth),
    ]);
    let d = read_depth_raw(&depth).unwrap();
    assert!(d.depth.as_slice().iter().all(|&v| v == 0.0));
    assert!(dir.path().join("recon").join("config.resolved.json").exists());
    // write-once
    let again = taxel(&[
        "reconstruct",
        "--frame",
        s(&reference),
        "--ref",
        s(&reference),
        "--lut",
        s(&cal.join("lut.bin")),
        "--out",
        s(&depth),
    ]);
    assert_eq!(code(&again), 2);
}

#[test]
fn press_dumps_a_full_record() {
    let dir = scratch();
    let out = dir.path().join("press");
    let args = ["press", "--shape", "t-shape", "--hardness", "40", "--depth", "1.0", "--dx", "-0.2", "--seed", "3"];
    ok(&[&args[..], &["--out", s(&out)]].concat());
    // 1 mm at 0.5 mm/s and 10 Hz
    assert_eq!(fs::read_dir(out.join("frames")).unwrap().count(), 21);
    let force = fs::read_to_string(out.join("force.csv")).unwrap();
    assert!(force.starts_with("t,F\n"));
    let again = dir.path().join("again");
    ok(&[&args[..], &["--out", s(&again)]].concat());
    assert!(tree(&out) == tree(&again));
}

#[test]
fn train_eval_ablate_and_report() {
    let f = fixture();
    let dir = scratch();
    let cfg = dir.path().join("train.json");
    fs::write(&cfg, r#"{"epochs": 2, "batch_size": 4}"#).unwrap();
    let model_dir = dir.path().join("model");
    ok(&["train", "--data", s(&f.data), "--config", s(&cfg), "--out", s(&model_dir), "--seed", "5"]);
    let ckpt = model_dir.join("model.ckpt");
    for file in ["history.csv", "history.json", "config.resolved.json"] {
        assert!(model_dir.join(file).exists(), "{file}");
    }

    // replaying the resolved config reproduces the checkpoint
    let replay = dir.path().join("replay");
    ok(&["train", "--data", s(&f.data), "--config", s(&model_dir.join("config.resolved.json")), "--out", s(&replay)]);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(replay.join("model.ckpt")).unwrap());

    let eval = dir.path().join("eval");
    let out = ok(&["eval", "--model", s(&ckpt), "--data", s(&f.data), "--labels", "shape", "--out", s(&eval)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("shape accuracy"));
    let confusion = fs::read_to_string(eval.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().next(), Some("true\\predicted,circle,triangle"));

    let ablation = dir.path().join("ablate");
    ok(&["ablate", "--data", s(&f.data), "--config", s(&cfg), "--out", s(&ablation), "--seed", "5"]);
    for name in ["fused", "geometry-only", "force-only"] {
        assert!(ablation.join(format!("confusion_{name}.csv")).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ablation.join("summary.json")).unwrap()).unwrap();
    let acc = |k: &str| summary[k].as_f64().unwrap();
    let dominates =
        acc("fused_accuracy") >= acc("geometry_only_accuracy") && acc("fused_accuracy") >= acc("force_only_accuracy");
    assert_eq!(summary["fused_dominates"].as_bool(), Some(dominates));

    let runs = [s(&f.data), s(&model_dir), s(&eval), s(&ablation)];
    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    ok(&[&["report"], &runs[..], &["--out", s(&r1)]].concat());
    ok(&[&["report"], &runs[..], &["--out", s(&r2)]].concat());
    let (t1, t2) = (tree(&r1), tree(&r2));
    // the resolved config names the runs, which are the same paths
    assert!(t1 == t2);
    let metrics = String::from_utf8(t1[Path::new("metrics.csv")].clone()).unwrap();
    assert!(metrics.starts_with("run,command,metric,value\n"));
    assert!(metrics.contains(",ablate,margin_pp,"));
    assert!(metrics.contains(",gen-data,samples,24\n"));
    let curves = String::from_utf8(t1[Path::new("curves.csv")].clone()).unwrap();
    assert_eq!(curves.lines().filter(|l| l.contains(",force-only,")).count(), 2);
}

#[test]
fn baseline_writes_a_report() {
    let f = fixture();
    let dir = scratch();
    let cfg = dir.path().join("baseline.json");
    fs::write(&cfg, r#"{"epochs": 5}"#).unwrap();
    let out = dir.path().join("baseline");
    ok(&["baseline", "--data", s(&f.data), "--config", s(&cfg), "--out", s(&out)]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report["total"].as_u64(),
        Some(
            fs::read_to_string(out.join("confusion.csv"))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| { l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).sum::<u64>() })
                .sum()
        )
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let f = fixture();
    let dir = scratch();
    let out = dir.path().join("x");

    let missing = taxel(&["train", "--data", s(&dir.path().join("absent")), "--out", s(&out)]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--data"));
    assert!(!out.exists(), "nothing is written for a rejected command");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"repetitions": 1, "repetition": 2}"#).unwrap();
    let unknown = taxel(&["gen-data", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("repetition"));

    // outputs are write-once
    assert_eq!(code(&taxel(&["gen-data", "--config", s(&f.config), "--out", s(&f.data)])), 2);
    // replaying a config of another command
    let wrong = taxel(&["calibrate", "--config", s(&f.data.join("config.resolved.json")), "--out", s(&out)]);
    assert_eq!(code(&wrong), 2);

    assert_eq!(code(&taxel(&["no-such-command"])), 2);
    assert_eq!(code(&taxel(&["report", "--out", s(&out), s(&f.root)])), 2);
}

#[test]
fn domain_errors_exit_with_one() {
    let dir = scratch();
    // hardness outside the configured 10..80 HA
    let out =
        taxel(&["press", "--shape", "circle", "--hardness", "95", "--depth", "1.0", "--out", s(&dir.path().join("p"))]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hardness"));
}
