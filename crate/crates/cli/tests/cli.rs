use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fmsos::io::{load_pairs_csv, read_state, DataFormat};
use fmsos::model::SphereMap;
use fmsos::sphere::geodesic_distance;
use tempfile::TempDir;

const SHORT: &str = "iters = 600\nburn_in = 100\nthin = 5\ncloud_size = 2000\ndistance_points = 500\n";

fn fmsos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmsos")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fmsos(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    fmsos(args).status.code().unwrap()
}

fn config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, format!("{SHORT}{extra}")).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn simulate(dir: &Path, name: &str, extra: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    let cfg = config(dir, extra);
    ok(&["simulate", "--config", s(&cfg), "--seed", seed, "--out", s(&out)]);
    out
}

#[test]
fn simulate_writes_the_requested_rows_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "a", "k = 5\nkappa = 10\nn = 100\n", "1");
    assert_eq!(data_rows(&a.join("data.csv")), 100);
    let first: Vec<Vec<u8>> = ["data.csv", "truth.json"].iter().map(|f| fs::read(a.join(f)).unwrap()).collect();
    simulate(dir.path(), "a", "k = 5\nkappa = 10\nn = 100\n", "1");
    for (f, bytes) in ["data.csv", "truth.json"].iter().zip(&first) {
        assert_eq!(&fs::read(a.join(f)).unwrap(), bytes, "{f}");
    }
    let c = simulate(dir.path(), "c", "k = 5\nkappa = 10\nn = 100\n", "2");
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(c.join("data.csv")).unwrap());
    let text = fs::read_to_string(a.join("data.csv")).unwrap();
    assert!(text.starts_with("# "), "provenance prologue");
    assert!(text.contains("# kappa = 10"));
}

#[test]
fn concentrated_responses_sit_on_the_truth() {
    let dir = TempDir::new().unwrap();
    let out = simulate(dir.path(), "sim", "k = 5\nkappa = 1000000\nn = 200\n", "3");
    let (truth, _) = read_state::<f64>(&out.join("truth.json")).unwrap();
    let data = load_pairs_csv::<f64>(&out.join("data.csv"), DataFormat::UnitVectors).unwrap();
    let worst = data.pairs().iter().map(|(x, y)| geodesic_distance(&truth.map(x), y).unwrap()).fold(0.0, f64::max);
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn fit_predict_evaluate_and_baseline() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "sim", "k = 3\nkappa = 50\nn = 120\nn_test = 60\n", "4");
    let fit_dir = dir.path().join("fit");
    let cfg = config(dir.path(), "");
    let truth = sim.join("truth.json");
    let test = sim.join("test.csv");
    let data = sim.join("data.csv");
    let summary = ok(&[
        "fit", "--config", s(&cfg), "--seed", "5", "--data", s(&data), "--truth", s(&truth), "--out", s(&fit_dir), "--chains", "2",
    ]);
    for key in ["acceptance_atom", "acceptance_birth", "acceptance_rotation", "k_mean", "kappa_mean", "distance_to_truth_mean", "distance_to_truth_sd"] {
        assert!(summary.contains(key), "{key} missing from\n{summary}");
    }
    assert!(fit_dir.join("chain_0.jsonl").exists() && fit_dir.join("chain_1.jsonl").exists());
    assert!(fs::read_to_string(fit_dir.join("summary.txt")).unwrap().contains("# seed = 5"));

    ok(&["predict", "--config", s(&cfg), "--data", s(&test), "--out", s(&fit_dir)]);
    assert_eq!(data_rows(&fit_dir.join("predictions.csv")), 60);

    let eval = ok(&["evaluate", "--config", s(&cfg), "--data", s(&test), "--truth", s(&truth), "--out", s(&fit_dir)]);
    assert!(eval.contains("held_out_log_likelihood"), "{eval}");

    let base = ok(&["baseline-rotation", "--config", s(&cfg), "--seed", "6", "--data", s(&data), "--test", s(&test), "--out", s(&fit_dir)]);
    assert!(base.contains("held_out_log_likelihood") && base.contains("rotation_only"), "{base}");
    let first = fs::read(fit_dir.join("baseline_chain_0.jsonl")).unwrap();
    let again = ok(&["baseline-rotation", "--config", s(&cfg), "--seed", "6", "--data", s(&data), "--test", s(&test), "--out", s(&fit_dir)]);
    assert_eq!(fs::read(fit_dir.join("baseline_chain_0.jsonl")).unwrap(), first);
    assert_eq!(again, base);
}

#[test]
fn fit_is_deterministic_under_a_seed() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), "sim", "k = 3\nkappa = 30\nn = 60\n", "7");
    let cfg = config(dir.path(), "");
    let data = sim.join("data.csv");
    let out = dir.path().join("fit");
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            ok(&["fit", "--config", s(&cfg), "--seed", "8", "--data", s(&data), "--out", s(&out)]);
            fs::read(out.join("chain_0.jsonl")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn empty_data_runs_the_prior() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("empty.csv");
    fs::write(&data, "x1,x2,x3,y1,y2,y3\n").unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("prior");
    let summary = ok(&["fit", "--config", s(&cfg), "--seed", "9", "--data", s(&data), "--out", s(&out)]);
    assert!(summary.contains("mode = prior"), "{summary}");
    assert!(summary.contains("k_frequency_"), "{summary}");
    assert!(!summary.contains("held_out"), "{summary}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cfg = config(dir.path(), "");
    assert_eq!(code(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 2, "missing seed");
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&["simulate", "--config", s(&bad), "--seed", "1", "--out", s(&out)]), 2);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(code(&["simulate", "--config", s(&missing), "--seed", "1", "--out", s(&out)]), 2);
    let nodata = dir.path().join("nope.csv");
    assert_eq!(code(&["fit", "--config", s(&cfg), "--seed", "1", "--data", s(&nodata), "--out", s(&out)]), 3);
    let malformed = dir.path().join("malformed.csv");
    fs::write(&malformed, "x1,x2,x3,y1,y2,y3\n1,0,0,0.5,0.5,0.5\n").unwrap();
    assert_eq!(code(&["fit", "--config", s(&cfg), "--seed", "1", "--data", s(&malformed), "--out", s(&out)]), 3);
    let tight = config(dir.path(), "k = 40\nk_max = 40\nrejection_budget = 1\n");
    assert_eq!(code(&["simulate", "--config", s(&tight), "--seed", "1", "--out", s(&out)]), 4);
}

#[test]
fn mini_sim_study_emits_six_cells() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("study");
    let cfg = config(dir.path(), "grid_k = 3\ngrid_kappa = 10, 100\ngrid_n = 40, 80, 120\nthreads = 2\n");
    let table = ok(&["sim-study", "--config", s(&cfg), "--seed", "10", "--out", s(&out)]);
    assert!(table.contains("k=3 kappa=10") && table.contains("k=3 kappa=100"), "{table}");
    assert_eq!(data_rows(&out.join("sim_study.csv")), 6);
    let long = fs::read_to_string(out.join("sim_study.csv")).unwrap();
    assert_eq!(long.lines().filter(|l| l.ends_with(",ok")).count(), 6, "{long}");
    assert_eq!(data_rows(&out.join("sim_study_table.csv")), 3);
    assert_eq!(data_rows(&out.join("sim_study_curves.csv")), 6);
}

#[test]
fn hurdat2_conversion() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("hurdat2.txt");
    fs::write(
        &file,
        "AL011851,            UNNAMED,      3,\n\
         18510625, 0000,  , HU, 28.0N,  94.8W,  80, -999\n\
         18510625, 0600,  , HU, 28.0N,  95.4W,  80, -999\n\
         18510625, 1200,  , TS, 28.3N,  96.0W,  70, -999\n\
         EP011949,            UNNAMED,      1,\n\
         19490611, 0000,  , TS, 20.2N, 106.3W,  45, -999\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let report = ok(&["parse-hurdat2", "--data", s(&file), "--out", s(&out)]);
    assert!(report.contains("storms = 2") && report.contains("pairs = 1") && report.contains("skipped_single_fix = 1"), "{report}");
    assert_eq!(data_rows(&out.join("pairs.csv")), 1);
    fs::write(&file, "AL011851, UNNAMED, 3,\n18510625, 0000,  , HU, 28.0N,  94.8W,  80, -999\n").unwrap();
    assert_eq!(code(&["parse-hurdat2", "--data", s(&file), "--out", s(&out)]), 3);
}
