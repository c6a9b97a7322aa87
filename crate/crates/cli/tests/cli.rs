use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrqc_core::io::read_nifti_file;

const ALL_FIXED: [&str; 8] = [
    "GIBBS=5,5",
    "FOLDING=3",
    "GHOSTING=5,5,0.3",
    "BLURRING=1.5",
    "BAND=0.05,20,3",
    "BIAS=0.5,0.5,0.5",
    "ZIPPER=3,10",
    "NOISE=0.05",
];

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.cfg"), config).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mrqc"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg("run.cfg")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "mrqc {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.run(args).status.code().unwrap()
    }

    fn corrupt(&self, input: &str, out: &str, count: usize, seed: &str, extra: &[&str]) {
        let count = count.to_string();
        let mut args = vec!["corrupt", "--input", input, "--out", out, "--count", &count, "--seed", seed];
        for t in extra {
            args.extend(["--theta", t]);
        }
        self.ok(&args);
    }
}

const SMALL: &str = "size = 32\nmode = 2d\n";

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn full_chain_produces_one_verdict_per_volume() {
    let w = Work::new(SMALL);
    w.ok(&["phantoms", "--out", "clean", "--count", "4"]);
    w.ok(&["phantoms", "--out", "vclean", "--count", "3", "--seed", "7"]);
    w.corrupt("clean", "bad", 2, "1", &ALL_FIXED);
    w.corrupt("vclean", "vbad", 2, "2", &ALL_FIXED);

    let manifest = csv_rows(&w.path("bad/manifest.csv"));
    assert_eq!(manifest.len(), 9 * 2);
    assert!(w.path("bad/gallery/MISLABEL.png").exists());

    w.ok(&["extract", "--input", "clean", "--input", "bad", "--out", "ftrain"]);
    w.ok(&["extract", "--input", "vclean", "--input", "vbad", "--out", "fval"]);
    let labels = csv_rows(&w.path("ftrain/labels.csv"));
    assert_eq!(labels.len(), 4 + 18);
    assert_eq!(labels.iter().filter(|r| r[1] == "CLEAN").count(), 4);

    w.ok(&["select", "--train", "ftrain", "--val", "fval", "--out", "sel.csv"]);
    assert_eq!(csv_rows(&w.path("sel.csv")).len(), 9 * 3);
    w.ok(&["train", "--train", "ftrain", "--val", "fval", "--selection", "sel.csv", "--out", "model.json"]);
    w.ok(&["classify", "--model", "model.json", "--input", "vbad", "--out", "verdicts.csv"]);
    let verdicts = csv_rows(&w.path("verdicts.csv"));
    assert_eq!(verdicts.len(), 18);
    for v in &verdicts {
        assert!(v[1] == "ARTEFACT" || v[1] == "CLEAN");
        assert_eq!(v[1] == "ARTEFACT", !v[2].is_empty());
        assert_eq!(v.len(), 3 + 9);
    }

    let bench = w.ok(&["bench", "--model", "model.json", "--dim", "64", "--repetitions", "1", "--out", "bench.csv"]);
    assert!(bench.contains("total"));
    assert!(csv_rows(&w.path("bench.csv")).len() >= 4);
}

#[test]
fn zero_severity_leaves_volumes_unchanged() {
    let w = Work::new(SMALL);
    w.ok(&["phantoms", "--out", "clean", "--count", "1"]);
    w.ok(&["corrupt", "--input", "clean", "--out", "same", "--classes", "NOISE,BIAS", "--count", "1", "--theta", "NOISE=0", "--theta", "BIAS=0,0,0"]);
    let src = read_nifti_file(&w.path("clean/phantom-0000.nii.gz")).unwrap();
    for class in ["NOISE", "BIAS"] {
        let out = read_nifti_file(&w.path(&format!("same/phantom-0000-{class}-0000.nii.gz"))).unwrap();
        assert_eq!(out.dims(), src.dims());
        let worst = src
            .data()
            .iter()
            .zip(out.data().iter())
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{class}: {worst}");
    }
}

#[test]
fn corruption_is_reproducible_under_a_seed() {
    let w = Work::new(SMALL);
    w.ok(&["phantoms", "--out", "clean", "--count", "2"]);
    w.corrupt("clean", "a", 1, "5", &ALL_FIXED);
    w.corrupt("clean", "b", 1, "5", &ALL_FIXED);
    w.corrupt("clean", "c", 1, "6", &ALL_FIXED);
    let a = fs::read(w.path("a/manifest.csv")).unwrap();
    assert_eq!(a, fs::read(w.path("b/manifest.csv")).unwrap());
    assert_ne!(a, fs::read(w.path("c/manifest.csv")).unwrap());
    let name = "phantom-0000-NOISE-0000.nii.gz";
    assert_eq!(fs::read(w.path("a").join(name)).unwrap(), fs::read(w.path("b").join(name)).unwrap());
}

#[test]
fn missing_calibration_is_reported() {
    let w = Work::new(SMALL);
    w.ok(&["phantoms", "--out", "clean", "--count", "1"]);
    let out = w.run(&["corrupt", "--input", "clean", "--out", "x", "--classes", "NOISE"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no calibration for NOISE"));
}

#[test]
fn exit_codes_distinguish_usage_data_and_stage_errors() {
    let w = Work::new(SMALL);
    assert_eq!(w.code(&["frobnicate"]), 2);
    assert_eq!(w.code(&["--jobs", "0", "phantoms", "--out", "p"]), 2);
    assert_eq!(w.code(&["--mode", "3d", "phantoms", "--out", "p"]), 2);
    w.ok(&["phantoms", "--out", "clean", "--count", "1"]);
    assert_eq!(w.code(&["corrupt", "--input", "clean", "--out", "x", "--theta", "NOISE=-1"]), 2);
    assert_eq!(w.code(&["corrupt", "--input", "clean", "--out", "x", "--classes", "SPARKLE"]), 2);
    assert_eq!(w.code(&["preprocess", "--input", "nowhere"]), 3);

    let cfg = Work::new("size = 32\nmode = 2d\nsize = ten\n");
    assert_eq!(cfg.code(&["phantoms", "--out", "p"]), 2);

    let cal = serde_json::json!({
        "kind": "calibration", "version": 1, "schema": null, "payload": { "results": [] }
    });
    fs::write(w.path("cal.json"), cal.to_string()).unwrap();
    assert_eq!(w.code(&["classify", "--model", "cal.json", "--input", "clean", "--out", "v.csv"]), 4);
    let future = serde_json::json!({
        "kind": "calibration", "version": 99, "schema": null, "payload": { "results": [] }
    });
    fs::write(w.path("future.json"), future.to_string()).unwrap();
    assert_eq!(
        w.code(&["corrupt", "--input", "clean", "--out", "x", "--calibration", "future.json"]),
        4
    );
    fs::write(w.path("broken.json"), "{").unwrap();
    assert_eq!(w.code(&["classify", "--model", "broken.json", "--input", "clean", "--out", "v.csv"]), 3);
}

#[test]
fn evaluate_reports_five_metrics_per_configuration() {
    let w = Work::new(
        "size = 32\nmode = 2d\ntrain_clean = 6\nval_clean = 4\ntest_clean = 4\nper_class = 2\nphantom_dim = 64\n",
    );
    // A fixed calibration: every class at one severity.
    let fixed: Vec<_> = ALL_FIXED
        .iter()
        .map(|t| {
            let (class, values) = t.split_once('=').unwrap();
            let class = mrqc_core::ArtefactClass::parse(class).unwrap();
            let comps: Vec<f64> = values.split(',').map(|v| v.parse().unwrap()).collect();
            mrqc_core::Severity::from_components(class, &comps)
        })
        .collect();
    mrqc_core::pipeline::CalibrationSet::fixed(&fixed)
        .write(&w.path("cal.json"))
        .unwrap();

    let stdout = w.ok(&["evaluate", "--calibration", "cal.json", "--out", "metrics.csv", "--seeds", "2", "--selection-reports"]);
    assert!(stdout.contains("ensemble-2d"));
    let rows = csv_rows(&w.path("metrics.csv"));
    assert_eq!(rows.len(), 10);
    for config in ["ensemble-2d", "one-class-2d"] {
        let metrics: Vec<&str> = rows.iter().filter(|r| r[0] == config).map(|r| r[1].as_str()).collect();
        assert_eq!(metrics, ["accuracy", "f1", "f2", "precision", "recall"]);
    }
    for r in &rows {
        let mean: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&mean));
        assert_eq!(r[4], "2");
    }
    assert!(w.path("metrics.seed0.selection.csv").exists());
    assert!(w.path("metrics.seed1.selection.csv").exists());
}
