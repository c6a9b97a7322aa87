//! Run configuration read from a line-oriented `key = value` file.
//!
//! Blank lines and text after `#` are ignored. Keys:
//!
//! | key | default |
//! |---|---|
//! | `mode` | `2.5d` (`2d` keeps the central axial slice) |
//! | `size` | `300` |
//! | `positions` | `0.333333,0.5,0.666667` |
//! | `views` | `axial,sagittal,coronal` |
//! | `seed` | `0` |
//! | `lambda`, `budget`, `grid_points`, `calibration_subsample` | `1.0`, `200`, `8`, `64` |
//! | `contamination` | `0.05` |
//! | `theta_max.<CLASS>` | per-class default, comma-separated components |
//! | `svm.c`, `svm.gamma`, `svm.tol`, `svm.max_passes` | `1.0`, `auto`, `0.001`, `10` |
//! | `tune` | `false` |
//! | `gamma_manifest` | none |
//! | `train_clean`, `val_clean`, `test_clean`, `per_class` | `60`, `30`, `30`, `10` |
//! | `phantom_dim` | `64` |
//! | `eval_seeds` | `5` |
//! | `jobs` | `1` |
//!
//! `svm.gamma` is `auto`, `auto*<factor>` or a positive number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::calibration::{CalibrationSettings, DEFAULT_BUDGET, DEFAULT_GRID_POINTS, DEFAULT_LAMBDA, DEFAULT_SUBSAMPLE};
use crate::classifier::{GammaSpec, SvmHyperparams};
use crate::generators::{ArtefactClass, Severity};
use crate::io::{View, DEFAULT_POSITIONS};
use crate::preprocess::{PreprocessConfig, DEFAULT_CLIP_FRACTION, DEFAULT_SIZE};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    TwoD,
    TwoPointFiveD,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2d" => Some(Mode::TwoD),
            "2.5d" => Some(Mode::TwoPointFiveD),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::TwoD => "2d",
            Mode::TwoPointFiveD => "2.5d",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub size: usize,
    pub positions: Vec<f64>,
    pub views: Vec<View>,
    pub seed: u64,
    pub lambda: f64,
    pub budget: usize,
    pub grid_points: usize,
    pub calibration_subsample: usize,
    pub contamination: f64,
    pub theta_max: BTreeMap<ArtefactClass, Severity>,
    pub svm: SvmHyperparams,
    pub tune: bool,
    pub gamma_manifest: Option<PathBuf>,
    pub train_clean: usize,
    pub val_clean: usize,
    pub test_clean: usize,
    pub per_class: usize,
    pub phantom_dim: usize,
    pub eval_seeds: usize,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::TwoPointFiveD,
            size: DEFAULT_SIZE,
            positions: DEFAULT_POSITIONS.to_vec(),
            views: View::ALL.to_vec(),
            seed: 0,
            lambda: DEFAULT_LAMBDA,
            budget: DEFAULT_BUDGET,
            grid_points: DEFAULT_GRID_POINTS,
            calibration_subsample: DEFAULT_SUBSAMPLE,
            contamination: 0.05,
            theta_max: ArtefactClass::PARAMETRIC
                .iter()
                .map(|&c| (c, c.default_theta_max()))
                .collect(),
            svm: SvmHyperparams::default(),
            tune: false,
            gamma_manifest: None,
            train_clean: 60,
            val_clean: 30,
            test_clean: 30,
            per_class: 10,
            phantom_dim: 64,
            eval_seeds: 5,
            jobs: 1,
        }
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    v.split(',').map(|p| f(p.trim())).collect()
}

pub fn parse_gamma(v: &str) -> Option<GammaSpec> {
    let v = v.trim().to_ascii_lowercase();
    if v == "auto" {
        return Some(GammaSpec::Auto);
    }
    if let Some(f) = v.strip_prefix("auto*") {
        return f.trim().parse().ok().filter(|x: &f64| *x > 0.0).map(GammaSpec::Scaled);
    }
    v.parse().ok().filter(|x: &f64| *x > 0.0).map(GammaSpec::Fixed)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut mode_set = false;
        let mut layout_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Syntax { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "mode" {
                mode_set = true;
            }
            if key == "positions" || key == "views" {
                layout_set = true;
            }
            cfg.set(key, value).map_err(err)?;
        }
        if mode_set && !layout_set {
            cfg.apply_mode_layout();
        }
        Ok(cfg)
    }

    /// Slice layout implied by the mode.
    pub fn apply_mode_layout(&mut self) {
        match self.mode {
            Mode::TwoD => {
                self.positions = vec![0.5];
                self.views = vec![View::Axial];
            }
            Mode::TwoPointFiveD => {
                self.positions = DEFAULT_POSITIONS.to_vec();
                self.views = View::ALL.to_vec();
            }
        }
    }

    /// Set one key; the error is a message without line information.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = || format!("invalid value {value:?} for `{key}`");
        fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        match key {
            "mode" => self.mode = Mode::parse(value).ok_or_else(bad)?,
            "size" => self.size = num(value).filter(|&s| s >= 16).ok_or_else(bad)?,
            "positions" => {
                self.positions = parse_list(value, |p| num::<f64>(p).filter(|&f| f > 0.0 && f < 1.0)).ok_or_else(bad)?
            }
            "views" => self.views = parse_list(value, View::parse).ok_or_else(bad)?,
            "seed" => self.seed = num(value).ok_or_else(bad)?,
            "lambda" => self.lambda = num(value).filter(|&l: &f64| l >= 0.0).ok_or_else(bad)?,
            "budget" => self.budget = num(value).ok_or_else(bad)?,
            "grid_points" => self.grid_points = num(value).filter(|&g| g >= 2).ok_or_else(bad)?,
            "calibration_subsample" => self.calibration_subsample = num(value).filter(|&n| n >= 1).ok_or_else(bad)?,
            "contamination" => {
                self.contamination = num(value).filter(|&c: &f64| c > 0.0 && c <= 1.0).ok_or_else(bad)?
            }
            "svm.c" => self.svm.c = num(value).filter(|&c: &f64| c > 0.0).ok_or_else(bad)?,
            "svm.gamma" => self.svm.gamma = parse_gamma(value).ok_or_else(bad)?,
            "svm.tol" => self.svm.tol = num(value).filter(|&t: &f64| t > 0.0).ok_or_else(bad)?,
            "svm.max_passes" => self.svm.max_passes = num(value).filter(|&p| p >= 1).ok_or_else(bad)?,
            "tune" => self.tune = num(value).ok_or_else(bad)?,
            "gamma_manifest" => self.gamma_manifest = (!value.is_empty()).then(|| PathBuf::from(value)),
            "train_clean" => self.train_clean = num(value).ok_or_else(bad)?,
            "val_clean" => self.val_clean = num(value).ok_or_else(bad)?,
            "test_clean" => self.test_clean = num(value).ok_or_else(bad)?,
            "per_class" => self.per_class = num(value).ok_or_else(bad)?,
            "phantom_dim" => self.phantom_dim = num(value).filter(|&d| d >= 64).ok_or_else(bad)?,
            "eval_seeds" => self.eval_seeds = num(value).filter(|&n| n >= 1).ok_or_else(bad)?,
            "jobs" => self.jobs = num(value).filter(|&n| n >= 1).ok_or_else(bad)?,
            _ => {
                let Some(class) = key.strip_prefix("theta_max.") else {
                    return Err(format!("unknown key `{key}`"));
                };
                let class = ArtefactClass::parse(class)
                    .filter(|c| c.has_severity())
                    .ok_or_else(|| format!("unknown artefact class in `{key}`"))?;
                let comps = parse_list(value, |p| num::<f64>(p).filter(|v| v.is_finite() && *v >= 0.0))
                    .filter(|c| c.len() == class.component_names().len())
                    .ok_or_else(bad)?;
                self.theta_max.insert(class, Severity::from_components(class, &comps));
            }
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            size: self.size,
            positions: self.positions.clone(),
            views: self.views.clone(),
            clip_fraction: DEFAULT_CLIP_FRACTION,
        }
    }

    pub fn calibration(&self) -> CalibrationSettings {
        CalibrationSettings {
            lambda: self.lambda,
            budget: self.budget,
            grid_points: self.grid_points,
            max_subsample: self.calibration_subsample,
            seed: self.seed,
        }
    }

    /// Upper severity bound for a class, expressed at the configured slice size.
    pub fn theta_max_for(&self, class: ArtefactClass) -> Option<Severity> {
        self.theta_max
            .get(&class)
            .map(|s| s.rescaled_to(DEFAULT_SIZE, self.size, self.size))
    }
}
