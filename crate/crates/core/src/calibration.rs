//! Minimum-severity search.
//!
//! For class `a` the objective is
//! `L(theta) = mean_x D(apply(a, x, theta)) + lambda * |theta / theta_max|_1`
//! over a fixed subsample of clean slices, where `D` scores the probability
//! that a slice is artefact-free. Coordinate descent over a geometric grid
//! per component is followed by a golden-section refinement of each
//! component between its neighbouring grid points.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{train_one_class, ClassifierError, GammaSpec, SvmHyperparams, SvmModel};
use crate::features::{engineered_features, kspace_features};
use crate::generators::{apply, ArtefactClass, GeneratorError, Severity};
use crate::preprocess::{Slice, SliceSet};
use crate::SeedStream;

pub const CALIBRATION_VERSION: u32 = 1;
pub const MIN_CLEAN_SLICES: usize = 50;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_BUDGET: usize = 200;
pub const DEFAULT_GRID_POINTS: usize = 8;
pub const DEFAULT_SUBSAMPLE: usize = 64;
/// Target score of the median clean slice.
pub const CLEAN_MEDIAN_SCORE: f64 = 0.9;
/// Surrogate RBF width as a multiple of the automatic value; wider kernels
/// generalise better to unseen clean scans.
pub const SURROGATE_GAMMA_SCALE: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("{found} clean slices given, at least {needed} required")]
    InsufficientData { needed: usize, found: usize },
    #[error("{0} has no severity axis")]
    ClassHasNoSeverity(ArtefactClass),
    #[error("budget {budget} is below {needed} (three evaluations per component)")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("no clean slices")]
    NoCleanSlices,
    #[error("theta_max is for {found}, calibrating {expected}")]
    ThetaMaxMismatch {
        expected: ArtefactClass,
        found: ArtefactClass,
    },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

/// Scores a slice with the probability that it is artefact-free.
pub trait Discriminator: Send + Sync {
    /// Deterministic, in `[0, 1]`.
    fn score(&self, slice: &Slice) -> f64;
    fn provenance(&self) -> String;
}

/// Engineered and k-space features of one slice.
pub fn slice_features(slice: &Slice) -> Vec<f64> {
    let mut v = engineered_features(slice).values;
    v.extend(kspace_features(slice).values);
    v
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One-class RBF machine in standardised feature space with a logistic
/// read-out `score = logistic(k * decision)`, `k` chosen so the median clean
/// training slice scores [`CLEAN_MEDIAN_SCORE`]. The boundary scores 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDiscriminator {
    pub model: SvmModel,
    pub slope: f64,
    pub nu: f64,
    pub n_train: usize,
}

impl Discriminator for SurrogateDiscriminator {
    fn score(&self, slice: &Slice) -> f64 {
        let d = self
            .model
            .decision(&slice_features(slice))
            .expect("slice features have a fixed width");
        logistic(self.slope * d)
    }

    fn provenance(&self) -> String {
        format!(
            "surrogate one-class RBF (nu = {}, {} clean slices, {} support vectors)",
            self.nu,
            self.n_train,
            self.model.support_vectors.len()
        )
    }
}

/// Fit the surrogate on every slice of the given clean scans.
pub fn train_surrogate_discriminator(clean: &[SliceSet], contamination: f64) -> Result<SurrogateDiscriminator, CalibrationError> {
    let slices: Vec<&Slice> = clean.iter().flat_map(|s| s.slices()).collect();
    train_surrogate_on_slices(&slices, contamination)
}

pub fn train_surrogate_on_slices(slices: &[&Slice], contamination: f64) -> Result<SurrogateDiscriminator, CalibrationError> {
    if slices.len() < MIN_CLEAN_SLICES {
        return Err(CalibrationError::InsufficientData {
            needed: MIN_CLEAN_SLICES,
            found: slices.len(),
        });
    }
    let rows: Vec<Vec<f64>> = slices.iter().map(|s| slice_features(s)).collect();
    let hp = SvmHyperparams {
        gamma: GammaSpec::Scaled(SURROGATE_GAMMA_SCALE),
        ..SvmHyperparams::default()
    };
    let model = train_one_class(&rows, contamination, &hp)?;
    let mut d: Vec<f64> = rows.iter().map(|r| model.decision(r).expect("training width")).collect();
    d.sort_by(f64::total_cmp);
    let median = crate::stats::percentile_sorted(&d, 0.5);
    let target = (CLEAN_MEDIAN_SCORE / (1.0 - CLEAN_MEDIAN_SCORE)).ln();
    let scale = if median > crate::stats::EPS {
        median
    } else {
        // degenerate fit: use the spread of the training decisions instead
        (d[d.len() - 1] - d[0]).max(1.0)
    };
    Ok(SurrogateDiscriminator {
        model,
        slope: target / scale,
        nu: contamination,
        n_train: rows.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: Vec<f64>,
    /// `|theta / theta_max|_1`.
    pub norm: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub class: ArtefactClass,
    pub theta_min: Severity,
    pub theta_max: Severity,
    pub objective_trace: Vec<TracePoint>,
    pub lambda: f64,
    pub discriminator: String,
}

impl CalibrationResult {
    /// `theta_min / theta_max` per component (0 where the maximum is 0).
    pub fn normalized_min(&self) -> Vec<f64> {
        scaled(&self.theta_min.components(), &self.theta_max.components())
    }

    /// Trace point with the lowest loss.
    pub fn best(&self) -> &TracePoint {
        self.objective_trace
            .iter()
            .min_by(|a, b| a.loss.total_cmp(&b.loss))
            .expect("trace is non-empty")
    }
}

fn scaled(theta: &[f64], max: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(max)
        .map(|(t, m)| if *m > 0.0 { t / m } else { 0.0 })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSettings {
    pub lambda: f64,
    pub budget: usize,
    pub grid_points: usize,
    pub max_subsample: usize,
    /// Seeds the per-slice generator streams so the objective is deterministic.
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            budget: DEFAULT_BUDGET,
            grid_points: DEFAULT_GRID_POINTS,
            max_subsample: DEFAULT_SUBSAMPLE,
            seed: 0,
        }
    }
}

/// Evenly spaced subsample of at most `max` items, in order.
pub fn subsample<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|i| items[i * items.len() / max].clone()).collect()
}

/// The calibration objective for one class on a fixed set of clean slices.
pub struct Objective<'a> {
    pub class: ArtefactClass,
    pub slices: Vec<Slice>,
    pub discriminator: &'a dyn Discriminator,
    pub theta_max: Vec<f64>,
    pub lambda: f64,
    pub seed: u64,
}

impl Objective<'_> {
    pub fn severity(&self, theta: &[f64]) -> Severity {
        Severity::from_components(self.class, theta)
    }

    /// Integer components are rounded first, so equal severities share a value.
    pub fn canonical(&self, theta: &[f64]) -> Vec<f64> {
        self.severity(theta).components()
    }

    pub fn mean_score(&self, theta: &[f64]) -> Result<f64, CalibrationError> {
        let sev = self.severity(theta);
        let rng = SeedStream::new(self.seed);
        let mut total = 0.0;
        for (i, x) in self.slices.iter().enumerate() {
            let y = apply(self.class, x, &sev, rng.derive(i as u64), &[])?;
            total += self.discriminator.score(&y);
        }
        Ok(total / self.slices.len() as f64)
    }

    pub fn norm(&self, theta: &[f64]) -> f64 {
        scaled(&self.canonical(theta), &self.theta_max).iter().map(|v| v.abs()).sum()
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64, CalibrationError> {
        Ok(self.mean_score(theta)? + self.lambda * self.norm(theta))
    }
}

struct Search<'o, 'a> {
    obj: &'o Objective<'a>,
    budget: usize,
    cache: HashMap<Vec<u64>, f64>,
    trace: Vec<TracePoint>,
}

impl Search<'_, '_> {
    /// `None` once the budget is spent.
    fn eval(&mut self, theta: &[f64]) -> Result<Option<f64>, CalibrationError> {
        let canon = self.obj.canonical(theta);
        let key: Vec<u64> = canon.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(Some(v));
        }
        if self.trace.len() >= self.budget {
            return Ok(None);
        }
        let loss = self.obj.value(&canon)?;
        self.cache.insert(key, loss);
        self.trace.push(TracePoint {
            norm: self.obj.norm(&canon),
            theta: canon,
            loss,
        });
        Ok(Some(loss))
    }
}

/// Geometric grid `max * 2^-(n-1-k)`, `k = 0..n`, preceded by zero.
fn grid(max: f64, n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..n).map(|k| max * 0.5f64.powi((n - 1 - k) as i32)));
    g
}

pub fn calibrate(
    class: ArtefactClass,
    clean: &[Slice],
    d: &dyn Discriminator,
    theta_max: &Severity,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult, CalibrationError> {
    if !class.has_severity() {
        return Err(CalibrationError::ClassHasNoSeverity(class));
    }
    if theta_max.class() != class {
        return Err(CalibrationError::ThetaMaxMismatch {
            expected: class,
            found: theta_max.class(),
        });
    }
    let max = theta_max.components();
    let needed = max.len() * 3;
    if settings.budget < needed {
        return Err(CalibrationError::BudgetTooSmall {
            budget: settings.budget,
            needed,
        });
    }
    if clean.is_empty() {
        return Err(CalibrationError::NoCleanSlices);
    }
    let obj = Objective {
        class,
        slices: subsample(clean, settings.max_subsample),
        discriminator: d,
        theta_max: max.clone(),
        lambda: settings.lambda,
        seed: settings.seed,
    };
    let mut search = Search {
        obj: &obj,
        budget: settings.budget,
        cache: HashMap::new(),
        trace: Vec::new(),
    };
    let grids: Vec<Vec<f64>> = max.iter().map(|&m| grid(m, settings.grid_points)).collect();

    // coordinate descent from the maximum severity
    let mut theta = max.clone();
    let mut best = search.eval(&theta)?.expect("budget covers the first evaluation");
    'outer: loop {
        let mut improved = false;
        for c in 0..max.len() {
            for &g in &grids[c] {
                let mut cand = theta.clone();
                cand[c] = g;
                match search.eval(&cand)? {
                    Some(v) if v < best => {
                        best = v;
                        theta = obj.canonical(&cand);
                        improved = true;
                    }
                    Some(_) => {}
                    None => break 'outer,
                }
            }
        }
        if !improved {
            break;
        }
    }

    // golden-section refinement of each component between grid neighbours
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    'refine: for c in 0..max.len() {
        let g = &grids[c];
        let pos = g.iter().position(|&v| v >= theta[c]).unwrap_or(g.len() - 1);
        let mut lo = if pos == 0 { 0.0 } else { g[pos - 1] };
        let mut hi = if pos + 1 < g.len() { g[pos + 1] } else { g[pos] };
        let at = |theta: &[f64], v: f64| {
            let mut t = theta.to_vec();
            t[c] = v;
            t
        };
        for _ in 0..12 {
            if hi - lo <= 1e-3 * max[c].max(1e-12) {
                break;
            }
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            let (Some(fa), Some(fb)) = (search.eval(&at(&theta, a))?, search.eval(&at(&theta, b))?) else {
                break 'refine;
            };
            if fa <= fb {
                hi = b;
            } else {
                lo = a;
            }
            for (cand, v) in [(a, fa), (b, fb)] {
                if v < best {
                    best = v;
                    theta = obj.canonical(&at(&theta, cand));
                }
            }
        }
    }

    Ok(CalibrationResult {
        class,
        theta_min: obj.severity(&theta),
        theta_max: theta_max.clone(),
        objective_trace: search.trace,
        lambda: settings.lambda,
        discriminator: d.provenance(),
    })
}

/// Each component uniform in `[theta_min, theta_max]`, integer components
/// rounded to nearest.
pub fn sample_severity(cr: &CalibrationResult, rng: &mut SeedStream) -> Severity {
    let lo = cr.theta_min.components();
    let hi = cr.theta_max.components();
    let c: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| if b > a { rng.uniform_range(a, b) } else { a })
        .collect();
    Severity::from_components(cr.class, &c)
}
