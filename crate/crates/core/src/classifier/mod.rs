//! RBF-kernel support vector machines trained by SMO, the per-class
//! ensemble and evaluation metrics.
//!
//! Labels are `+1` (artefact) and `-1` (clean).

mod ensemble;
mod metrics;
mod smo;


use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{ensemble_predict, EnsembleModel, EnsembleVerdict, MemberModel};
pub use metrics::{compute_metrics, MetricsReport};

use crate::stats::EPS;

/// Dual coefficients at or below this are dropped from the model.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("each label needs at least two samples (found {positives} positive, {negatives} negative)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("non-finite feature at row {row}, column {column}")]
    NonfiniteFeature { row: usize, column: usize },
    #[error("feature width {found} does not match expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("labels must be +1 or -1, found {0}")]
    BadLabel(i8),
    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("no samples")]
    Empty,
    #[error("feature schema {found} does not match model schema {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error(transparent)]
    Selection(#[from] crate::selection::SelectionError),
}

/// RBF width. `Auto` is `1 / (width * var(X))` over the standardised
/// training matrix; `Scaled(f)` multiplies that value by `f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GammaSpec {
    Auto,
    Scaled(f64),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparams {
    pub c: f64,
    pub gamma: GammaSpec,
    /// Stopping tolerance on the maximal violating pair.
    pub tol: f64,
    /// Iteration budget multiplier: the solver stops after
    /// `max_passes * max(100 n, 100000)` pair updates.
    pub max_passes: usize,
}

impl Default for SvmHyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: GammaSpec::Auto,
            tol: 1e-3,
            max_passes: 10,
        }
    }
}

impl SvmHyperparams {
    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::BadHyperparameter(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_passes == 0 {
            return bad("max_passes must be positive");
        }
        match self.gamma {
            GammaSpec::Scaled(v) | GammaSpec::Fixed(v) if !(v > 0.0 && v.is_finite()) => {
                bad("gamma must be positive")
            }
            _ => Ok(()),
        }
    }

    fn max_iter(&self, n: usize) -> usize {
        self.max_passes.saturating_mul((100 * n).max(100_000))
    }

    /// The tuning grid: `C in {0.1, 1, 10}` times `gamma in {0.5, 1, 2} x Auto`.
    pub fn grid(&self) -> Vec<SvmHyperparams> {
        let mut out = Vec::new();
        for c in [0.1, 1.0, 10.0] {
            for f in [0.5, 1.0, 2.0] {
                out.push(SvmHyperparams {
                    c,
                    gamma: GammaSpec::Scaled(f),
                    ..*self
                });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvmKind {
    TwoClass,
    OneClass,
}

/// Trained RBF machine. Support vectors are stored standardised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kind: SvmKind,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub iterations: usize,
}

/// Per-column mean and population standard deviation; constant columns get
/// a unit scale.
fn standardization(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let w = rows[0].len();
    let mut mean = vec![0.0; w];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; w];
    for r in rows {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < EPS {
            *s = 1.0;
        }
    }
    (mean, std)
}

fn standardize(row: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    row.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s).collect()
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, ClassifierError> {
    let w = rows.first().ok_or(ClassifierError::Empty)?.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != w {
            return Err(ClassifierError::WidthMismatch {
                expected: w,
                found: r.len(),
            });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonfiniteFeature { row: i, column: j });
        }
    }
    Ok(w)
}

fn resolve_gamma(spec: GammaSpec, x: &[Vec<f64>]) -> f64 {
    let auto = || {
        let w = x[0].len();
        let all: Vec<f64> = x.iter().flatten().copied().collect();
        let var = crate::stats::variance(&all);
        if var * w as f64 > EPS {
            1.0 / (w as f64 * var)
        } else {
            1.0
        }
    };
    match spec {
        GammaSpec::Auto => auto(),
        GammaSpec::Scaled(f) => f * auto(),
        GammaSpec::Fixed(g) => g,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = (-gamma * sq_dist(&x[i], &x[j])).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn finish(
    kind: SvmKind,
    x: Vec<Vec<f64>>,
    coef: Vec<f64>,
    alpha: &[f64],
    rho: f64,
    gamma: f64,
    c: f64,
    (mean, std): (Vec<f64>, Vec<f64>),
    iterations: usize,
) -> SvmModel {
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for ((row, &cf), &a) in x.into_iter().zip(&coef).zip(alpha) {
        if a > SUPPORT_THRESHOLD {
            support_vectors.push(row);
            dual_coef.push(cf);
        }
    }
    SvmModel {
        kind,
        support_vectors,
        dual_coef,
        bias: -rho,
        gamma,
        c,
        mean,
        std,
        iterations,
    }
}

/// Train a two-class C-SVM. Labels must be `+1` or `-1`, each present at
/// least twice.
pub fn train_svm(rows: &[Vec<f64>], labels: &[i8], hp: &SvmHyperparams) -> Result<SvmModel, ClassifierError> {
    hp.validate()?;
    if rows.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            pred: rows.len(),
            truth: labels.len(),
        });
    }
    check_rows(rows)?;
    if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(ClassifierError::BadLabel(bad));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(ClassifierError::DegenerateLabels { positives, negatives });
    }
    let stats = standardization(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &stats.0, &stats.1)).collect();
    let gamma = resolve_gamma(hp.gamma, &x);
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mut q = kernel_matrix(&x, gamma);
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] *= y[i] * y[j];
        }
    }
    let sol = smo::solve(&q, &vec![-1.0; n], &y, hp.c, vec![0.0; n], hp.tol, hp.max_iter(n));
    let coef: Vec<f64> = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
    Ok(finish(SvmKind::TwoClass, x, coef, &sol.alpha, sol.rho, gamma, hp.c, stats, sol.iterations))
}

/// Train a nu one-class machine (`0 < nu <= 1`) on inliers only. The
/// decision value is positive inside the learned support.
pub fn train_one_class(rows: &[Vec<f64>], nu: f64, hp: &SvmHyperparams) -> Result<SvmModel, ClassifierError> {
    hp.validate()?;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(ClassifierError::BadHyperparameter("nu must lie in (0, 1]".into()));
    }
    check_rows(rows)?;
    let stats = standardization(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &stats.0, &stats.1)).collect();
    let gamma = resolve_gamma(hp.gamma, &x);
    let n = x.len();
    let total = nu * n as f64;
    let whole = total.floor() as usize;
    let mut alpha = vec![0.0; n];
    for a in alpha.iter_mut().take(whole) {
        *a = 1.0;
    }
    if whole < n {
        alpha[whole] = total - whole as f64;
    }
    let q = kernel_matrix(&x, gamma);
    let sol = smo::solve(&q, &vec![0.0; n], &vec![1.0; n], 1.0, alpha, hp.tol, hp.max_iter(n));
    let coef = sol.alpha.clone();
    Ok(finish(SvmKind::OneClass, x, coef, &sol.alpha, sol.rho, gamma, 1.0, stats, sol.iterations))
}

impl SvmModel {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// `sum_i coef_i K(sv_i, x) + bias`.
    pub fn decision(&self, row: &[f64]) -> Result<f64, ClassifierError> {
        if row.len() != self.width() {
            return Err(ClassifierError::WidthMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        let z = standardize(row, &self.mean, &self.std);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * (-self.gamma * sq_dist(sv, &z)).exp())
            .sum::<f64>()
            + self.bias)
    }
}

/// Label and margin; a zero margin is labelled `-1`.
pub fn predict(model: &SvmModel, row: &[f64]) -> Result<(i8, f64), ClassifierError> {
    let m = model.decision(row)?;
    Ok((if m > 0.0 { 1 } else { -1 }, m))
}

/// Rows with labels and their feature names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledRows {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl LabeledRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keep the given columns, in order.
    pub fn columns(&self, idx: &[usize]) -> LabeledRows {
        LabeledRows {
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Fraction of rows whose predicted label matches.
pub fn accuracy(model: &SvmModel, data: &LabeledRows) -> Result<f64, ClassifierError> {
    let pred = data
        .rows
        .iter()
        .map(|r| predict(model, r).map(|p| p.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(compute_metrics(&pred, &data.labels)?.accuracy)
}

/// Pick the grid point with the best validation accuracy; ties keep the
/// earliest grid point.
pub fn tune(train: &LabeledRows, val: &LabeledRows, base: &SvmHyperparams) -> Result<(SvmHyperparams, f64), ClassifierError> {
    let mut best: Option<(SvmHyperparams, f64)> = None;
    for hp in base.grid() {
        let m = train_svm(&train.rows, &train.labels, &hp)?;
        let acc = accuracy(&m, val)?;
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((hp, acc));
        }
    }
    Ok(best.expect("grid is non-empty"))
}
