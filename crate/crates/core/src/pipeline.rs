//! End-to-end phantom benchmark: seeded dataset construction, calibration of
//! every class, per-class selection and training, ensemble evaluation against
//! a one-class baseline, and single-scan timing.
//!
//! Task seeds follow `derive_seed(seed, task)` where the task index encodes
//! split, class slot and ordinal, so every volume is reproducible on its own.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    calibrate, sample_severity, train_surrogate_on_slices, CalibrationError, CalibrationResult,
    SurrogateDiscriminator, CALIBRATION_VERSION,
};
use crate::classifier::{
    compute_metrics, ensemble_predict, predict, train_one_class, train_svm, tune, ClassifierError,
    EnsembleModel, EnsembleVerdict, LabeledRows, MemberModel, MetricsReport, SvmHyperparams,
};
use crate::config::RunConfig;
use crate::features::{full_features, FeatureError, FeatureVector, GammaTable};
use crate::generators::{corrupt_volume, ArtefactClass, GeneratorError, Severity};
use crate::io::{make_phantom_volume, PhantomError, PhantomKind, Volume};
use crate::preprocess::{preprocess_volume, Slice};
use crate::rng::derive_seed;
use crate::selection::{projection_indices, select_combo, ComboMask, SelectionReport, SelectionRow};
use crate::stage::{read_stage, write_stage, StageError};
use crate::{stats, SeedStream};

pub const MODEL_VERSION: u32 = 1;
pub const MODEL_KIND: &str = "ensemble-model";
pub const CALIBRATION_KIND: &str = "calibration";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("no calibration for {0}")]
    MissingCalibration(ArtefactClass),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

fn task_index(split: Split, slot: u64, ordinal: usize) -> u64 {
    split.index() * 1_000_000 + slot * 10_000 + ordinal as u64
}

const MISLABEL_POOL_SLOT: u64 = 90;

/// Calibration results for the parametric classes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub results: Vec<CalibrationResult>,
}

impl CalibrationSet {
    pub fn get(&self, class: ArtefactClass) -> Option<&CalibrationResult> {
        self.results.iter().find(|r| r.class == class)
    }

    /// Zero-width interval at a fixed severity.
    pub fn fixed(severities: &[Severity]) -> Self {
        Self {
            results: severities
                .iter()
                .map(|s| CalibrationResult {
                    class: s.class(),
                    theta_min: s.clone(),
                    theta_max: s.clone(),
                    objective_trace: Vec::new(),
                    lambda: 0.0,
                    discriminator: "fixed".into(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), StageError> {
        write_stage(path, CALIBRATION_KIND, CALIBRATION_VERSION, None, self)
    }

    pub fn read(path: &Path) -> Result<Self, StageError> {
        read_stage(path, CALIBRATION_KIND, CALIBRATION_VERSION).map(|(c, _)| c)
    }
}

/// Everything needed to rebuild one dataset volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeSpec {
    pub id: String,
    pub split: Split,
    pub class: Option<ArtefactClass>,
    pub phantom_seed: u64,
    pub severity: Option<Severity>,
    pub corruption_seed: u64,
}

impl VolumeSpec {
    pub fn label(&self) -> i8 {
        if self.class.is_some() {
            1
        } else {
            -1
        }
    }
}

fn mislabel_pool_seed(seed: u64, split: Split, j: usize) -> u64 {
    derive_seed(seed, task_index(split, MISLABEL_POOL_SLOT, j))
}

/// Volumes of one split: the clean scans followed by `per_class` corrupted
/// scans for each of the nine classes.
pub fn plan_split(
    cfg: &RunConfig,
    calibration: &CalibrationSet,
    seed: u64,
    split: Split,
) -> Result<Vec<VolumeSpec>, PipelineError> {
    let n_clean = match split {
        Split::Train => cfg.train_clean,
        Split::Val => cfg.val_clean,
        Split::Test => cfg.test_clean,
    };
    let mut out = Vec::with_capacity(n_clean + 9 * cfg.per_class);
    for i in 0..n_clean {
        let task = derive_seed(seed, task_index(split, 0, i));
        out.push(VolumeSpec {
            id: format!("{}-clean-{i:04}", split.name()),
            split,
            class: None,
            phantom_seed: task,
            severity: None,
            corruption_seed: 0,
        });
    }
    for class in ArtefactClass::ALL {
        for i in 0..cfg.per_class {
            let task = derive_seed(seed, task_index(split, class.index() as u64 + 1, i));
            let mut rng = SeedStream::new(task).derive(1);
            let severity = if class.has_severity() {
                let cr = calibration.get(class).ok_or(PipelineError::MissingCalibration(class))?;
                sample_severity(cr, &mut rng)
            } else {
                Severity::Mislabel {
                    pool_index: rng.below(cfg.per_class.max(1)),
                }
            };
            out.push(VolumeSpec {
                id: format!("{}-{class}-{i:04}", split.name()),
                split,
                class: Some(class),
                phantom_seed: task,
                severity: Some(severity),
                corruption_seed: derive_seed(task, 2),
            });
        }
    }
    Ok(out)
}

fn phantom_dims(cfg: &RunConfig) -> [usize; 3] {
    [cfg.phantom_dim; 3]
}

/// Build the volume a spec describes.
pub fn realize(cfg: &RunConfig, seed: u64, spec: &VolumeSpec) -> Result<Volume, PipelineError> {
    let dims = phantom_dims(cfg);
    let base = make_phantom_volume(spec.phantom_seed, dims, PhantomKind::Head)?;
    let volume = match (spec.class, &spec.severity) {
        (Some(ArtefactClass::Mislabel), Some(Severity::Mislabel { pool_index })) => make_phantom_volume(
            mislabel_pool_seed(seed, spec.split, *pool_index),
            dims,
            PhantomKind::InvertedHead,
        )?,
        (Some(class), Some(sev)) => corrupt_volume(
            &base,
            class,
            sev,
            SeedStream::new(spec.corruption_seed),
            &[],
            cfg.size,
        )?,
        _ => base,
    };
    Ok(volume.with_source_id(spec.id.clone()))
}

/// Feature vector of one scan under the configured slice layout.
pub fn scan_features(cfg: &RunConfig, volume: &Volume, gamma: Option<&GammaTable>) -> Result<FeatureVector, PipelineError> {
    let ss = preprocess_volume(volume, &cfg.preprocess());
    let g = match gamma {
        Some(t) => t.vectors_for(volume.source_id(), &ss)?,
        None => None,
    };
    Ok(full_features(&ss, g.as_deref())?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub class: Option<ArtefactClass>,
    pub features: FeatureVector,
}

impl Sample {
    pub fn label(&self) -> i8 {
        if self.class.is_some() {
            1
        } else {
            -1
        }
    }
}

/// Run `f` on a pool of `jobs` threads.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Realise and featurise every planned volume, in plan order.
pub fn extract_samples(
    cfg: &RunConfig,
    seed: u64,
    specs: &[VolumeSpec],
    gamma: Option<&GammaTable>,
) -> Result<Vec<Sample>, PipelineError> {
    specs
        .par_iter()
        .map(|spec| {
            let v = realize(cfg, seed, spec)?;
            Ok(Sample {
                id: spec.id.clone(),
                class: spec.class,
                features: scan_features(cfg, &v, gamma)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn build_dataset(
    cfg: &RunConfig,
    calibration: &CalibrationSet,
    seed: u64,
    gamma: Option<&GammaTable>,
) -> Result<Dataset, PipelineError> {
    let mut splits = Vec::with_capacity(3);
    for split in Split::ALL {
        let plan = plan_split(cfg, calibration, seed, split)?;
        splits.push(extract_samples(cfg, seed, &plan, gamma)?);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(Dataset { train, val, test })
}

/// Preprocessed slices of `n` clean training phantoms.
pub fn clean_slices(cfg: &RunConfig, seed: u64, n: usize) -> Result<Vec<Slice>, PipelineError> {
    let plan: Vec<VolumeSpec> = (0..n)
        .map(|i| VolumeSpec {
            id: format!("train-clean-{i:04}"),
            split: Split::Train,
            class: None,
            phantom_seed: derive_seed(seed, task_index(Split::Train, 0, i)),
            severity: None,
            corruption_seed: 0,
        })
        .collect();
    let sets = plan
        .par_iter()
        .map(|s| Ok(preprocess_volume(&realize(cfg, seed, s)?, &cfg.preprocess()).into_slices()))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(sets.into_iter().flatten().collect())
}

/// Fit the surrogate on `clean` and calibrate each requested class. Classes
/// without a severity axis are skipped.
pub fn calibrate_all(
    cfg: &RunConfig,
    clean: &[Slice],
    classes: &[ArtefactClass],
) -> Result<(CalibrationSet, SurrogateDiscriminator), PipelineError> {
    let refs: Vec<&Slice> = clean.iter().collect();
    let d = train_surrogate_on_slices(&refs, cfg.contamination)?;
    let settings = cfg.calibration();
    let results = classes
        .par_iter()
        .filter(|c| c.has_severity())
        .map(|&class| {
            let max = cfg.theta_max_for(class).unwrap_or_else(|| class.default_theta_max());
            Ok(calibrate(class, clean, &d, &max, &settings)?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok((CalibrationSet { results }, d))
}

fn names_of(samples: &[Sample]) -> Result<Vec<String>, PipelineError> {
    let first = samples
        .first()
        .ok_or_else(|| PipelineError::Invalid("no samples".into()))?;
    let names = first.features.names.clone();
    if samples.iter().any(|s| s.features.names != names) {
        return Err(PipelineError::Invalid("samples do not share one feature schema".into()));
    }
    Ok(names)
}

/// Clean scans (label -1) against scans of `class` (label +1).
pub fn class_rows(samples: &[Sample], class: ArtefactClass, names: &[String]) -> LabeledRows {
    let chosen = samples.iter().filter(|s| s.class.is_none() || s.class == Some(class));
    let (rows, labels) = chosen.map(|s| (s.features.values.clone(), s.label())).unzip();
    LabeledRows {
        names: names.to_vec(),
        rows,
        labels,
    }
}

/// Candidate scores for every class without training final models.
pub fn select_all(train: &[Sample], val: &[Sample], hp: &SvmHyperparams) -> Result<SelectionReport, PipelineError> {
    let names = names_of(train)?;
    if names_of(val)? != names {
        return Err(PipelineError::Invalid("train and validation schemas differ".into()));
    }
    let rows = ArtefactClass::ALL
        .par_iter()
        .map(|&class| select_combo(class, &class_rows(train, class, &names), &class_rows(val, class, &names), hp))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SelectionReport { rows })
}

/// How each class model picks its feature combination.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskPolicy {
    /// Search every combination on validation data.
    Select,
    /// Use these masks; classes not listed use every available partition.
    Fixed(Vec<(ArtefactClass, ComboMask)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedEnsemble {
    pub ensemble: EnsembleModel,
    /// Per-class candidate scores; empty for fixed masks.
    pub selection: SelectionReport,
    /// Hyperparameters used per class.
    pub hyperparams: Vec<(ArtefactClass, SvmHyperparams)>,
}

/// One classifier per artefact class, trained on clean-vs-class data.
pub fn train_ensemble(
    train: &[Sample],
    val: &[Sample],
    hp: &SvmHyperparams,
    tune_hp: bool,
    policy: &MaskPolicy,
) -> Result<TrainedEnsemble, PipelineError> {
    let names = names_of(train)?;
    if names_of(val)? != names {
        return Err(PipelineError::Invalid("train and validation schemas differ".into()));
    }
    let full = ComboMask::all_of(&names).ok_or_else(|| PipelineError::Invalid("schema has no partitions".into()))?;
    type Trained = (MemberModel, Option<SelectionRow>, SvmHyperparams);
    let trained = ArtefactClass::ALL
        .par_iter()
        .map(|&class| -> Result<Trained, PipelineError> {
            let t = class_rows(train, class, &names);
            let v = class_rows(val, class, &names);
            let (mask, row) = match policy {
                MaskPolicy::Select => {
                    let row = select_combo(class, &t, &v, hp)?;
                    (row.chosen, Some(row))
                }
                MaskPolicy::Fixed(m) => (
                    m.iter().find(|(c, _)| *c == class).map_or(full, |(_, m)| *m),
                    None,
                ),
            };
            let idx = projection_indices(&names, mask).map_err(ClassifierError::from)?;
            let (tp, vp) = (t.columns(&idx), v.columns(&idx));
            let chosen_hp = if tune_hp { tune(&tp, &vp, hp)?.0 } else { *hp };
            let model = train_svm(&tp.rows, &tp.labels, &chosen_hp)?;
            Ok((MemberModel { class, mask, model }, row, chosen_hp))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut members = Vec::new();
    let mut selection = SelectionReport::default();
    let mut hyperparams = Vec::new();
    for (m, row, h) in trained {
        hyperparams.push((m.class, h));
        members.push(m);
        selection.rows.extend(row);
    }
    Ok(TrainedEnsemble {
        ensemble: EnsembleModel::new(names, members),
        selection,
        hyperparams,
    })
}

pub fn write_model(path: &Path, model: &EnsembleModel) -> Result<(), StageError> {
    write_stage(path, MODEL_KIND, MODEL_VERSION, Some(&model.schema), model)
}

pub fn read_model(path: &Path) -> Result<EnsembleModel, StageError> {
    read_stage(path, MODEL_KIND, MODEL_VERSION).map(|(m, _)| m)
}

pub fn classify_samples(model: &EnsembleModel, samples: &[Sample]) -> Result<Vec<EnsembleVerdict>, PipelineError> {
    samples
        .iter()
        .map(|s| Ok(ensemble_predict(model, &s.features)?))
        .collect()
}

/// Scan-level verdicts against clean/artefact truth.
pub fn ensemble_metrics(model: &EnsembleModel, samples: &[Sample]) -> Result<MetricsReport, PipelineError> {
    let pred: Vec<i8> = classify_samples(model, samples)?
        .iter()
        .map(|v| if v.artefact { 1 } else { -1 })
        .collect();
    let truth: Vec<i8> = samples.iter().map(Sample::label).collect();
    Ok(compute_metrics(&pred, &truth)?)
}

/// Baseline: a one-class machine on the clean training scans; anything
/// outside its boundary is called an artefact.
pub fn one_class_metrics(
    train: &[Sample],
    test: &[Sample],
    nu: f64,
    hp: &SvmHyperparams,
) -> Result<MetricsReport, PipelineError> {
    let rows: Vec<Vec<f64>> = train
        .iter()
        .filter(|s| s.class.is_none())
        .map(|s| s.features.values.clone())
        .collect();
    let model = train_one_class(&rows, nu, hp)?;
    let pred = test
        .iter()
        .map(|s| predict(&model, &s.features.values).map(|(l, _)| -l))
        .collect::<Result<Vec<i8>, _>>()?;
    let truth: Vec<i8> = test.iter().map(Sample::label).collect();
    Ok(compute_metrics(&pred, &truth)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub ensemble: MetricsReport,
    pub one_class: MetricsReport,
    pub selection: SelectionReport,
    pub model: EnsembleModel,
}

/// Build a fresh dataset for `seed`, train the ensemble and score both it and
/// the one-class baseline on the held-out split.
pub fn evaluate_seed(
    cfg: &RunConfig,
    calibration: &CalibrationSet,
    seed: u64,
    gamma: Option<&GammaTable>,
) -> Result<SeedEvaluation, PipelineError> {
    let data = build_dataset(cfg, calibration, seed, gamma)?;
    let trained = train_ensemble(&data.train, &data.val, &cfg.svm, cfg.tune, &MaskPolicy::Select)?;
    Ok(SeedEvaluation {
        seed,
        ensemble: ensemble_metrics(&trained.ensemble, &data.test)?,
        one_class: one_class_metrics(&data.train, &data.test, cfg.contamination, &cfg.svm)?,
        selection: trained.selection,
        model: trained.ensemble,
    })
}

/// Mean and sample standard deviation of each metric over repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    pub configuration: String,
    pub mean: [f64; 5],
    pub std: [f64; 5],
    pub runs: usize,
}

impl MetricsSummary {
    pub fn of(configuration: impl Into<String>, reports: &[MetricsReport]) -> Self {
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for (j, (m, s)) in mean.iter_mut().zip(std.iter_mut()).enumerate() {
            let xs: Vec<f64> = reports.iter().map(|r| r.values()[j]).collect();
            *m = stats::mean(&xs);
            if xs.len() > 1 {
                let n = xs.len() as f64;
                *s = (stats::variance(&xs) * n / (n - 1.0)).sqrt();
            }
        }
        Self {
            configuration: configuration.into(),
            mean,
            std,
            runs: reports.len(),
        }
    }

    pub fn get(&self, metric: &str) -> Option<(f64, f64)> {
        let j = MetricsReport::NAMES.iter().position(|&n| n == metric)?;
        Some((self.mean[j], self.std[j]))
    }
}

/// `configuration,metric,mean,std,runs`, five rows per configuration.
pub fn write_metrics_csv(path: &Path, summaries: &[MetricsSummary]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["configuration", "metric", "mean", "std", "runs"])?;
    for s in summaries {
        for (j, name) in MetricsReport::NAMES.iter().enumerate() {
            w.write_record([
                s.configuration.clone(),
                name.to_string(),
                format!("{:.6}", s.mean[j]),
                format!("{:.6}", s.std[j]),
                s.runs.to_string(),
            ])?;
        }
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub seeds: Vec<SeedEvaluation>,
    pub ensemble: MetricsSummary,
    pub one_class: MetricsSummary,
}

/// Dataset seeds of the evaluation repetitions.
pub fn evaluation_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.eval_seeds as u64)
        .map(|r| derive_seed(cfg.seed, 1_000_000_000 + r))
        .collect()
}

/// Repeat [`evaluate_seed`] for each of [`evaluation_seeds`].
pub fn evaluate(cfg: &RunConfig, calibration: &CalibrationSet, gamma: Option<&GammaTable>) -> Result<Evaluation, PipelineError> {
    let seeds = evaluation_seeds(cfg)
        .into_iter()
        .map(|seed| evaluate_seed(cfg, calibration, seed, gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let mode = cfg.mode.name();
    let ens: Vec<MetricsReport> = seeds.iter().map(|s| s.ensemble).collect();
    let one: Vec<MetricsReport> = seeds.iter().map(|s| s.one_class).collect();
    Ok(Evaluation {
        ensemble: MetricsSummary::of(format!("ensemble-{mode}"), &ens),
        one_class: MetricsSummary::of(format!("one-class-{mode}"), &one),
        seeds,
    })
}

/// Median single-scan wall time per stage, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub threads: usize,
    pub repetitions: usize,
    pub preprocess: f64,
    pub features: f64,
    pub classification: f64,
    pub total: f64,
}

impl BenchReport {
    pub fn stage_sum(&self) -> f64 {
        self.preprocess + self.features + self.classification
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    stats::percentile_sorted(&xs, 0.5)
}

/// Time `repetitions` full passes of preprocessing, feature extraction and
/// ensemble classification of `volume` on `threads` threads.
pub fn bench(
    cfg: &RunConfig,
    model: &EnsembleModel,
    volume: &Volume,
    gamma: Option<&GammaTable>,
    repetitions: usize,
    threads: usize,
) -> Result<BenchReport, PipelineError> {
    let reps = repetitions.max(1);
    let pcfg = cfg.preprocess();
    let runs = with_jobs(threads, || {
        (0..reps)
            .map(|_| {
                let t0 = Instant::now();
                let ss = preprocess_volume(volume, &pcfg);
                let t1 = Instant::now();
                let g = match gamma {
                    Some(t) => t.vectors_for(volume.source_id(), &ss)?,
                    None => None,
                };
                let f = full_features(&ss, g.as_deref())?;
                let t2 = Instant::now();
                ensemble_predict(model, &f)?;
                let t3 = Instant::now();
                Ok([t1 - t0, t2 - t1, t3 - t2, t3 - t0].map(|d| d.as_secs_f64()))
            })
            .collect::<Result<Vec<[f64; 4]>, PipelineError>>()
    })?;
    let col = |j: usize| median(runs.iter().map(|r| r[j]).collect());
    Ok(BenchReport {
        threads,
        repetitions: reps,
        preprocess: col(0),
        features: col(1),
        classification: col(2),
        total: col(3),
    })
}

/// Per-class counts of fired members, useful for inspecting verdicts.
pub fn fired_counts(verdicts: &[EnsembleVerdict]) -> BTreeMap<ArtefactClass, usize> {
    let mut m = BTreeMap::new();
    for v in verdicts {
        for c in &v.fired {
            *m.entry(*c).or_insert(0) += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.size = 48;
        c.train_clean = 4;
        c.val_clean = 3;
        c.test_clean = 3;
        c.per_class = 2;
        c
    }

    fn fixed_calibration() -> CalibrationSet {
        let sev: Vec<Severity> = ArtefactClass::PARAMETRIC.iter().map(|c| c.default_theta_max()).collect();
        CalibrationSet::fixed(&sev)
    }

    #[test]
    fn plans_are_balanced_and_reproducible() {
        let cfg = small();
        let cal = fixed_calibration();
        let a = plan_split(&cfg, &cal, 3, Split::Train).unwrap();
        assert_eq!(a.len(), 4 + 9 * 2);
        for class in ArtefactClass::ALL {
            assert_eq!(a.iter().filter(|s| s.class == Some(class)).count(), 2);
        }
        assert_eq!(a, plan_split(&cfg, &cal, 3, Split::Train).unwrap());
        let b = plan_split(&cfg, &cal, 3, Split::Val).unwrap();
        assert!(a.iter().all(|s| b.iter().all(|t| t.phantom_seed != s.phantom_seed)));
    }

    #[test]
    fn missing_calibration_is_reported() {
        let r = plan_split(&small(), &CalibrationSet::default(), 0, Split::Test);
        assert!(matches!(r, Err(PipelineError::MissingCalibration(ArtefactClass::Gibbs))));
    }

    #[test]
    fn realised_volumes_follow_their_spec() {
        let cfg = small();
        let plan = plan_split(&cfg, &fixed_calibration(), 1, Split::Test).unwrap();
        let clean = realize(&cfg, 1, &plan[0]).unwrap();
        let again = realize(&cfg, 1, &plan[0]).unwrap();
        assert_eq!(clean.data(), again.data());
        assert_eq!(clean.source_id(), "test-clean-0000");
        let noisy = plan.iter().find(|s| s.class == Some(ArtefactClass::Noise)).unwrap();
        let v = realize(&cfg, 1, noisy).unwrap();
        let base = make_phantom_volume(noisy.phantom_seed, phantom_dims(&cfg), PhantomKind::Head).unwrap();
        assert_ne!(v.data(), base.data());
        let mis = plan.iter().find(|s| s.class == Some(ArtefactClass::Mislabel)).unwrap();
        let m = realize(&cfg, 1, mis).unwrap();
        assert_ne!(m.data(), base.data());
    }

    #[test]
    fn metrics_summary_uses_sample_std() {
        let a = MetricsReport::from_counts(1, 0, 1, 0);
        let b = MetricsReport::from_counts(0, 1, 0, 1);
        let s = MetricsSummary::of("x", &[a, b]);
        let (m, sd) = s.get("accuracy").unwrap();
        assert_eq!(m, 0.5);
        assert!((sd - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
