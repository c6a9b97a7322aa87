use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use mrqc_core::classifier::ensemble_predict;
use mrqc_core::config::RunConfig;
use mrqc_core::features::{load_external_features, FeatureTable, GammaTable};
use mrqc_core::generators::{corrupt_volume, ArtefactClass, Severity};
use mrqc_core::io::{
    make_phantom_volume, read_nifti_file, write_nifti_file, write_png_gray16, write_slice_png, NiftiDatatype,
    PhantomKind, View, Volume,
};
use mrqc_core::kspace;
use mrqc_core::pipeline::{
    bench, calibrate_all, clean_slices, evaluate, evaluation_seeds, read_model, scan_features, select_all,
    train_ensemble, write_metrics_csv, write_model, CalibrationSet, MaskPolicy, Sample,
};
use mrqc_core::preprocess::{preprocess_volume, PreprocessConfig, Slice};
use mrqc_core::rng::derive_seed;
use mrqc_core::selection::SelectionReport;
use mrqc_core::SeedStream;

use crate::{Command, UsageError};

pub const MANIFEST: &str = "manifest.csv";
pub const FEATURES: &str = "features.csv";
pub const LABELS: &str = "labels.csv";
const CLEAN: &str = "CLEAN";

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Phantoms {
            out,
            count,
            inverted,
            dim,
        } => phantoms(cfg, out, *count, *inverted, dim.unwrap_or(cfg.phantom_dim)),
        Command::Preprocess { input, dump_gallery } => preprocess(cfg, input, dump_gallery.as_deref()),
        Command::Calibrate { input, out, classes } => calibrate(cfg, input, out, classes.as_deref()),
        Command::Corrupt {
            input,
            out,
            calibration,
            theta,
            classes,
            count,
            pool,
        } => corrupt(
            cfg,
            input,
            out,
            calibration.as_deref(),
            theta,
            classes.as_deref(),
            *count,
            pool.as_deref(),
        ),
        Command::Extract { input, out } => extract(cfg, input, out),
        Command::Select { train, val, out } => select(cfg, train, val, out),
        Command::Train {
            train,
            val,
            selection,
            out,
        } => train_model(cfg, train, val, selection.as_deref(), out),
        Command::Classify { model, input, out } => classify(cfg, model, input, out),
        Command::Evaluate {
            calibration,
            out,
            seeds,
            selection_reports,
        } => run_evaluate(cfg, calibration.as_deref(), out, *seeds, *selection_reports),
        Command::Bench {
            model,
            input,
            dim,
            repetitions,
            out,
        } => run_bench(cfg, model, input.as_deref(), *dim, *repetitions, out.as_deref()),
    }
}

fn volume_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".gz").trim_end_matches(".nii").to_string()
}

/// NIfTI files of a directory in name order.
pub fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.to_string_lossy();
            n.ends_with(".nii") || n.ends_with(".nii.gz")
        })
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no .nii or .nii.gz volumes in {}", dir.display());
    }
    Ok(out)
}

fn read_volume(path: &Path) -> Result<Volume> {
    read_nifti_file(path).with_context(|| format!("reading {}", path.display()))
}

fn write_volume(volume: &Volume, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}.nii.gz", volume.source_id()));
    write_nifti_file(volume, &path, NiftiDatatype::Float32).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_classes(list: Option<&str>) -> Result<Vec<ArtefactClass>> {
    match list {
        None => Ok(ArtefactClass::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|c| {
                ArtefactClass::parse(c.trim())
                    .ok_or_else(|| UsageError(format!("unknown artefact class {c:?}")).into())
            })
            .collect(),
    }
}

/// `CLASS=v1,v2,...` with one value per severity component.
pub fn parse_theta(s: &str) -> Result<Severity> {
    let bad = || UsageError(format!("invalid --theta {s:?}; expected CLASS=v1,v2,..."));
    let (class, values) = s.split_once('=').ok_or_else(bad)?;
    let class = ArtefactClass::parse(class.trim())
        .filter(|c| c.has_severity())
        .ok_or_else(bad)?;
    let comps: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0))
        .collect::<Option<_>>()
        .ok_or_else(bad)?;
    if comps.len() != class.component_names().len() {
        return Err(bad().into());
    }
    Ok(Severity::from_components(class, &comps))
}

fn theta_text(s: &Severity) -> String {
    s.class()
        .component_names()
        .iter()
        .zip(s.components())
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn phantoms(cfg: &RunConfig, out: &Path, count: usize, inverted: bool, dim: usize) -> Result<()> {
    fs::create_dir_all(out)?;
    let kind = if inverted {
        PhantomKind::InvertedHead
    } else {
        PhantomKind::Head
    };
    let prefix = if inverted { "inverted" } else { "phantom" };
    (0..count).into_par_iter().try_for_each(|i| -> Result<()> {
        let v = make_phantom_volume(derive_seed(cfg.seed, i as u64), [dim; 3], kind)?
            .with_source_id(format!("{prefix}-{i:04}"));
        write_volume(&v, out)?;
        Ok(())
    })?;
    println!("wrote {count} {prefix} volumes of {dim}^3 voxels to {}", out.display());
    Ok(())
}

fn log_spectrum(slice: &Slice) -> ndarray::Array2<f64> {
    kspace::forward(&slice.data.mapv(|v| (v + 1.0) / 2.0))
        .magnitudes()
        .mapv(f64::ln_1p)
}

fn preprocess(cfg: &RunConfig, input: &Path, gallery: Option<&Path>) -> Result<()> {
    let paths = list_volumes(input)?;
    if let Some(g) = gallery {
        fs::create_dir_all(g)?;
    }
    let pcfg = cfg.preprocess();
    for path in &paths {
        let v = read_volume(path)?;
        let ss = preprocess_volume(&v, &pcfg);
        println!(
            "{}: {} slices of {}x{} ({} positions x {} views)",
            v.source_id(),
            ss.slices().len(),
            pcfg.size,
            pcfg.size,
            ss.k_count(),
            ss.v_count()
        );
        if let Some(g) = gallery {
            for (k, view, s) in ss.labeled() {
                let stem = format!("{}_k{k}_{}", v.source_id(), view.name());
                write_png_gray16(&g.join(format!("{stem}.png")), &s.data, -1.0, 1.0)?;
                write_slice_png(&g.join(format!("{stem}_spectrum.png")), &log_spectrum(s))?;
            }
        }
    }
    Ok(())
}

fn slices_of(cfg: &RunConfig, paths: &[PathBuf]) -> Result<Vec<Slice>> {
    let pcfg = cfg.preprocess();
    let sets = paths
        .par_iter()
        .map(|p| Ok(preprocess_volume(&read_volume(p)?, &pcfg).into_slices()))
        .collect::<Result<Vec<_>>>()?;
    Ok(sets.into_iter().flatten().collect())
}

fn calibrate(cfg: &RunConfig, input: &Path, out: &Path, classes: Option<&str>) -> Result<()> {
    let classes = parse_classes(classes)?;
    let slices = slices_of(cfg, &list_volumes(input)?)?;
    let (set, d) = calibrate_all(cfg, &slices, &classes)?;
    set.write(out)?;
    println!("discriminator: {}", mrqc_core::calibration::Discriminator::provenance(&d));
    for r in &set.results {
        println!(
            "{:<9} theta_min {}  (normalised {:?})",
            r.class.to_string(),
            theta_text(&r.theta_min),
            r.normalized_min()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn corrupt(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    calibration: Option<&Path>,
    theta: &[String],
    classes: Option<&str>,
    count: usize,
    pool_dir: Option<&Path>,
) -> Result<()> {
    let classes = parse_classes(classes)?;
    let mut fixed: BTreeMap<ArtefactClass, Severity> = BTreeMap::new();
    for t in theta {
        let s = parse_theta(t)?;
        fixed.insert(s.class(), s);
    }
    let cal = match calibration {
        Some(p) => Some(CalibrationSet::read(p)?),
        None => None,
    };
    let fixed_set = CalibrationSet::fixed(&fixed.values().cloned().collect::<Vec<_>>());
    let result_for = |class: ArtefactClass| {
        fixed_set
            .get(class)
            .or_else(|| cal.as_ref().and_then(|c| c.get(class)))
            .ok_or_else(|| anyhow!("no calibration for {class}; pass --calibration or --theta {class}=..."))
    };
    for &c in classes.iter().filter(|c| c.has_severity()) {
        result_for(c)?;
    }

    let sources = list_volumes(input)?
        .iter()
        .map(|p| read_volume(p).map(|v| v.with_source_id(volume_id(p))))
        .collect::<Result<Vec<_>>>()?;
    let pool: Vec<Volume> = if !classes.contains(&ArtefactClass::Mislabel) {
        Vec::new()
    } else if let Some(dir) = pool_dir {
        list_volumes(dir)?.iter().map(|p| read_volume(p)).collect::<Result<_>>()?
    } else {
        let dims = sources[0].dims().map(|d| d.max(64));
        (0..count.max(1))
            .map(|j| make_phantom_volume(derive_seed(cfg.seed, 900_000 + j as u64), dims, PhantomKind::InvertedHead))
            .collect::<Result<_, _>>()?
    };
    fs::create_dir_all(out)?;
    let gallery = out.join("gallery");
    fs::create_dir_all(&gallery)?;

    let mut jobs = Vec::new();
    for &class in &classes {
        for i in 0..count {
            jobs.push((class, i));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(class, i)| -> Result<(ArtefactClass, usize, Vec<String>, Volume)> {
            let task = derive_seed(cfg.seed, (class.index() as u64 + 1) * 10_000 + i as u64);
            let root = SeedStream::new(task);
            let mut draw = root.derive(1);
            let severity = if class.has_severity() {
                mrqc_core::calibration::sample_severity(result_for(class)?, &mut draw)
            } else {
                Severity::Mislabel {
                    pool_index: draw.below(pool.len().max(1)),
                }
            };
            let src = &sources[i % sources.len()];
            let id = format!("{}-{class}-{i:04}", src.source_id());
            let v = corrupt_volume(src, class, &severity, root.derive(2), &pool, cfg.size)?.with_source_id(id.clone());
            write_volume(&v, out)?;
            let rec = vec![
                format!("{id}.nii.gz"),
                class.to_string(),
                src.source_id().to_string(),
                theta_text(&severity),
                task.to_string(),
            ];
            Ok((class, i, rec, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_path(out.join(MANIFEST))?;
    w.write_record(["file", "class", "source", "theta", "seed"])?;
    let gallery_cfg = PreprocessConfig {
        positions: vec![0.5],
        views: vec![View::Axial],
        ..cfg.preprocess()
    };
    for (class, i, rec, v) in &rows {
        w.write_record(rec)?;
        if *i == 0 {
            let s = preprocess_volume(v, &gallery_cfg).into_slices().remove(0);
            write_png_gray16(&gallery.join(format!("{class}.png")), &s.data, -1.0, 1.0)?;
        }
    }
    w.flush()?;
    println!("wrote {} corrupted volumes and {MANIFEST} to {}", rows.len(), out.display());
    Ok(())
}

/// `file -> class` from a directory's manifest; volumes without an entry are clean.
fn manifest_labels(dir: &Path) -> Result<BTreeMap<String, ArtefactClass>> {
    let path = dir.join(MANIFEST);
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut r = csv::Reader::from_path(&path)?;
    for rec in r.records() {
        let rec = rec?;
        let file = rec.get(0).ok_or_else(|| anyhow!("{}: missing file column", path.display()))?;
        let class = rec
            .get(1)
            .and_then(ArtefactClass::parse)
            .ok_or_else(|| anyhow!("{}: bad class in row for {file}", path.display()))?;
        out.insert(volume_id(Path::new(file)), class);
    }
    Ok(out)
}

fn gamma_table(cfg: &RunConfig) -> Result<Option<GammaTable>> {
    match &cfg.gamma_manifest {
        Some(p) => Ok(Some(load_external_features(p)?)),
        None => Ok(None),
    }
}

fn extract(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let gamma = gamma_table(cfg)?;
    let mut items = Vec::new();
    for dir in inputs {
        let labels = manifest_labels(dir)?;
        for p in list_volumes(dir)? {
            let id = volume_id(&p);
            let class = labels.get(&id).copied();
            items.push((p, id, class));
        }
    }
    let features = items
        .par_iter()
        .map(|(p, id, _)| {
            let v = read_volume(p)?.with_source_id(id.clone());
            Ok(scan_features(cfg, &v, gamma.as_ref())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = FeatureTable::new(features[0].names.clone());
    for ((_, id, _), f) in items.iter().zip(&features) {
        table.push(id.clone(), f)?;
    }
    fs::create_dir_all(out)?;
    table.write_csv(&out.join(FEATURES))?;
    let mut w = csv::Writer::from_path(out.join(LABELS))?;
    w.write_record(["volume_id", "class"])?;
    for (_, id, class) in &items {
        w.write_record([id.as_str(), &class.map_or(CLEAN.to_string(), |c| c.to_string())])?;
    }
    w.flush()?;
    println!(
        "wrote {} feature rows of width {} (schema {}) to {}",
        table.len(),
        table.names.len(),
        table.fingerprint(),
        out.display()
    );
    Ok(())
}

/// Feature rows and labels written by `extract`.
pub fn load_samples(dir: &Path) -> Result<Vec<Sample>> {
    let table = FeatureTable::read_csv(&dir.join(FEATURES)).with_context(|| format!("reading {}", dir.join(FEATURES).display()))?;
    let mut r = csv::Reader::from_path(dir.join(LABELS)).with_context(|| format!("reading {}", dir.join(LABELS).display()))?;
    let mut labels = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let class = match rec.get(1) {
            Some(CLEAN) => None,
            Some(c) => Some(ArtefactClass::parse(c).ok_or_else(|| anyhow!("unknown class {c:?} in labels"))?),
            None => bail!("labels row without class"),
        };
        labels.insert(rec.get(0).unwrap_or_default().to_string(), class);
    }
    (0..table.len())
        .map(|i| {
            let id = table.ids[i].clone();
            let class = *labels.get(&id).ok_or_else(|| anyhow!("no label for {id}"))?;
            Ok(Sample {
                id,
                class,
                features: table.vector(i),
            })
        })
        .collect()
}

fn select(cfg: &RunConfig, train: &Path, val: &Path, out: &Path) -> Result<()> {
    let report = select_all(&load_samples(train)?, &load_samples(val)?, &cfg.svm)?;
    report.write_csv(out)?;
    print_selection(&report);
    Ok(())
}

fn print_selection(report: &SelectionReport) {
    for row in &report.rows {
        let c = row.chosen_score();
        println!(
            "{:<9} {:<14} width {:>4}  validation accuracy {:.3}",
            row.class.to_string(),
            row.chosen.to_string(),
            c.width,
            c.accuracy
        );
    }
}

fn train_model(cfg: &RunConfig, train: &Path, val: &Path, selection: Option<&Path>, out: &Path) -> Result<()> {
    let policy = match selection {
        Some(p) => MaskPolicy::Fixed(SelectionReport::read_choices(p).map_err(|e| anyhow!("{}: {e}", p.display()))?),
        None => MaskPolicy::Select,
    };
    let t = train_ensemble(&load_samples(train)?, &load_samples(val)?, &cfg.svm, cfg.tune, &policy)?;
    write_model(out, &t.ensemble)?;
    for (m, (_, hp)) in t.ensemble.members.iter().zip(&t.hyperparams) {
        println!(
            "{:<9} {:<14} {} support vectors, C {}, gamma {:.3e}",
            m.class.to_string(),
            m.mask.to_string(),
            m.model.support_vectors.len(),
            hp.c,
            m.model.gamma
        );
    }
    println!("model written to {} (schema {})", out.display(), t.ensemble.schema);
    Ok(())
}

fn classify(cfg: &RunConfig, model: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = read_model(model)?;
    let gamma = gamma_table(cfg)?;
    let paths = list_volumes(input)?;
    let verdicts = paths
        .par_iter()
        .map(|p| {
            let v = read_volume(p)?.with_source_id(volume_id(p));
            let f = scan_features(cfg, &v, gamma.as_ref())?;
            Ok(ensemble_predict(&model, &f)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["volume_id".to_string(), "verdict".into(), "fired".into()];
    header.extend(model.members.iter().map(|m| format!("{}_margin", m.class)));
    w.write_record(&header)?;
    let mut flagged = 0;
    for (p, v) in paths.iter().zip(&verdicts) {
        flagged += usize::from(v.artefact);
        let mut rec = vec![
            volume_id(p),
            if v.artefact { "ARTEFACT" } else { CLEAN }.to_string(),
            v.fired.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
        ];
        rec.extend(v.per_class.iter().map(|(_, _, m)| format!("{m:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{flagged} of {} volumes flagged; verdicts in {}", paths.len(), out.display());
    Ok(())
}

fn run_evaluate(
    cfg: &RunConfig,
    calibration: Option<&Path>,
    out: &Path,
    seeds: Option<usize>,
    selection_reports: bool,
) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(n) = seeds {
        if n == 0 {
            return Err(UsageError("--seeds must be at least 1".into()).into());
        }
        cfg.eval_seeds = n;
    }
    let gamma = gamma_table(&cfg)?;
    let cal = match calibration {
        Some(p) => CalibrationSet::read(p)?,
        None => {
            let clean = clean_slices(&cfg, cfg.seed, cfg.train_clean)?;
            calibrate_all(&cfg, &clean, &ArtefactClass::ALL)?.0
        }
    };
    let e = evaluate(&cfg, &cal, gamma.as_ref())?;
    write_metrics_csv(out, &[e.ensemble.clone(), e.one_class.clone()])?;
    if selection_reports {
        for (r, (s, seed)) in e.seeds.iter().zip(evaluation_seeds(&cfg)).enumerate() {
            let p = out.with_extension(format!("seed{r}.selection.csv"));
            s.selection.write_csv(&p)?;
            println!("selection report for dataset seed {seed}: {}", p.display());
        }
    }
    for s in [&e.ensemble, &e.one_class] {
        let cells: Vec<String> = mrqc_core::classifier::MetricsReport::NAMES
            .iter()
            .zip(s.mean.iter().zip(&s.std))
            .map(|(n, (m, sd))| format!("{n} {:.3}+/-{:.3}", m, sd))
            .collect();
        println!("{:<16} {}", s.configuration, cells.join("  "));
    }
    Ok(())
}

fn run_bench(
    cfg: &RunConfig,
    model: &Path,
    input: Option<&Path>,
    dim: usize,
    repetitions: usize,
    out: Option<&Path>,
) -> Result<()> {
    let model = read_model(model)?;
    let gamma = gamma_table(cfg)?;
    let volume = match input {
        Some(p) => read_volume(p)?.with_source_id(volume_id(p)),
        None => make_phantom_volume(cfg.seed, [dim; 3], PhantomKind::Head)?,
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut reports = vec![bench(cfg, &model, &volume, gamma.as_ref(), repetitions, 1)?];
    if threads > 1 {
        reports.push(bench(cfg, &model, &volume, gamma.as_ref(), repetitions, threads)?);
    }
    println!("median over {repetitions} repetitions, volume {:?}", volume.dims());
    for r in &reports {
        println!(
            "{:>2} thread(s): preprocess {:.4} s  features {:.4} s  classification {:.6} s  total {:.4} s",
            r.threads, r.preprocess, r.features, r.classification, r.total
        );
    }
    if let Some(p) = out {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["threads", "stage", "seconds"])?;
        for r in &reports {
            for (stage, s) in [
                ("preprocess", r.preprocess),
                ("features", r.features),
                ("classification", r.classification),
                ("total", r.total),
            ] {
                w.write_record([r.threads.to_string(), stage.to_string(), format!("{s:.6}")])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
