//! `mrqc`: artefact detection pipeline for brain MRI volumes.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 stage-file version or kind mismatch.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mrqc_core::config::{ConfigError, Mode, RunConfig};
use mrqc_core::pipeline::PipelineError;
use mrqc_core::stage::StageError;

#[derive(Parser, Debug)]
#[command(name = "mrqc", version, about = "Detect acquisition artefacts in brain MRI volumes")]
pub struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Slice layout: `2d` (central axial slice) or `2.5d` (3 positions x 3 views).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Per-slice external feature manifest.
    #[arg(long, global = true)]
    gamma: Option<PathBuf>,
    /// Search C and gamma on validation data when training.
    #[arg(long, global = true)]
    tune: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write seeded head phantoms as NIfTI volumes.
    Phantoms {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Reverse the tissue contrast.
        #[arg(long)]
        inverted: bool,
        /// Cube side in voxels (at least 64).
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Preprocess volumes and report their slices.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Write every slice and its log-magnitude spectrum as 16-bit PNG.
        #[arg(long)]
        dump_gallery: Option<PathBuf>,
    },
    /// Find the minimum severity of every artefact class on clean volumes.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated class names (default: all).
        #[arg(long)]
        classes: Option<String>,
    },
    /// Corrupt clean volumes with calibrated severities.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Fixed severity, e.g. `NOISE=0.4` or `GHOSTING=5,10,0.3`; repeatable.
        #[arg(long)]
        theta: Vec<String>,
        #[arg(long)]
        classes: Option<String>,
        /// Volumes per class.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Volumes used for mislabelling (default: inverted-contrast phantoms).
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Extract features of every volume in one or more directories.
    Extract {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every feature combination per class on validation data.
    Select {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the per-class ensemble.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Selection report to take masks from (default: select now).
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify volumes with a trained ensemble.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded phantom benchmark against a one-class baseline.
    Evaluate {
        /// Calibration file (default: calibrate on clean training phantoms).
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of seeded repetitions.
        #[arg(long)]
        seeds: Option<usize>,
        /// Also write each repetition's selection report next to `out`.
        #[arg(long)]
        selection_reports: bool,
    },
    /// Time preprocessing, feature extraction and classification of one scan.
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Volume to time (default: a phantom of `--dim` voxels).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 182)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub const EXIT_DATA: u8 = 3;
pub const EXIT_STAGE: u8 = 4;

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = &cli.mode {
        cfg.mode = Mode::parse(m).ok_or_else(|| UsageError(format!("unknown mode {m:?}; use 2d or 2.5d")))?;
        cfg.apply_mode_layout();
    }
    if let Some(g) = &cli.gamma {
        cfg.gamma_manifest = Some(g.clone());
    }
    if cli.tune {
        cfg.tune = true;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        cfg.jobs = j;
    }
    Ok(cfg)
}

/// Bad arguments detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn is_stage_mismatch(e: &StageError) -> bool {
    matches!(e, StageError::Version { .. } | StageError::WrongKind { .. })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() || cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<StageError>().is_some_and(is_stage_mismatch) {
            return EXIT_STAGE;
        }
        if let Some(PipelineError::Stage(s)) = cause.downcast_ref::<PipelineError>() {
            if is_stage_mismatch(s) {
                return EXIT_STAGE;
            }
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|cfg| {
        let jobs = cfg.jobs;
        mrqc_core::pipeline::with_jobs(jobs, || commands::run(&cli.command, &cfg))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
