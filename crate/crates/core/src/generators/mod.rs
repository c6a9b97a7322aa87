//! The nine artefact generators and volume-consistent corruption.
//!
//! Slice-level generators take a slice in `[-1, 1]`. K-space generators work
//! on the magnitude image `u = (x + 1) / 2`, so the zero-severity variant of
//! every class reproduces its input.

mod severity;
mod spatial;
mod spectral;


pub use severity::{ArtefactClass, Severity};
pub use spatial::{
    affine_bilinear, bias, bias_field, mislabel, zipper, zipper_regions, ZipperRegion,
};
pub use spectral::{
    band, band_spectrum, blurring, folding, folding_spectrum, gaussian_filter, ghosting,
    ghosting_trace, gibbs, gibbs_spectrum, noise, noise_spectrum, GhostingTrace,
};

use ndarray::{Array2, Axis};
use thiserror::Error;

use crate::io::Volume;
use crate::preprocess::{normalize_range, Slice};
use crate::SeedStream;

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("severity field `{field}` = {value} out of range ({bound})")]
    SeverityOutOfRange {
        field: &'static str,
        value: f64,
        bound: String,
    },
    #[error("severity for {found} passed to the {expected} generator")]
    ClassParamMismatch {
        expected: ArtefactClass,
        found: ArtefactClass,
    },
    #[error("mislabel pool is empty")]
    EmptyPool,
    #[error("mislabel pool index {index} out of range for pool of {len}")]
    PoolIndexOutOfRange { index: usize, len: usize },
}

/// Dispatch to the class generator without the final range normalisation.
pub fn apply_raw(
    class: ArtefactClass,
    slice: &Slice,
    severity: &Severity,
    rng: SeedStream,
    pool: &[Slice],
) -> Result<Slice, GeneratorError> {
    if severity.class() != class {
        return Err(GeneratorError::ClassParamMismatch {
            expected: class,
            found: severity.class(),
        });
    }
    match *severity {
        Severity::Gibbs {
            cut_freq,
            cut_phase,
        } => gibbs(slice, cut_freq, cut_phase),
        Severity::Folding { spacing } => folding(slice, spacing),
        Severity::Ghosting {
            rot_deg,
            trans_px,
            swap_fraction,
        } => ghosting(slice, rot_deg, trans_px, swap_fraction, rng),
        Severity::Blurring { filter_sigma } => blurring(slice, filter_sigma),
        Severity::Band {
            spike_amp,
            max_center_dist,
            n_points,
        } => band(slice, spike_amp, max_center_dist, n_points, rng),
        Severity::Bias {
            deg_x,
            deg_y,
            deg_xy,
        } => bias(slice, deg_x, deg_y, deg_xy),
        Severity::Zipper {
            n_regions,
            max_region_px,
        } => zipper(slice, n_regions, max_region_px, rng),
        Severity::Noise { sigma } => noise(slice, sigma, rng),
        Severity::Mislabel { pool_index } => mislabel(pool, pool_index),
    }
}

/// Corrupt a normalised slice with artefact `class` at `severity`; the result
/// is re-normalised to `[-1, 1]`. A zero severity returns the input as is,
/// since a resampled slice may touch only one end of the range.
pub fn apply(
    class: ArtefactClass,
    slice: &Slice,
    severity: &Severity,
    rng: SeedStream,
    pool: &[Slice],
) -> Result<Slice, GeneratorError> {
    let out = apply_raw(class, slice, severity, rng, pool)?;
    if class.has_severity() && severity.components().iter().all(|&c| c == 0.0) {
        return Ok(out);
    }
    Ok(normalize_range(&out))
}

/// Limit k-space distances to what a `rows x cols` plane can represent.
fn clamp_to_plane(severity: Severity, rows: usize, cols: usize) -> Severity {
    let half_rows = rows.div_ceil(2) - 1;
    let half_cols = cols.div_ceil(2) - 1;
    match severity {
        Severity::Gibbs {
            cut_freq,
            cut_phase,
        } => Severity::Gibbs {
            cut_freq: cut_freq.min(half_rows),
            cut_phase: cut_phase.min(half_cols),
        },
        Severity::Folding { spacing } => Severity::Folding {
            spacing: spacing.min(half_rows),
        },
        Severity::Band {
            spike_amp,
            max_center_dist,
            n_points,
        } => Severity::Band {
            spike_amp,
            max_center_dist: max_center_dist.min(half_rows.min(half_cols)),
            n_points,
        },
        other => other,
    }
}

/// Apply the same severity to every axial plane of a volume.
///
/// Each plane is min-max normalised to `[-1, 1]`, corrupted and mapped back
/// to its original intensity range. Constant planes are treated as pure
/// background (`-1`) and mapped back with the volume-wide range, so additive
/// artefacts still reach them. Pixel-unit severity fields are expressed at a
/// `reference_size` slice side and rescaled to the plane size. Plane `z`
/// draws from `rng.derive(z)`. Mislabelling substitutes `pool[pool_index]`.
pub fn corrupt_volume(
    volume: &Volume,
    class: ArtefactClass,
    severity: &Severity,
    rng: SeedStream,
    pool: &[Volume],
    reference_size: usize,
) -> Result<Volume, GeneratorError> {
    if severity.class() != class {
        return Err(GeneratorError::ClassParamMismatch {
            expected: class,
            found: severity.class(),
        });
    }
    if let Severity::Mislabel { pool_index } = *severity {
        if pool.is_empty() {
            return Err(GeneratorError::EmptyPool);
        }
        return pool
            .get(pool_index)
            .cloned()
            .ok_or(GeneratorError::PoolIndexOutOfRange {
                index: pool_index,
                len: pool.len(),
            });
    }
    let [nx, ny, nz] = volume.dims();
    let plane_severity = clamp_to_plane(severity.rescaled_to(reference_size, nx, ny), nx, ny);
    let data = volume.data();
    let (vol_lo, vol_hi) = crate::stats::min_max(data.as_slice().expect("standard layout"));
    let vol_span = if vol_hi > vol_lo { vol_hi - vol_lo } else { 1.0 };

    let mut out = data.clone();
    for z in 0..nz {
        let plane = data.index_axis(Axis(2), z);
        let (lo, hi) = plane
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (span, normalized) = if hi - lo > crate::stats::EPS {
            (hi - lo, plane.mapv(|v| 2.0 * (v - lo) / (hi - lo) - 1.0))
        } else {
            (vol_span, Array2::from_elem((nx, ny), -1.0))
        };
        let corrupted = apply_raw(
            class,
            &Slice::normalized(normalized),
            &plane_severity,
            rng.derive(z as u64),
            &[],
        )?;
        out.index_axis_mut(Axis(2), z)
            .assign(&corrupted.data.mapv(|x| lo + (x + 1.0) / 2.0 * span));
    }
    Ok(volume
        .with_data(out)
        .expect("corruption keeps intensities finite"))
}
