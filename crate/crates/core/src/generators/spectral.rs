//! Generators acting in k-space.
//!
//! Each takes a slice in `[-1, 1]`, maps it to the nonnegative magnitude
//! domain `u = (x + 1) / 2`, edits the centred spectrum and reconstructs the
//! magnitude image before mapping back.

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::spatial::affine_bilinear;
use super::GeneratorError;
use crate::kspace::{self, KSpace};
use crate::preprocess::{normalize_range, Slice};
use crate::{stats, SeedStream};

pub(crate) fn to_unit(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| (v + 1.0) / 2.0)
}

pub(crate) fn from_unit(u: &Array2<f64>) -> Array2<f64> {
    u.mapv(|v| 2.0 * v - 1.0)
}

fn reconstruct(slice: &Slice, k: &KSpace) -> Slice {
    slice.with_data(from_unit(&kspace::inverse(k)))
}

fn out_of_range(field: &'static str, value: f64, bound: &str) -> GeneratorError {
    GeneratorError::SeverityOutOfRange {
        field,
        value,
        bound: bound.to_string(),
    }
}

fn check_nonneg(field: &'static str, v: f64) -> Result<(), GeneratorError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(out_of_range(field, v, ">= 0"))
    }
}

/// Zero the `cut_freq` outermost rows and `cut_phase` outermost columns on
/// each side of the centred spectrum.
pub fn gibbs_spectrum(k: &KSpace, cut_freq: usize, cut_phase: usize) -> KSpace {
    let (h, w) = k.dim();
    let mut data = k.data.clone();
    for ((i, j), c) in data.indexed_iter_mut() {
        if i < cut_freq || i >= h - cut_freq || j < cut_phase || j >= w - cut_phase {
            *c = Complex64::default();
        }
    }
    KSpace { data }
}

pub fn gibbs(slice: &Slice, cut_freq: usize, cut_phase: usize) -> Result<Slice, GeneratorError> {
    let (h, w) = slice.dim();
    if cut_freq >= h.div_ceil(2) {
        return Err(out_of_range("cut_freq", cut_freq as f64, &format!("< {}", h.div_ceil(2))));
    }
    if cut_phase >= w.div_ceil(2) {
        return Err(out_of_range("cut_phase", cut_phase as f64, &format!("< {}", w.div_ceil(2))));
    }
    if cut_freq == 0 && cut_phase == 0 {
        return Ok(slice.clone());
    }
    let k = kspace::forward(&to_unit(&slice.data));
    Ok(reconstruct(slice, &gibbs_spectrum(&k, cut_freq, cut_phase)))
}

/// Keep every `(spacing + 1)`-th phase-encode row counted from DC and zero
/// the rows in between (a reduced field of view sampled on the full grid).
pub fn folding_spectrum(k: &KSpace, spacing: usize) -> KSpace {
    let step = spacing as isize + 1;
    let (ch, _) = k.centre();
    let mut data = k.data.clone();
    for (i, mut row) in data.rows_mut().into_iter().enumerate() {
        if (i as isize - ch as isize).rem_euclid(step) != 0 {
            row.fill(Complex64::default());
        }
    }
    KSpace { data }
}

/// Folding, rescaled to `[-1, 1]`; `spacing = 0` is the identity.
pub fn folding(slice: &Slice, spacing: usize) -> Result<Slice, GeneratorError> {
    let (h, _) = slice.dim();
    if spacing >= h.div_ceil(2) {
        return Err(out_of_range("spacing", spacing as f64, &format!("< {}", h.div_ceil(2))));
    }
    if spacing == 0 {
        return Ok(slice.clone());
    }
    let k = kspace::forward(&to_unit(&slice.data));
    Ok(normalize_range(&reconstruct(slice, &folding_spectrum(&k, spacing))))
}

/// Intermediate products of the ghosting generator.
#[derive(Clone, Debug)]
pub struct GhostingTrace {
    /// Spectrum of the input.
    pub original: KSpace,
    /// Spectrum of the moved copy.
    pub moved: KSpace,
    /// Spectrum after row replacement.
    pub combined: KSpace,
    /// Phase-encode rows taken from `moved`, in draw order.
    pub swapped_rows: Vec<usize>,
}

/// Random rigid motion (rotation in `[-rot_deg, rot_deg]`, translations in
/// `[-trans_px, trans_px]`), then `floor(swap_fraction * rows)` uniformly
/// chosen phase-encode rows of the original spectrum are replaced by the
/// moved spectrum's rows.
pub fn ghosting_trace(
    unit_image: &Array2<f64>,
    rot_deg: f64,
    trans_px: f64,
    swap_fraction: f64,
    mut rng: SeedStream,
) -> GhostingTrace {
    let (h, _) = unit_image.dim();
    let angle = rng.uniform_range(-1.0, 1.0) * rot_deg;
    let ty = rng.uniform_range(-1.0, 1.0) * trans_px;
    let tx = rng.uniform_range(-1.0, 1.0) * trans_px;
    let mut rows: Vec<usize> = (0..h).collect();
    rng.shuffle(&mut rows);
    let n_swap = ((swap_fraction * h as f64).floor() as usize).min(h);
    rows.truncate(n_swap);

    let original = kspace::forward(unit_image);
    let moved = kspace::forward(&affine_bilinear(unit_image, angle, ty, tx));
    let mut combined = original.data.clone();
    for &r in &rows {
        combined.row_mut(r).assign(&moved.data.row(r));
    }
    GhostingTrace {
        original,
        moved,
        combined: KSpace { data: combined },
        swapped_rows: rows,
    }
}

pub fn ghosting(
    slice: &Slice,
    rot_deg: f64,
    trans_px: f64,
    swap_fraction: f64,
    rng: SeedStream,
) -> Result<Slice, GeneratorError> {
    check_nonneg("rot_deg", rot_deg)?;
    check_nonneg("trans_px", trans_px)?;
    if !(0.0..=1.0).contains(&swap_fraction) {
        return Err(out_of_range("swap_fraction", swap_fraction, "in [0, 1]"));
    }
    let (h, _) = slice.dim();
    if (swap_fraction * h as f64).floor() == 0.0 || (rot_deg == 0.0 && trans_px == 0.0) {
        return Ok(slice.clone());
    }
    let trace = ghosting_trace(&to_unit(&slice.data), rot_deg, trans_px, swap_fraction, rng);
    Ok(reconstruct(slice, &trace.combined))
}

/// Gaussian low-pass `exp(-2 pi^2 sigma^2 ((dy/h)^2 + (dx/w)^2))`, the k-space
/// image of an image-domain Gaussian of `sigma` pixels. For a square `s x s`
/// grid this is `exp(-r^2 / (2 sigma_k^2))` with `sigma_k = s / (2 pi sigma)`.
pub fn gaussian_filter(h: usize, w: usize, sigma: f64) -> Array2<f64> {
    let (ch, cw) = (h / 2, w / 2);
    let c = 2.0 * std::f64::consts::PI * std::f64::consts::PI * sigma * sigma;
    Array2::from_shape_fn((h, w), |(i, j)| {
        let fy = (i as f64 - ch as f64) / h as f64;
        let fx = (j as f64 - cw as f64) / w as f64;
        (-c * (fy * fy + fx * fx)).exp()
    })
}

pub fn blurring(slice: &Slice, filter_sigma: f64) -> Result<Slice, GeneratorError> {
    check_nonneg("filter_sigma", filter_sigma)?;
    if filter_sigma == 0.0 {
        return Ok(slice.clone());
    }
    let (h, w) = slice.dim();
    let k = kspace::forward(&to_unit(&slice.data));
    let filtered = kspace::apply_filter(&k, &gaussian_filter(h, w, filter_sigma));
    Ok(reconstruct(slice, &filtered))
}

/// Add `n_points` Hermitian spike pairs of height `spike_amp * max|K|` at
/// offsets drawn uniformly inside the disc of radius `max_center_dist`
/// (DC excluded). Returns the new spectrum and the spike offsets `(dy, dx)`.
pub fn band_spectrum(
    k: &KSpace,
    spike_amp: f64,
    max_center_dist: usize,
    n_points: usize,
    mut rng: SeedStream,
) -> (KSpace, Vec<(isize, isize)>) {
    let mut data = k.data.clone();
    let mut offsets = Vec::with_capacity(n_points);
    if max_center_dist == 0 {
        return (KSpace { data }, offsets);
    }
    let height = Complex64::new(spike_amp * k.max_magnitude(), 0.0);
    let (ch, cw) = k.centre();
    let d = max_center_dist as f64;
    for _ in 0..n_points {
        let rho = rng.uniform().sqrt() * d;
        let phi = rng.uniform() * std::f64::consts::TAU;
        let mut dy = (rho * phi.sin()).round() as isize;
        let mut dx = (rho * phi.cos()).round() as isize;
        if dy * dy + dx * dx > (max_center_dist * max_center_dist) as isize {
            // rounding pushed the point outside the disc; pull it back radially
            dy = (dy as f64 * 0.999).trunc() as isize;
            dx = (dx as f64 * 0.999).trunc() as isize;
        }
        if dy == 0 && dx == 0 {
            dx = 1;
        }
        let (ci, cj) = (ch as isize, cw as isize);
        data[[(ci + dy) as usize, (cj + dx) as usize]] += height;
        data[[(ci - dy) as usize, (cj - dx) as usize]] += height;
        offsets.push((dy, dx));
    }
    (KSpace { data }, offsets)
}

pub fn band(
    slice: &Slice,
    spike_amp: f64,
    max_center_dist: usize,
    n_points: usize,
    rng: SeedStream,
) -> Result<Slice, GeneratorError> {
    check_nonneg("spike_amp", spike_amp)?;
    let (h, w) = slice.dim();
    let limit = h.min(w).div_ceil(2);
    if max_center_dist >= limit {
        return Err(out_of_range(
            "max_center_dist",
            max_center_dist as f64,
            &format!("< {limit}"),
        ));
    }
    if n_points == 0 || spike_amp == 0.0 || max_center_dist == 0 {
        return Ok(slice.clone());
    }
    let k = kspace::forward(&to_unit(&slice.data));
    let (spiked, _) = band_spectrum(&k, spike_amp, max_center_dist, n_points, rng);
    Ok(reconstruct(slice, &spiked))
}

/// Add independent `N(0, (sigma * std|K|)^2)` to the real and imaginary part
/// of every sample, drawn in row-major order (real first).
pub fn noise_spectrum(k: &KSpace, sigma: f64, mut rng: SeedStream) -> KSpace {
    let mags: Vec<f64> = k.data.iter().map(|c| c.norm()).collect();
    let scale = sigma * stats::std_dev(&mags);
    let mut data = k.data.clone();
    for c in data.iter_mut() {
        let re = rng.normal();
        let im = rng.normal();
        *c += Complex64::new(scale * re, scale * im);
    }
    KSpace { data }
}

pub fn noise(slice: &Slice, sigma: f64, rng: SeedStream) -> Result<Slice, GeneratorError> {
    check_nonneg("sigma", sigma)?;
    if sigma == 0.0 {
        return Ok(slice.clone());
    }
    let k = kspace::forward(&to_unit(&slice.data));
    Ok(reconstruct(slice, &noise_spectrum(&k, sigma, rng)))
}
