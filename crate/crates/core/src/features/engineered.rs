//! The 26 imaging-domain features. Every feature is computed on the
//! intensity-like image `u = (x + 1) / 2` in `[0, 1]`; definitions are listed
//! in `docs/feature_dictionary.md`.

use ndarray::Array2;

use super::mask::{compute_mask, patch_size, ForegroundMask, Patch};
use crate::preprocess::Slice;
use crate::stats::{self, safe_div, EPS};

pub const XI_NAMES: [&str; 26] = [
    "fg_mean",
    "fg_range",
    "fg_var",
    "fg_cv",
    "cpp",
    "fg_psnr",
    "snr1",
    "snr2",
    "snr3",
    "snr4",
    "cnr",
    "fgpatch_cv",
    "cjv",
    "efc",
    "fber",
    "gcf_bg",
    "gcf_fg",
    "lap_fg_max",
    "lap_fg_var",
    "lap_bg_mean",
    "lap_bg_var",
    "lap_bg_entropy",
    "row_int_min",
    "row_int_max",
    "col_int_min",
    "col_int_max",
];

const GCF_LEVELS: usize = 9;

fn clamped(u: &Array2<f64>, i: isize, j: isize) -> f64 {
    let (h, w) = u.dim();
    u[[i.clamp(0, h as isize - 1) as usize, j.clamp(0, w as isize - 1) as usize]]
}

/// Absolute response of the 4-neighbour Laplacian with replicated borders.
pub fn laplacian_abs(u: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(u.dim(), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        let c = clamped(u, i, j);
        ((clamped(u, i - 1, j) - c)
            + (clamped(u, i + 1, j) - c)
            + (clamped(u, i, j - 1) - c)
            + (clamped(u, i, j + 1) - c))
            .abs()
    })
}

/// Absolute response of the 8-neighbour contrast kernel, divided by 8.
fn contrast_abs(u: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(u.dim(), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        let c = clamped(u, i, j);
        let mut acc = 0.0;
        for di in -1..=1 {
            for dj in -1..=1 {
                if di != 0 || dj != 0 {
                    acc += c - clamped(u, i + di, j + dj);
                }
            }
        }
        acc.abs() / 8.0
    })
}

fn gcf_weight(level: usize) -> f64 {
    let x = level as f64 / GCF_LEVELS as f64;
    (-0.406385 * x + 0.334573) * x + 0.0877526
}

/// Mean absolute difference to in-mask 4-neighbours, averaged over in-mask
/// pixels that have at least one such neighbour.
fn local_contrast(lum: &Array2<f64>, mask: &Array2<bool>) -> f64 {
    let (h, w) = lum.dim();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..h {
        for j in 0..w {
            if !mask[[i, j]] {
                continue;
            }
            let mut acc = 0.0;
            let mut n = 0usize;
            let neighbours = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (a, b) in neighbours {
                if a < h && b < w && mask[[a, b]] {
                    acc += (lum[[i, j]] - lum[[a, b]]).abs();
                    n += 1;
                }
            }
            if n > 0 {
                total += acc / n as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Global contrast factor restricted to a mask: weighted sum of local
/// contrast over up to nine 2x2-average pyramid levels. Perceptual luminance
/// is `100 * sqrt(u^2.2)`; a pooled pixel is in the mask when at least two of
/// its four sources are.
pub fn global_contrast_factor(u: &Array2<f64>, mask: &Array2<bool>) -> f64 {
    let mut img = u.clone();
    let mut m = mask.clone();
    let mut gcf = 0.0;
    for level in 1..=GCF_LEVELS {
        let lum = img.mapv(|v| 100.0 * v.max(0.0).powf(2.2).sqrt());
        gcf += gcf_weight(level) * local_contrast(&lum, &m);
        let (h, w) = img.dim();
        if h < 4 || w < 4 {
            break;
        }
        let (h2, w2) = (h / 2, w / 2);
        img = Array2::from_shape_fn((h2, w2), |(i, j)| {
            (img[[2 * i, 2 * j]] + img[[2 * i + 1, 2 * j]] + img[[2 * i, 2 * j + 1]] + img[[2 * i + 1, 2 * j + 1]])
                / 4.0
        });
        m = Array2::from_shape_fn((h2, w2), |(i, j)| {
            [m[[2 * i, 2 * j]], m[[2 * i + 1, 2 * j]], m[[2 * i, 2 * j + 1]], m[[2 * i + 1, 2 * j + 1]]]
                .iter()
                .filter(|&&b| b)
                .count()
                >= 2
        });
    }
    gcf
}

/// Entropy focus criterion normalised by its maximum `sqrt(N) ln sqrt(N)`.
pub fn entropy_focus(u: &Array2<f64>) -> f64 {
    let n = u.len() as f64;
    let bmax = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bmax < EPS || n <= 1.0 {
        return 0.0;
    }
    let e: f64 = u
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / bmax;
            -p * p.ln()
        })
        .sum();
    e / (n.sqrt() * n.sqrt().ln())
}

fn integral_extremes(u: &Array2<f64>, mask: &Array2<bool>, along_rows: bool) -> (f64, f64) {
    let (h, w) = u.dim();
    let (lines, len) = if along_rows { (h, w) } else { (w, h) };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in 0..lines {
        let mut sum = 0.0;
        let mut any = false;
        for b in 0..len {
            let (i, j) = if along_rows { (a, b) } else { (b, a) };
            if mask[[i, j]] {
                sum += u[[i, j]];
                any = true;
            }
        }
        if any {
            let v = sum / len as f64;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 0.0)
    }
}

fn max_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        stats::min_max(xs).1
    }
}

fn range_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        let (lo, hi) = stats::min_max(xs);
        hi - lo
    }
}

/// The 26 features of a normalised slice, in [`XI_NAMES`] order.
pub fn engineered_features(slice: &Slice) -> [f64; 26] {
    let mask = compute_mask(slice);
    engineered_with_mask(slice, &mask)
}

pub fn engineered_with_mask(slice: &Slice, mask: &ForegroundMask) -> [f64; 26] {
    let u = slice.data.mapv(|v| (v + 1.0) / 2.0);
    let (h, w) = u.dim();
    let fg = mask.select(&u, true);
    let bg = mask.select(&u, false);
    let p = mask.fg_patch.values(&u);
    let q = mask.bg_patch.values(&u);
    let ps = patch_size(h, w);
    let centred = Patch {
        row: (h - ps) / 2,
        col: (w - ps) / 2,
        size: ps,
    }
    .values(&u);

    let (mean_f, std_f, var_f) = (stats::mean(&fg), stats::std_dev(&fg), stats::variance(&fg));
    let (mean_b, std_b) = (stats::mean(&bg), stats::std_dev(&bg));
    let (mean_p, std_p) = (stats::mean(&p), stats::std_dev(&p));
    let range_f = range_or_zero(&fg);

    let contrast = contrast_abs(&u);
    let cpp = stats::mean(&mask.select(&contrast, true));
    let psnr_ratio = safe_div(range_f, std_f);
    let psnr = if psnr_ratio > 0.0 { 20.0 * psnr_ratio.log10() } else { 0.0 };
    let sq = |xs: &[f64]| stats::mean(&xs.iter().map(|v| v * v).collect::<Vec<_>>());

    let lap = laplacian_abs(&u);
    let lap_fg = mask.select(&lap, true);
    let lap_bg = mask.select(&lap, false);
    let background = mask.background();
    let (row_min, row_max) = integral_extremes(&u, &mask.foreground, true);
    let (col_min, col_max) = integral_extremes(&u, &mask.foreground, false);

    [
        mean_f,
        range_f,
        var_f,
        safe_div(std_f, mean_f),
        cpp,
        psnr,
        safe_div(std_f, std_b),
        safe_div(mean_p, std_b),
        safe_div(std_p, stats::std_dev(&centred)),
        safe_div(mean_p, stats::mean(&q)),
        safe_div(mean_f - mean_b, std_b),
        safe_div(std_p, mean_p),
        safe_div(std_f + std_b, (mean_f - mean_b).abs()),
        entropy_focus(&u),
        if bg.is_empty() { 0.0 } else { safe_div(sq(&fg), sq(&bg)) },
        global_contrast_factor(&u, &background),
        global_contrast_factor(&u, &mask.foreground),
        max_or_zero(&lap_fg),
        stats::variance(&lap_fg),
        stats::mean(&lap_bg),
        stats::variance(&lap_bg),
        stats::histogram_entropy(&lap_bg, stats::ENTROPY_BINS),
        row_min,
        row_max,
        col_min,
        col_max,
    ]
}
