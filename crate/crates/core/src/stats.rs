//! Sample statistics shared by preprocessing and feature extraction.
//!
//! Zero-denominator rule: any ratio whose denominator magnitude is below
//! [`EPS`] evaluates to 0.

/// Denominators with magnitude below this are treated as zero.
pub const EPS: f64 = 1e-12;

/// Number of histogram bins used for entropy estimates.
pub const ENTROPY_BINS: usize = 64;

/// Number of histogram bins used by Otsu thresholding.
pub const OTSU_BINS: usize = 256;

pub fn safe_div(num: f64, den: f64) -> f64 {
    if den.abs() < EPS {
        0.0
    } else {
        num / den
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by n).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Percentile of already-sorted data, linear interpolation between order
/// statistics (`p` in `[0, 1]`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Same value as [`percentile_sorted`] on the sorted sample, found by
/// selection instead of a full sort.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut v = xs.to_vec();
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut a, rest) = v.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return a;
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    a + (b - a) * frac
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Shannon entropy (bits) of a histogram with `bins` equal-width bins over
/// the sample's `[min, max]`. Constant or empty samples have entropy 0.
pub fn histogram_entropy(xs: &[f64], bins: usize) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (lo, hi) = min_max(xs);
    let width = (hi - lo) / bins as f64;
    if width <= 0.0 {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = xs.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Otsu threshold over a 256-bin histogram spanning `[min, max]`.
///
/// The candidate thresholds are the upper edges of bins `0..255`; the
/// between-class variance is evaluated with bin-centre intensities and ties
/// resolve to the lowest threshold. Foreground is `value > threshold`. A
/// constant sample returns its value, leaving the foreground empty.
pub fn otsu_threshold(xs: &[f64]) -> f64 {
    let (lo, hi) = min_max(xs);
    if xs.is_empty() || hi <= lo {
        return if xs.is_empty() { 0.0 } else { lo };
    }
    let width = (hi - lo) / OTSU_BINS as f64;
    let mut counts = [0f64; OTSU_BINS];
    for &x in xs {
        let b = (((x - lo) / width) as usize).min(OTSU_BINS - 1);
        counts[b] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let centre = |i: usize| lo + (i as f64 + 0.5) * width;
    let sum_all: f64 = (0..OTSU_BINS).map(|i| counts[i] * centre(i)).sum();

    let mut best_t = 0;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..OTSU_BINS - 1 {
        w0 += counts[t];
        sum0 += counts[t] * centre(t);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if between > best_var {
            best_var = between;
            best_t = t;
        }
    }
    lo + (best_t as f64 + 1.0) * width
}

/// The nine summary statistics computed on every k-space sample distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub iqr: f64,
    pub entropy: f64,
    pub cv: f64,
    pub kstat2: f64,
    pub kstat2_var: f64,
}

impl SampleSummary {
    pub const NAMES: [&'static str; 9] = [
        "mean", "std", "skewness", "kurtosis", "iqr", "entropy", "cv", "kstat2", "kstat2_var",
    ];

    /// Moments are population (biased) central moments; skewness is Fisher's
    /// g1 and kurtosis the excess g2. `kstat2` is the unbiased variance and
    /// `kstat2_var` the unbiased estimate of its variance,
    /// `(2 n k2^2 + (n - 1) k4) / (n (n + 1))`.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::zeros();
        }
        let nf = n as f64;
        let m = mean(xs);
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - m;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let std = m2.sqrt();
        let skewness = safe_div(m3, m2.powf(1.5));
        let kurtosis = if m2 * m2 < EPS { 0.0 } else { m4 / (m2 * m2) - 3.0 };
        let iqr = quantile(xs, 0.75) - quantile(xs, 0.25);
        let kstat2 = if n > 1 { nf * m2 / (nf - 1.0) } else { 0.0 };
        let kstat4 = if n > 3 {
            nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2)
                / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0))
        } else {
            0.0
        };
        let kstat2_var = if n > 3 {
            (2.0 * nf * kstat2 * kstat2 + (nf - 1.0) * kstat4) / (nf * (nf + 1.0))
        } else {
            0.0
        };
        Self {
            mean: m,
            std,
            skewness,
            kurtosis,
            iqr,
            entropy: histogram_entropy(xs, ENTROPY_BINS),
            cv: safe_div(std, m.abs()),
            kstat2,
            kstat2_var,
        }
    }

    fn zeros() -> Self {
        Self {
            mean: 0.0,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
            iqr: 0.0,
            entropy: 0.0,
            cv: 0.0,
            kstat2: 0.0,
            kstat2_var: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.mean,
            self.std,
            self.skewness,
            self.kurtosis,
            self.iqr,
            self.entropy,
            self.cv,
            self.kstat2,
            self.kstat2_var,
        ]
    }
}
