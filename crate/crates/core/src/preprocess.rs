//! Five-step slice preprocessing: volume-wide outlier clipping, slice-wise
//! standardisation, Otsu auto-cropping, range normalisation to `[-1, 1]` and
//! bilinear resizing to a fixed `s x s` grid.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::io::{extract_raw_slices, RawSlice, View, Volume, DEFAULT_POSITIONS};
use crate::stats;

/// Default output side length.
pub const DEFAULT_SIZE: usize = 300;

/// Default fraction of intensity outliers removed (split over both tails).
pub const DEFAULT_CLIP_FRACTION: f64 = 0.05;

/// Pixels of margin kept around the Otsu foreground bounding box.
pub const CROP_PAD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Standardized,
    Normalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub data: Array2<f64>,
    pub view: View,
    pub position_fraction: f64,
    pub stage: Stage,
}

impl Slice {
    pub fn new(data: Array2<f64>, view: View, position_fraction: f64, stage: Stage) -> Self {
        Self {
            data,
            view,
            position_fraction,
            stage,
        }
    }

    /// A normalised axial slice at the volume centre; convenient for tests
    /// and tools working on bare images.
    pub fn normalized(data: Array2<f64>) -> Self {
        Self::new(data, View::Axial, 0.5, Stage::Normalized)
    }

    pub fn with_data(&self, data: Array2<f64>) -> Self {
        Self {
            data,
            view: self.view,
            position_fraction: self.position_fraction,
            stage: self.stage,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// The `K x V` preprocessed slices of one scan, ordered views-major then
/// positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSet {
    positions: Vec<f64>,
    views: Vec<View>,
    slices: Vec<Slice>,
}

impl SliceSet {
    /// # Panics
    ///
    /// If the slice count does not equal `positions.len() * views.len()` or a
    /// view repeats.
    pub fn new(positions: Vec<f64>, views: Vec<View>, slices: Vec<Slice>) -> Self {
        assert_eq!(slices.len(), positions.len() * views.len(), "slice count");
        let mut uniq = views.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), views.len(), "duplicate views");
        Self {
            positions,
            views,
            slices,
        }
    }

    pub fn k_count(&self) -> usize {
        self.positions.len()
    }

    pub fn v_count(&self) -> usize {
        self.views.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn get(&self, k: usize, view_index: usize) -> &Slice {
        &self.slices[view_index * self.positions.len() + k]
    }

    /// `(k, view, slice)` in schema order.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, View, &Slice)> {
        let k_count = self.positions.len();
        self.slices
            .iter()
            .enumerate()
            .map(move |(i, s)| (i % k_count, self.views[i / k_count], s))
    }

    pub fn into_slices(self) -> Vec<Slice> {
        self.slices
    }
}

/// Slice geometry and clipping settings. The 2D configuration uses only the
/// central axial slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub size: usize,
    pub positions: Vec<f64>,
    pub views: Vec<View>,
    pub clip_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_SIZE,
            positions: DEFAULT_POSITIONS.to_vec(),
            views: View::ALL.to_vec(),
            clip_fraction: DEFAULT_CLIP_FRACTION,
        }
    }
}

impl PreprocessConfig {
    pub fn two_d() -> Self {
        Self {
            positions: vec![0.5],
            views: vec![View::Axial],
            ..Self::default()
        }
    }
}

/// Clamp intensities to the `[fraction/2, 1 - fraction/2]` percentiles of
/// the whole volume.
///
/// # Panics
///
/// If `fraction` is outside `[0, 0.5)`.
pub fn clip_outliers(volume: &Volume, fraction: f64) -> Volume {
    assert!((0.0..0.5).contains(&fraction), "clip fraction {fraction}");
    if fraction == 0.0 {
        return volume.clone();
    }
    let sorted = stats::sorted_copy(volume.data().as_slice().expect("standard layout"));
    let lo = stats::percentile_sorted(&sorted, fraction / 2.0);
    let hi = stats::percentile_sorted(&sorted, 1.0 - fraction / 2.0);
    let clipped = volume.data().mapv(|v| v.clamp(lo, hi));
    volume.with_data(clipped).expect("clipping preserves invariants")
}

/// Zero mean, unit population standard deviation. Constant slices map to zeros.
pub fn standardize(raw: &RawSlice) -> Slice {
    let values = raw.data.as_standard_layout();
    let values = values.as_slice().expect("standard layout");
    let mean = stats::mean(values);
    let std = stats::std_dev(values);
    let data = if std > stats::EPS {
        raw.data.mapv(|v| (v - mean) / std)
    } else {
        Array2::zeros(raw.data.dim())
    };
    Slice::new(data, raw.view, raw.position_fraction, Stage::Standardized)
}

/// Inclusive bounding box `(row0, row1, col0, col1)` of `value > threshold`.
pub fn foreground_bbox(data: &Array2<f64>, threshold: f64) -> Option<(usize, usize, usize, usize)> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for ((r, c), &v) in data.indexed_iter() {
        if v > threshold {
            bbox = Some(match bbox {
                None => (r, r, c, c),
                Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
            });
        }
    }
    bbox
}

/// Crop to the Otsu foreground bounding box padded by [`CROP_PAD`] pixels.
/// An empty foreground leaves the slice unchanged.
pub fn otsu_crop(slice: &Slice) -> Slice {
    let values = slice.data.as_standard_layout();
    let threshold = stats::otsu_threshold(values.as_slice().expect("standard layout"));
    let (h, w) = slice.dim();
    match foreground_bbox(&slice.data, threshold) {
        None => slice.clone(),
        Some((r0, r1, c0, c1)) => {
            let r0 = r0.saturating_sub(CROP_PAD);
            let c0 = c0.saturating_sub(CROP_PAD);
            let r1 = (r1 + CROP_PAD).min(h - 1);
            let c1 = (c1 + CROP_PAD).min(w - 1);
            slice.with_data(slice.data.slice(s![r0..=r1, c0..=c1]).to_owned())
        }
    }
}

/// Affine map of `[min, max]` onto `[-1, 1]`; constant slices map to zeros.
pub fn normalize_range(slice: &Slice) -> Slice {
    let (lo, hi) = slice
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let data = if hi - lo > stats::EPS {
        slice.data.mapv(|v| 2.0 * (v - lo) / (hi - lo) - 1.0)
    } else {
        Array2::zeros(slice.dim())
    };
    Slice {
        stage: Stage::Normalized,
        ..slice.with_data(data)
    }
}

/// Corner-aligned bilinear resampling of a 2-D array to `rows x cols`.
pub fn resample_bilinear(data: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = data.dim();
    if (h, w) == (rows, cols) {
        return data.clone();
    }
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(h, rows), scale(w, cols));
    let col_taps: Vec<(usize, usize, f64)> = (0..cols)
        .map(|j| {
            let x = j as f64 * sx;
            let x0 = (x.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            (x0, x1, x - x0 as f64)
        })
        .collect();
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        let y = i as f64 * sy;
        let y0 = (y.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = y - y0 as f64;
        for (j, &(x0, x1, fx)) in col_taps.iter().enumerate() {
            let top = data[[y0, x0]] * (1.0 - fx) + data[[y0, x1]] * fx;
            let bottom = data[[y1, x0]] * (1.0 - fx) + data[[y1, x1]] * fx;
            out[[i, j]] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

/// Bilinear resize to `size x size`, re-clamped to `[-1, 1]`.
///
/// # Panics
///
/// If the input is smaller than 2x2.
pub fn resize(slice: &Slice, size: usize) -> Slice {
    let (h, w) = slice.dim();
    assert!(h >= 2 && w >= 2, "resize input {h}x{w} smaller than 2x2");
    let data = resample_bilinear(&slice.data, size, size).mapv(|v| v.clamp(-1.0, 1.0));
    Slice {
        stage: Stage::Normalized,
        ..slice.with_data(data)
    }
}

/// Per-slice steps ii-v applied to one raw plane.
pub fn preprocess_raw_slice(raw: &RawSlice, size: usize) -> Slice {
    resize(&normalize_range(&otsu_crop(&standardize(raw))), size)
}

/// The full chain: clip, extract `K x V` planes, then standardise, crop,
/// normalise and resize every plane.
pub fn preprocess_volume(volume: &Volume, config: &PreprocessConfig) -> SliceSet {
    let clipped = clip_outliers(volume, config.clip_fraction);
    let slices = extract_raw_slices(&clipped, &config.positions, &config.views)
        .iter()
        .map(|raw| preprocess_raw_slice(raw, config.size))
        .collect();
    SliceSet::new(config.positions.clone(), config.views.clone(), slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{make_phantom_volume, ContrastTag, PhantomKind};
    use ndarray::{array, Array3};
    use proptest::prelude::*;

    fn raw(data: Array2<f64>) -> RawSlice {
        RawSlice {
            data,
            view: View::Axial,
            position_fraction: 0.5,
        }
    }

    fn std_slice(data: Array2<f64>) -> Slice {
        Slice::new(data, View::Axial, 0.5, Stage::Standardized)
    }

    #[test]
    fn clip_zero_fraction_is_identity() {
        let v = make_phantom_volume(1, [64; 3], PhantomKind::Head).unwrap();
        assert_eq!(clip_outliers(&v, 0.0), v);
    }

    #[test]
    fn clip_uses_linear_interpolated_percentiles() {
        let ramp: Vec<f64> = (1..=1000).map(f64::from).collect();
        let sorted = stats::sorted_copy(&ramp);
        let lo = stats::percentile_sorted(&sorted, 0.025);
        let hi = stats::percentile_sorted(&sorted, 0.975);
        assert!((lo - 25.975).abs() < 1e-9 && (hi - 975.025).abs() < 1e-9);

        let vals: Vec<f64> = (0..16 * 16 * 16).map(|i| (i % 1000 + 1) as f64).collect();
        let v = Volume::new(
            Array3::from_shape_vec((16, 16, 16), vals.clone()).unwrap(),
            [1.0; 3],
            "ramp",
            ContrastTag::T1,
        )
        .unwrap();
        let sorted = stats::sorted_copy(&vals);
        let (lo, hi) = (
            stats::percentile_sorted(&sorted, 0.025),
            stats::percentile_sorted(&sorted, 0.975),
        );
        let c = clip_outliers(&v, 0.05);
        let (cmin, cmax) = stats::min_max(c.data().as_slice().unwrap());
        assert_eq!((cmin, cmax), (lo, hi));
    }

    #[test]
    fn clip_constant_volume_unchanged() {
        let v = Volume::new(Array3::from_elem((16, 16, 16), 4.0), [1.0; 3], "c", ContrastTag::T1)
            .unwrap();
        assert_eq!(clip_outliers(&v, 0.05), v);
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(&raw(array![[1.0, 3.0], [1.0, 3.0]]));
        assert_eq!(s.data, array![[-1.0, 1.0], [-1.0, 1.0]]);
        let c = standardize(&raw(Array2::from_elem((4, 4), 7.0)));
        assert!(c.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn otsu_crop_square_in_dark_field() {
        let mut d = Array2::from_elem((300, 300), -1.0);
        d.slice_mut(s![125..175, 125..175]).fill(1.0);
        let c = otsu_crop(&std_slice(d));
        assert_eq!(c.dim(), (54, 54));
        assert_eq!(c.data[[2, 2]], 1.0);
        assert_eq!(c.data[[1, 1]], -1.0);
    }

    #[test]
    fn otsu_crop_empty_foreground_unchanged() {
        let s = std_slice(Array2::zeros((20, 20)));
        assert_eq!(otsu_crop(&s), s);
    }

    #[test]
    fn normalize_examples() {
        let n = |d: Array2<f64>| normalize_range(&std_slice(d)).data;
        assert_eq!(n(array![[0.0, 10.0]]), array![[-1.0, 1.0]]);
        assert_eq!(n(array![[2.0, 2.0], [2.0, 2.0]]), Array2::<f64>::zeros((2, 2)));
        assert_eq!(n(array![[-5.0, 0.0, 5.0]]), array![[-1.0, 0.0, 1.0]]);
    }

    #[test]
    fn resize_examples() {
        let d = Array2::from_shape_fn((300, 300), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.5 - 1.0);
        assert_eq!(resize(&Slice::normalized(d.clone()), 300).data, d);
        let c = resize(&Slice::normalized(Array2::from_elem((40, 17), 0.3)), 300);
        assert!(c.data.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        // corner-aligned bilinear: centre weights are 1/4 each
        let checker = array![[-1.0, 1.0], [1.0, -1.0]];
        let r = resize(&Slice::normalized(checker), 3);
        assert_eq!(r.data[[1, 1]], 0.0);
        assert_eq!(r.data[[0, 1]], 0.0);
        assert_eq!(r.data[[0, 0]], -1.0);
    }

    #[test]
    fn preprocess_phantom_volume() {
        let v = make_phantom_volume(4, [64; 3], PhantomKind::Head).unwrap();
        let set = preprocess_volume(&v, &PreprocessConfig::default());
        assert_eq!(set.slices().len(), 9);
        for s in set.slices() {
            assert_eq!(s.dim(), (300, 300));
            assert!(s.data.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)));
            assert_eq!(s.stage, Stage::Normalized);
        }
        let two_d = preprocess_volume(&v, &PreprocessConfig::two_d());
        assert_eq!(two_d.slices().len(), 1);
        assert_eq!(preprocess_volume(&v, &PreprocessConfig::default()), set);
    }

    #[test]
    fn labeled_order_is_views_major() {
        let v = make_phantom_volume(4, [64; 3], PhantomKind::Head).unwrap();
        let set = preprocess_volume(&v, &PreprocessConfig::default());
        let labels: Vec<_> = set.labeled().map(|(k, v, _)| (k, v)).collect();
        assert_eq!(labels[0], (0, View::Axial));
        assert_eq!(labels[4], (1, View::Sagittal));
        assert_eq!(labels[8], (2, View::Coronal));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn clip_intervals_are_nested(vals in proptest::collection::vec(-100f64..100.0, 4096),
                                     f1 in 0.0f64..0.45, f2 in 0.0f64..0.45) {
            let (small, large) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let v = Volume::new(Array3::from_shape_vec((16, 16, 16), vals).unwrap(),
                                [1.0; 3], "p", ContrastTag::T1).unwrap();
            let a = clip_outliers(&v, small);
            let b = clip_outliers(&v, large);
            let (alo, ahi) = stats::min_max(a.data().as_slice().unwrap());
            let (blo, bhi) = stats::min_max(b.data().as_slice().unwrap());
            prop_assert!(blo >= alo && bhi <= ahi);
        }

        #[test]
        fn standardize_has_zero_mean_unit_std(vals in proptest::collection::vec(-50f64..50.0, 64)) {
            let s = standardize(&raw(Array2::from_shape_vec((8, 8), vals).unwrap()));
            let xs: Vec<f64> = s.data.iter().copied().collect();
            let sd = stats::std_dev(&xs);
            prop_assert!(stats::mean(&xs).abs() < 1e-9);
            prop_assert!(sd == 0.0 || (sd - 1.0).abs() < 1e-9);
        }

        #[test]
        fn otsu_scan_matches_brute_force(vals in proptest::collection::vec(-3f64..3.0, 50..400)) {
            let t = stats::otsu_threshold(&vals);
            prop_assert_eq!(t, brute_force_otsu(&vals));
        }
    }

    /// Independent oracle: evaluate the between-class variance from scratch
    /// at each of the 255 bin boundaries.
    fn brute_force_otsu(xs: &[f64]) -> f64 {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return lo;
        }
        let width = (hi - lo) / 256.0;
        let bin = |x: f64| (((x - lo) / width) as usize).min(255);
        let centre = |b: usize| lo + (b as f64 + 0.5) * width;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for t in 0..255 {
            let c0: Vec<f64> = xs.iter().filter(|&&x| bin(x) <= t).map(|&x| centre(bin(x))).collect();
            let c1: Vec<f64> = xs.iter().filter(|&&x| bin(x) > t).map(|&x| centre(bin(x))).collect();
            if c0.is_empty() || c1.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let m0 = c0.iter().sum::<f64>() / c0.len() as f64;
            let m1 = c1.iter().sum::<f64>() / c1.len() as f64;
            let v = (c0.len() as f64 / n) * (c1.len() as f64 / n) * (m0 - m1).powi(2);
            if v > best.0 * (1.0 + 1e-12) {
                best = (v, t);
            }
        }
        lo + (best.1 as f64 + 1.0) * width
    }

    #[test]
    fn bimodal_threshold_lies_between_modes() {
        let mut rng = crate::SeedStream::new(11);
        let xs: Vec<f64> = (0..4000)
            .map(|i| if i % 2 == 0 { -1.0 } else { 1.0 } + 0.1 * rng.normal())
            .collect();
        let t = stats::otsu_threshold(&xs);
        let top_low = xs.iter().copied().filter(|&x| x < 0.0).fold(f64::MIN, f64::max);
        let bottom_high = xs.iter().copied().filter(|&x| x > 0.0).fold(f64::MAX, f64::min);
        assert!(t >= top_low && t < bottom_high, "{t}");
        assert_eq!(t, brute_force_otsu(&xs));
    }
}
