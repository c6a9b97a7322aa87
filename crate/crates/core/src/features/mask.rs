//! Foreground/background split and the reference patches used by the
//! engineered features.

use ndarray::{s, Array2, ArrayView2};

use crate::preprocess::Slice;
use crate::stats;

/// Nominal side of the foreground and background patches.
pub const PATCH_SIZE: usize = 20;

/// Square patch anchored at its top-left pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

impl Patch {
    pub fn view<'a>(&self, data: &'a Array2<f64>) -> ArrayView2<'a, f64> {
        data.slice(s![self.row..self.row + self.size, self.col..self.col + self.size])
    }

    pub fn values(&self, data: &Array2<f64>) -> Vec<f64> {
        self.view(data).iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundMask {
    pub foreground: Array2<bool>,
    /// Set when Otsu found no foreground and the whole slice was used instead.
    pub fallback: bool,
    pub fg_patch: Patch,
    pub bg_patch: Patch,
}

impl ForegroundMask {
    pub fn background(&self) -> Array2<bool> {
        self.foreground.mapv(|f| !f)
    }

    pub fn fg_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    /// Values of `data` under the mask (`foreground = true`) or its complement.
    pub fn select(&self, data: &Array2<f64>, foreground: bool) -> Vec<f64> {
        data.iter()
            .zip(self.foreground.iter())
            .filter(|(_, &f)| f == foreground)
            .map(|(&v, _)| v)
            .collect()
    }
}

/// Patch side for an `h x w` slice: `min(20, h/2, w/2)`, at least 1.
pub fn patch_size(h: usize, w: usize) -> usize {
    PATCH_SIZE.min(h / 2).min(w / 2).max(1)
}

/// Otsu foreground (`value > threshold`), a patch centred on the foreground
/// centroid and the darkest of the four corner patches (ties keep the first
/// of top-left, top-right, bottom-left, bottom-right).
pub fn compute_mask(slice: &Slice) -> ForegroundMask {
    let data = &slice.data;
    let (h, w) = data.dim();
    let values: Vec<f64> = data.iter().copied().collect();
    let t = stats::otsu_threshold(&values);
    let mut foreground = data.mapv(|v| v > t);
    let mut fallback = false;
    if !foreground.iter().any(|&f| f) {
        foreground.fill(true);
        fallback = true;
    }

    let p = patch_size(h, w);
    let (mut sr, mut sc, mut n) = (0.0, 0.0, 0.0);
    for ((i, j), &f) in foreground.indexed_iter() {
        if f {
            sr += i as f64;
            sc += j as f64;
            n += 1.0;
        }
    }
    let anchor = |centre: f64, extent: usize| {
        let start = (centre + 0.5).floor() as isize - (p / 2) as isize;
        start.clamp(0, (extent - p) as isize) as usize
    };
    let fg_patch = Patch {
        row: anchor(sr / n, h),
        col: anchor(sc / n, w),
        size: p,
    };

    let corners = [(0, 0), (0, w - p), (h - p, 0), (h - p, w - p)];
    let mut bg_patch = Patch {
        row: 0,
        col: 0,
        size: p,
    };
    let mut best = f64::INFINITY;
    for (row, col) in corners {
        let patch = Patch { row, col, size: p };
        let m = stats::mean(&patch.values(data));
        if m < best {
            best = m;
            bg_patch = patch;
        }
    }

    ForegroundMask {
        foreground,
        fallback,
        fg_patch,
        bg_patch,
    }
}
