//! Generators acting directly on image intensities.

use ndarray::Array2;

use super::spectral::{from_unit, to_unit};
use super::GeneratorError;
use crate::preprocess::{normalize_range, Slice};
use crate::SeedStream;

/// Rotate by `angle_deg` about the image centre, then translate by
/// `(ty, tx)` pixels. Bilinear sampling; samples outside the grid read 0.
pub fn affine_bilinear(image: &Array2<f64>, angle_deg: f64, ty: f64, tx: f64) -> Array2<f64> {
    let (h, w) = image.dim();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let get = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
            0.0
        } else {
            image[[i as usize, j as usize]]
        }
    };
    Array2::from_shape_fn((h, w), |(i, j)| {
        let py = i as f64 - cy - ty;
        let px = j as f64 - cx - tx;
        // inverse rotation maps the output pixel back into the source
        let sy = cos * py - sin * px + cy;
        let sx = sin * py + cos * px + cx;
        let y0 = sy.floor();
        let x0 = sx.floor();
        let fy = sy - y0;
        let fx = sx - x0;
        let (y0, x0) = (y0 as isize, x0 as isize);
        let top = get(y0, x0) * (1.0 - fx) + get(y0, x0 + 1) * fx;
        let bottom = get(y0 + 1, x0) * (1.0 - fx) + get(y0 + 1, x0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// `B(u, v) = 1 + deg_x u + deg_y v + deg_xy u v` with `u` running from -1
/// (first column) to 1 (last column) and `v` likewise over rows.
pub fn bias_field(h: usize, w: usize, deg_x: f64, deg_y: f64, deg_xy: f64) -> Array2<f64> {
    let coord = |i: usize, n: usize| {
        if n > 1 {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    Array2::from_shape_fn((h, w), |(i, j)| {
        let u = coord(j, w);
        let v = coord(i, h);
        1.0 + deg_x * u + deg_y * v + deg_xy * u * v
    })
}

/// Multiply the magnitude image by the bias field, then rescale to `[-1, 1]`.
pub fn bias(slice: &Slice, deg_x: f64, deg_y: f64, deg_xy: f64) -> Result<Slice, GeneratorError> {
    for (field, v) in [("deg_x", deg_x), ("deg_y", deg_y), ("deg_xy", deg_xy)] {
        if !v.is_finite() {
            return Err(GeneratorError::SeverityOutOfRange {
                field,
                value: v,
                bound: "finite".into(),
            });
        }
    }
    if deg_x == 0.0 && deg_y == 0.0 && deg_xy == 0.0 {
        return Ok(slice.clone());
    }
    let (h, w) = slice.dim();
    let biased = to_unit(&slice.data) * bias_field(h, w, deg_x, deg_y, deg_xy);
    Ok(normalize_range(&slice.with_data(from_unit(&biased))))
}

/// One zipper band: rows (or columns) `start..start + width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZipperRegion {
    pub along_rows: bool,
    pub start: usize,
    pub width: usize,
}

/// Draw `n_regions` bands: orientation, start index and a width in
/// `1..=max(1, max_region_px)`, in that order per region.
pub fn zipper_regions(
    h: usize,
    w: usize,
    n_regions: usize,
    max_region_px: usize,
    mut rng: SeedStream,
) -> Vec<ZipperRegion> {
    let max_px = max_region_px.max(1);
    (0..n_regions)
        .map(|_| {
            let along_rows = rng.uniform() < 0.5;
            let extent = if along_rows { h } else { w };
            let start = ((rng.uniform() * extent as f64) as usize).min(extent - 1);
            let width = (1 + (rng.uniform() * max_px as f64) as usize).min(max_px);
            ZipperRegion {
                along_rows,
                start,
                width,
            }
        })
        .collect()
}

/// Overwrite each band with pixels alternating -1, +1 along the line direction.
pub fn zipper(
    slice: &Slice,
    n_regions: usize,
    max_region_px: usize,
    rng: SeedStream,
) -> Result<Slice, GeneratorError> {
    if n_regions == 0 {
        return Ok(slice.clone());
    }
    let (h, w) = slice.dim();
    let mut data = slice.data.clone();
    let alternate = |p: usize| if p.is_multiple_of(2) { -1.0 } else { 1.0 };
    for region in zipper_regions(h, w, n_regions, max_region_px, rng) {
        if region.along_rows {
            for r in region.start..(region.start + region.width).min(h) {
                for c in 0..w {
                    data[[r, c]] = alternate(c);
                }
            }
        } else {
            for c in region.start..(region.start + region.width).min(w) {
                for r in 0..h {
                    data[[r, c]] = alternate(r);
                }
            }
        }
    }
    Ok(slice.with_data(data))
}

/// Substitute a slice from a differently-labelled pool.
pub fn mislabel(pool: &[Slice], pool_index: usize) -> Result<Slice, GeneratorError> {
    if pool.is_empty() {
        return Err(GeneratorError::EmptyPool);
    }
    pool.get(pool_index)
        .cloned()
        .ok_or(GeneratorError::PoolIndexOutOfRange {
            index: pool_index,
            len: pool.len(),
        })
}
