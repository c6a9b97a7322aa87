//! Centred, unitary 2-D Fourier transforms and k-space region sampling.
//!
//! `forward` scales by `1/sqrt(h*w)` and moves DC to `(h/2, w/2)`;
//! `inverse` undoes the shift and scaling and returns the magnitude image.
//! FFT plans are cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, direction == FftDirection::Forward))
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// Default radius of the low-frequency disc as a fraction of `s/2`.
pub const DEFAULT_LOW_RADIUS_FRACTION: f64 = 0.1;

/// A centred spectrum: DC sits at `(h/2, w/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpace {
    pub data: Array2<Complex64>,
}

impl KSpace {
    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn centre(&self) -> (usize, usize) {
        let (h, w) = self.dim();
        (h / 2, w / 2)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn magnitudes(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Complex image (no magnitude taken).
    pub fn inverse_complex(&self) -> Array2<Complex64> {
        let unshifted = shift(&self.data, false);
        fft2(unshifted, FftDirection::Inverse)
    }
}

fn fft_rows(data: &mut Array2<Complex64>, direction: FftDirection) {
    let w = data.ncols();
    let fft = plan(w, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let buf = data.as_slice_mut().expect("standard layout");
    for row in buf.chunks_exact_mut(w) {
        fft.process_with_scratch(row, &mut scratch);
    }
}

fn fft2(data: Array2<Complex64>, direction: FftDirection) -> Array2<Complex64> {
    let (h, w) = data.dim();
    let mut d = data.as_standard_layout().into_owned();
    fft_rows(&mut d, direction);
    let mut t = d.t().as_standard_layout().into_owned();
    fft_rows(&mut t, direction);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = t.t().as_standard_layout().into_owned();
    out.mapv_inplace(|c| c * scale);
    out
}

/// Quadrant swap. `forward = true` moves index 0 to `n/2` on each axis.
fn shift<T: Clone + Default>(data: &Array2<T>, forward: bool) -> Array2<T> {
    let (h, w) = data.dim();
    let (sh, sw) = (h / 2, w / 2);
    let mut out = Array2::default((h, w));
    for ((i, j), v) in data.indexed_iter() {
        let (ti, tj) = if forward {
            ((i + sh) % h, (j + sw) % w)
        } else {
            ((i + h - sh) % h, (j + w - sw) % w)
        };
        out[[ti, tj]] = v.clone();
    }
    out
}

/// Unitary 2-D DFT with DC moved to the centre.
pub fn forward(image: &Array2<f64>) -> KSpace {
    forward_complex(&image.mapv(|v| Complex64::new(v, 0.0)))
}

pub fn forward_complex(image: &Array2<Complex64>) -> KSpace {
    KSpace {
        data: shift(&fft2(image.clone(), FftDirection::Forward), true),
    }
}

/// Magnitude image of the inverse transform.
pub fn inverse(k: &KSpace) -> Array2<f64> {
    k.inverse_complex().mapv(|c| c.norm())
}

/// Radius of every k-space sample from the DC position.
pub fn radius_map(h: usize, w: usize) -> Array2<f64> {
    let (ch, cw) = (h / 2, w / 2);
    Array2::from_shape_fn((h, w), |(i, j)| {
        let dy = i as f64 - ch as f64;
        let dx = j as f64 - cw as f64;
        (dy * dy + dx * dx).sqrt()
    })
}

/// Magnitude samples from the four k-space areas.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceRegions {
    /// Centre disc, radius `<= f * s/2`.
    pub low: Vec<f64>,
    /// Periphery, radius `> (1 - f) * s/2`.
    pub high: Vec<f64>,
    /// Every sample.
    pub total: Vec<f64>,
    /// Magnitude sum over each unit annulus `[r, r + 1)`, `r = 0..s/2`.
    pub annuli: Vec<f64>,
}

impl KSpaceRegions {
    pub fn all(&self) -> [&[f64]; 4] {
        [&self.low, &self.high, &self.total, &self.annuli]
    }
}

/// `s` is taken as the shorter spectrum side.
pub fn regions(k: &KSpace, low_radius_fraction: f64) -> KSpaceRegions {
    let (h, w) = k.dim();
    let half = (h.min(w) / 2) as f64;
    let n_annuli = h.min(w) / 2;
    let low_r = low_radius_fraction * half;
    let high_r = (1.0 - low_radius_fraction) * half;
    let (ch, cw) = k.centre();
    let mut out = KSpaceRegions {
        low: Vec::new(),
        high: Vec::new(),
        total: Vec::with_capacity(h * w),
        annuli: vec![0.0; n_annuli],
    };
    for ((i, j), c) in k.data.indexed_iter() {
        let m = c.norm();
        let dy = i as f64 - ch as f64;
        let dx = j as f64 - cw as f64;
        let r = (dy * dy + dx * dx).sqrt();
        out.total.push(m);
        if r <= low_r {
            out.low.push(m);
        }
        if r > high_r {
            out.high.push(m);
        }
        let ring = r.floor() as usize;
        if ring < n_annuli {
            out.annuli[ring] += m;
        }
    }
    out
}

/// Elementwise product of a spectrum with a real filter.
pub fn apply_filter(k: &KSpace, filter: &Array2<f64>) -> KSpace {
    let mut data = k.data.clone();
    Zip::from(&mut data).and(filter).for_each(|c, &g| *c *= g);
    KSpace { data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(h: usize, w: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::SeedStream::new(seed);
        Array2::from_shape_fn((h, w), |_| rng.uniform())
    }

    /// Direct O(n^4) centred unitary DFT.
    fn naive_dft(x: &Array2<f64>) -> Array2<Complex64> {
        let (h, w) = x.dim();
        let mut out = Array2::from_elem((h, w), Complex64::default());
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::default();
                for ((i, j), &val) in x.indexed_iter() {
                    let phase = -2.0 * std::f64::consts::PI
                        * ((u * i) as f64 / h as f64 + (v * j) as f64 / w as f64);
                    acc += Complex64::from_polar(val, phase);
                }
                out[[(u + h / 2) % h, (v + w / 2) % w]] = acc / ((h * w) as f64).sqrt();
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft_and_parseval() {
        let x = test_image(16, 16, 3);
        let k = forward(&x);
        let naive = naive_dft(&x);
        for (a, b) in k.data.iter().zip(naive.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let energy_img: f64 = x.iter().map(|v| v * v).sum();
        let energy_naive: f64 = naive.iter().map(|c| c.norm_sqr()).sum();
        assert!((k.energy() - energy_img).abs() / energy_img < 1e-6);
        assert!((energy_naive - energy_img).abs() / energy_img < 1e-6);
    }

    #[test]
    fn constant_image_is_dc_only() {
        let k = forward(&Array2::from_elem((300, 300), 0.7));
        let (ch, cw) = k.centre();
        assert!((k.data[[ch, cw]].norm() - 0.7 * 300.0).abs() < 1e-9);
        let off: f64 = k
            .data
            .indexed_iter()
            .filter(|(p, _)| *p != (ch, cw))
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-9);
        let r = regions(&k, DEFAULT_LOW_RADIUS_FRACTION);
        assert!((r.annuli[0] - 210.0).abs() < 1e-9);
        assert!(r.annuli[1..].iter().all(|&a| a < 1e-8));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = Array2::zeros((20, 20));
        x[[0, 0]] = 1.0;
        let k = forward(&x);
        assert!(k.data.iter().all(|c| (c.norm() - 1.0 / 20.0).abs() < 1e-12));
    }

    #[test]
    fn real_input_gives_hermitian_spectrum() {
        for (h, w) in [(300, 300), (17, 12)] {
            let x = test_image(h, w, 9);
            let k = forward(&x);
            let (ch, cw) = k.centre();
            let scale = k.max_magnitude();
            for i in 0..h {
                for j in 0..w {
                    let di = i as isize - ch as isize;
                    let dj = j as isize - cw as isize;
                    let mi = ch as isize - di;
                    let mj = cw as isize - dj;
                    if mi < 0 || mj < 0 || mi >= h as isize || mj >= w as isize {
                        continue;
                    }
                    let a = k.data[[i, j]];
                    let b = k.data[[mi as usize, mj as usize]].conj();
                    assert!((a - b).norm() <= 1e-6 * scale);
                }
            }
        }
    }

    #[test]
    fn roundtrip_recovers_nonnegative_image() {
        for (h, w) in [(300, 300), (64, 48), (31, 33)] {
            let x = test_image(h, w, 5);
            let back = inverse(&forward(&x));
            let err = x.iter().zip(back.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{h}x{w}: {err}");
        }
        let zero = KSpace {
            data: Array2::from_elem((8, 8), Complex64::default()),
        };
        assert!(inverse(&zero).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn low_region_size_matches_disc_count() {
        let k = forward(&test_image(300, 300, 1));
        let r = regions(&k, 0.1);
        let mut disc = 0;
        for dy in -150i64..150 {
            for dx in -150i64..150 {
                if dy * dy + dx * dx <= 225 {
                    disc += 1;
                }
            }
        }
        assert_eq!(r.low.len(), disc);
        assert_eq!(r.total.len(), 90_000);
        assert_eq!(r.annuli.len(), 150);
        assert!(r.annuli.iter().all(|&a| a >= 0.0));
        // low and high are disjoint radius bands
        assert!(r.low.len() + r.high.len() < r.total.len());
    }

    #[test]
    fn concurrent_transforms_are_bit_identical() {
        let x = test_image(300, 300, 2);
        let reference = forward(&x);
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let x = x.clone();
                std::thread::spawn(move || forward(&x))
            })
            .collect();
        for h in handles {
            let k = h.join().unwrap();
            assert!(k.data.iter().zip(reference.data.iter()).all(|(a, b)| a == b));
        }
    }
}
