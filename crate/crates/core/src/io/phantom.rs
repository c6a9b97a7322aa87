//! Seeded 3-D Shepp-Logan style head phantoms.
//!
//! The phantom is a sum of soft-edged ellipsoids. Each seed jitters every
//! ellipsoid's semi-axes by up to 5% and its in-plane rotation by up to 3
//! degrees. `InvertedHead` keeps the geometry but reverses the tissue
//! plateau ordering, standing in for a scan of a different contrast.

use ndarray::Array3;
use thiserror::Error;

use super::{ContrastTag, Volume};
use crate::SeedStream;

pub const MIN_PHANTOM_EXTENT: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("phantom dimensions {0:?} below the minimum of {MIN_PHANTOM_EXTENT}")]
    DimsTooSmall([usize; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    Head,
    InvertedHead,
}

struct Ellipsoid {
    amplitude: f64,
    axes: [f64; 3],
    centre: [f64; 3],
    phi_deg: f64,
}

// Modified 3-D Shepp-Logan layout with T1-like plateau amplitudes:
// scalp 0.9, brain 0.55, ventricles 0.15, white-matter blob 0.75.
#[rustfmt::skip]
const LAYOUT: [(f64, [f64; 3], [f64; 3], f64); 10] = [
    ( 0.90, [0.690, 0.920, 0.810], [ 0.00,  0.000,  0.00],   0.0),
    (-0.35, [0.6624, 0.874, 0.780], [ 0.00, -0.0184, 0.00],   0.0),
    (-0.40, [0.110, 0.310, 0.220], [ 0.22,  0.000,  0.00], -18.0),
    (-0.40, [0.160, 0.410, 0.280], [-0.22,  0.000,  0.00],  18.0),
    ( 0.20, [0.210, 0.250, 0.410], [ 0.00,  0.350, -0.15],   0.0),
    ( 0.15, [0.046, 0.046, 0.050], [ 0.00,  0.100,  0.25],   0.0),
    ( 0.15, [0.046, 0.046, 0.050], [ 0.00, -0.100,  0.25],   0.0),
    ( 0.10, [0.046, 0.023, 0.050], [-0.08, -0.605,  0.00],   0.0),
    ( 0.10, [0.023, 0.023, 0.020], [ 0.00, -0.606,  0.00],   0.0),
    ( 0.10, [0.023, 0.046, 0.020], [ 0.06, -0.605,  0.00],   0.0),
];

/// Scalp amplitude used by the inverted phantom (dark rim, bright CSF).
const INVERTED_SCALP: f64 = 0.2;

/// Edge softness in normalised-radius units.
const EDGE_WIDTH: f64 = 0.015;

pub fn make_phantom_volume(
    seed: u64,
    dims: [usize; 3],
    kind: PhantomKind,
) -> Result<Volume, PhantomError> {
    if dims.iter().any(|&d| d < MIN_PHANTOM_EXTENT) {
        return Err(PhantomError::DimsTooSmall(dims));
    }
    let mut rng = SeedStream::new(seed);
    let ellipsoids: Vec<Ellipsoid> = LAYOUT
        .iter()
        .map(|&(amplitude, axes, centre, phi_deg)| Ellipsoid {
            amplitude,
            axes: axes.map(|a| a * rng.uniform_range(0.95, 1.05)),
            centre,
            phi_deg: phi_deg + rng.uniform_range(-3.0, 3.0),
        })
        .collect();

    let coord = |i: usize, n: usize| (i as f64 + 0.5) / n as f64 * 2.0 - 1.0;
    let mut data = Array3::<f64>::zeros((dims[0], dims[1], dims[2]));
    for (idx, e) in ellipsoids.iter().enumerate() {
        let amplitude = match (kind, idx) {
            (PhantomKind::Head, _) => e.amplitude,
            (PhantomKind::InvertedHead, 0) => INVERTED_SCALP,
            (PhantomKind::InvertedHead, _) => -e.amplitude,
        };
        let (sin, cos) = e.phi_deg.to_radians().sin_cos();
        let cutoff = 1.0 + 25.0 * EDGE_WIDTH;
        for ((i, j, k), v) in data.indexed_iter_mut() {
            let z = (coord(k, dims[2]) - e.centre[2]) / e.axes[2];
            if z.abs() > cutoff {
                continue;
            }
            let dx = coord(i, dims[0]) - e.centre[0];
            let dy = coord(j, dims[1]) - e.centre[1];
            let x = (cos * dx + sin * dy) / e.axes[0];
            let y = (-sin * dx + cos * dy) / e.axes[1];
            let r = (x * x + y * y + z * z).sqrt();
            if r > cutoff {
                continue;
            }
            *v += amplitude / (1.0 + ((r - 1.0) / EDGE_WIDTH).exp());
        }
    }
    let id = match kind {
        PhantomKind::Head => format!("phantom-head-{seed}"),
        PhantomKind::InvertedHead => format!("phantom-inverted-{seed}"),
    };
    let contrast = match kind {
        PhantomKind::Head => ContrastTag::T1,
        PhantomKind::InvertedHead => ContrastTag::Other,
    };
    Ok(Volume::new(data, [1.0; 3], id, contrast).expect("phantom satisfies volume invariants"))
}
