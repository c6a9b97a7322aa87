//! Volume ingestion, synthetic phantoms, slice extraction and exports.

mod export;
mod nifti;
mod phantom;

pub use export::{write_png_gray16, write_slice_png};
pub use nifti::{
    parse_nifti, parse_nifti_pair, read_nifti_file, write_nifti, write_nifti_file, NiftiDatatype,
    NiftiError,
};
pub use phantom::{make_phantom_volume, PhantomError, PhantomKind};

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest extent accepted along any volume axis or slice side.
pub const MIN_EXTENT: usize = 16;

/// Default 2.5D slice positions along each view axis.
pub const DEFAULT_POSITIONS: [f64; 3] = [1.0 / 3.0, 0.5, 2.0 / 3.0];

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("volume extent {0:?} below the minimum of {MIN_EXTENT} voxels")]
    TooSmall([usize; 3]),
    #[error("voxel spacing {0:?} must be strictly positive")]
    BadSpacing([f64; 3]),
    #[error("volume contains non-finite intensities")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContrastTag {
    T1,
    Other,
}

/// Slice orientation. Axial planes are taken at fixed third index, sagittal
/// at fixed first index and coronal at fixed second index; axes are used as
/// stored (no qform/sform reorientation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    Axial,
    Sagittal,
    Coronal,
}

impl View {
    pub const ALL: [View; 3] = [View::Axial, View::Sagittal, View::Coronal];

    /// Volume axis held fixed when cutting a plane of this view.
    pub fn normal_axis(self) -> usize {
        match self {
            View::Sagittal => 0,
            View::Coronal => 1,
            View::Axial => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Axial => "axial",
            View::Sagittal => "sagittal",
            View::Coronal => "coronal",
        }
    }

    pub fn parse(s: &str) -> Option<View> {
        View::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// A 3-D scan. Intensities are stored row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    data: Array3<f64>,
    spacing_mm: [f64; 3],
    source_id: String,
    contrast: ContrastTag,
}

impl Volume {
    pub fn new(
        data: Array3<f64>,
        spacing_mm: [f64; 3],
        source_id: impl Into<String>,
        contrast: ContrastTag,
    ) -> Result<Self, VolumeError> {
        let dims = data.dim();
        let dims = [dims.0, dims.1, dims.2];
        if dims.iter().any(|&d| d < MIN_EXTENT) {
            return Err(VolumeError::TooSmall(dims));
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::BadSpacing(spacing_mm));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite);
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
            spacing_mm,
            source_id: source_id.into(),
            contrast,
        })
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn dims(&self) -> [usize; 3] {
        let d = self.data.dim();
        [d.0, d.1, d.2]
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.spacing_mm
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn contrast(&self) -> ContrastTag {
        self.contrast
    }

    /// Same geometry and provenance with new intensities.
    pub fn with_data(&self, data: Array3<f64>) -> Result<Self, VolumeError> {
        Volume::new(data, self.spacing_mm, self.source_id.clone(), self.contrast)
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Plane index for a fractional position along `view`'s normal axis:
    /// `round(fraction * extent)`, clamped to the last plane.
    pub fn plane_index(&self, view: View, fraction: f64) -> usize {
        let extent = self.dims()[view.normal_axis()];
        ((fraction * extent as f64).round() as usize).min(extent - 1)
    }

    pub fn plane(&self, view: View, index: usize) -> Array2<f64> {
        self.data
            .index_axis(Axis(view.normal_axis()), index)
            .to_owned()
    }
}

/// A 2-D plane cut from a volume before preprocessing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSlice {
    pub data: Array2<f64>,
    pub view: View,
    pub position_fraction: f64,
}

/// Cut one plane per `(view, fraction)` pair, views-major then positions.
///
/// # Panics
///
/// If a fraction lies outside the open interval `(0, 1)`.
pub fn extract_raw_slices(volume: &Volume, positions: &[f64], views: &[View]) -> Vec<RawSlice> {
    for &f in positions {
        assert!(f > 0.0 && f < 1.0, "slice position {f} outside (0, 1)");
    }
    views
        .iter()
        .flat_map(|&view| {
            positions.iter().map(move |&fraction| RawSlice {
                data: volume.plane(view, volume.plane_index(view, fraction)),
                view,
                position_fraction: fraction,
            })
        })
        .collect()
}
