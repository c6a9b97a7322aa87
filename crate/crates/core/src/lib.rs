//! Brain MRI quality control from physics-based artefact simulation.
//!
//! The crate is organised along the processing chain:
//!
//! - [`io`]: NIfTI-1 ingestion, synthetic head phantoms, slice extraction and exports.
//! - [`preprocess`]: outlier clipping, standardisation, Otsu cropping, range
//!   normalisation and resizing to fixed `s x s` slices.
//! - [`kspace`]: centred unitary 2-D Fourier transforms and k-space regions.
//! - [`generators`]: the nine artefact generators and volume-consistent corruption.
//! - [`calibration`]: minimum-severity search against a pluggable discriminator.
//! - [`features`]: engineered, k-space statistical and external feature partitions.
//! - [`selection`]: per-artefact search over feature-partition combinations.
//! - [`classifier`]: SMO-trained RBF SVMs, the per-class ensemble and metrics.
//! - [`pipeline`]: dataset construction, evaluation protocol and timing harness.

pub mod calibration;
pub mod classifier;
pub mod config;
pub mod features;
pub mod generators;
pub mod io;
pub mod kspace;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod selection;
pub mod stage;
pub mod stats;

pub use generators::{ArtefactClass, Severity};
pub use io::{RawSlice, Volume, View};
pub use preprocess::{Slice, SliceSet, Stage};
pub use rng::SeedStream;
