//! Feature partitions and their concatenation.
//!
//! A scan is described by `xi (+) psi (+) gamma` for every `(k, view)` slice
//! in schema order. Feature names have the form
//! `PARTITION:k{k}:{view}:{name}`, e.g. `PSI:k1:axial:hl_mean`; per-slice
//! vectors use the short form `PARTITION:{name}`.

mod engineered;
mod external;
mod mask;
mod spectral;


use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::View;
use crate::preprocess::{Slice, SliceSet};

pub use engineered::{
    engineered_with_mask, entropy_focus, global_contrast_factor, laplacian_abs, XI_NAMES,
};
pub use external::{gamma_slice_id, load_external_features, GammaTable};
pub use mask::{compute_mask, patch_size, ForegroundMask, Patch, PATCH_SIZE};
pub use spectral::{kspace_feature_values, psi_names, REGION_NAMES};

pub const XI_WIDTH: usize = 26;
pub const PSI_WIDTH: usize = 36;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("row {line}: expected {expected} values, found {found}")]
    RaggedRows {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("row {line}, column {column}: non-numeric value {value:?}")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("gamma width mismatch: expected {expected}, found {found}")]
    GammaWidthMismatch { expected: usize, found: usize },
    #[error("gamma vectors: expected {expected} slices, found {found}")]
    GammaCountMismatch { expected: usize, found: usize },
    #[error("no external features for slice {0}")]
    MissingGamma(String),
    #[error("malformed feature table: {0}")]
    Malformed(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for FeatureError {
    fn from(e: std::io::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

impl From<csv::Error> for FeatureError {
    fn from(e: csv::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Partition {
    #[serde(rename = "XI")]
    Xi,
    #[serde(rename = "PSI")]
    Psi,
    #[serde(rename = "GAMMA")]
    Gamma,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Xi, Partition::Psi, Partition::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Xi => "XI",
            Partition::Psi => "PSI",
            Partition::Gamma => "GAMMA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }

    /// Partition encoded in a feature name's prefix.
    pub fn of_name(name: &str) -> Option<Self> {
        Self::parse(name.split(':').next()?)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Values with a parallel list of names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl FeatureVector {
    /// # Panics
    ///
    /// If the lengths differ.
    pub fn new(values: Vec<f64>, names: Vec<String>) -> Self {
        assert_eq!(values.len(), names.len(), "values and names differ in length");
        Self { values, names }
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn partition(&self, i: usize) -> Option<Partition> {
        Partition::of_name(&self.names[i])
    }

    pub fn partitions(&self) -> BTreeSet<Partition> {
        self.names.iter().filter_map(|n| Partition::of_name(n)).collect()
    }

    pub fn fingerprint(&self) -> String {
        schema_fingerprint(&self.names)
    }

    fn extend_labeled(&mut self, other: &FeatureVector, k: usize, view: View) {
        for (v, n) in other.values.iter().zip(&other.names) {
            let (part, short) = n.split_once(':').unwrap_or(("", n));
            self.values.push(*v);
            self.names.push(format!("{part}:k{k}:{}:{short}", view.name()));
        }
    }
}

/// First 16 hex digits of the SHA-256 of the newline-joined names.
pub fn schema_fingerprint(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Schema of [`full_features`] for a slice layout, computed without data.
pub fn schema_names(k_count: usize, views: &[View], gamma_width: usize) -> Vec<String> {
    let mut names = Vec::new();
    for &view in views {
        for k in 0..k_count {
            let v = view.name();
            names.extend(XI_NAMES.iter().map(|n| format!("XI:k{k}:{v}:{n}")));
            names.extend(psi_names().iter().map(|n| format!("PSI:k{k}:{v}:{n}")));
            names.extend((0..gamma_width).map(|g| format!("GAMMA:k{k}:{v}:g{g}")));
        }
    }
    names
}

/// The 26 imaging-domain features of a normalised slice.
pub fn engineered_features(slice: &Slice) -> FeatureVector {
    let values = engineered::engineered_features(slice).to_vec();
    FeatureVector::new(values, XI_NAMES.iter().map(|n| format!("XI:{n}")).collect())
}

/// The 36 k-space statistics of a normalised slice.
pub fn kspace_features(slice: &Slice) -> FeatureVector {
    let values = kspace_feature_values(slice).to_vec();
    FeatureVector::new(values, psi_names().iter().map(|n| format!("PSI:{n}")).collect())
}

/// Concatenate `xi (+) psi (+) gamma` for every slice in schema order.
/// `gamma`, when given, holds one vector per slice in the same order.
pub fn full_features(ss: &SliceSet, gamma: Option<&[Vec<f64>]>) -> Result<FeatureVector, FeatureError> {
    let n = ss.slices().len();
    let gamma_width = match gamma {
        Some(g) => {
            if g.len() != n {
                return Err(FeatureError::GammaCountMismatch {
                    expected: n,
                    found: g.len(),
                });
            }
            let w = g.first().map_or(0, Vec::len);
            if let Some(bad) = g.iter().find(|r| r.len() != w) {
                return Err(FeatureError::GammaWidthMismatch {
                    expected: w,
                    found: bad.len(),
                });
            }
            w
        }
        None => 0,
    };
    let mut out = FeatureVector::new(
        Vec::with_capacity(n * (XI_WIDTH + PSI_WIDTH + gamma_width)),
        Vec::with_capacity(n * (XI_WIDTH + PSI_WIDTH + gamma_width)),
    );
    let labeled: Vec<_> = ss.labeled().collect();
    let per_slice: Vec<(FeatureVector, FeatureVector)> = labeled
        .par_iter()
        .map(|(_, _, slice)| (engineered_features(slice), kspace_features(slice)))
        .collect();
    for (i, ((k, view, _), (xi, psi))) in labeled.into_iter().zip(per_slice).enumerate() {
        out.extend_labeled(&xi, k, view);
        out.extend_labeled(&psi, k, view);
        if let Some(g) = gamma {
            let names = (0..gamma_width).map(|j| format!("GAMMA:g{j}")).collect();
            out.extend_labeled(&FeatureVector::new(g[i].clone(), names), k, view);
        }
    }
    Ok(out)
}

/// Feature rows of several scans sharing one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, f: &FeatureVector) -> Result<(), FeatureError> {
        if f.names != self.names {
            return Err(FeatureError::Malformed(format!(
                "schema {} does not match table schema {}",
                f.fingerprint(),
                self.fingerprint()
            )));
        }
        self.ids.push(id.into());
        self.rows.push(f.values.clone());
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        schema_fingerprint(&self.names)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector::new(self.rows[i].clone(), self.names.clone())
    }

    /// One row per scan: `volume_id` followed by one column per feature name.
    pub fn write_csv(&self, path: &Path) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["volume_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, FeatureError> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("volume_id") {
            return Err(FeatureError::Malformed("first column must be volume_id".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut table = Self::new(names);
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(FeatureError::RaggedRows {
                    line,
                    expected: header.len() - 1,
                    found: rec.len().saturating_sub(1),
                });
            }
            let mut row = Vec::with_capacity(rec.len() - 1);
            for (j, field) in rec.iter().enumerate().skip(1) {
                let v: f64 = field.trim().parse().map_err(|_| FeatureError::NonNumeric {
                    line,
                    column: header[j].to_string(),
                    value: field.to_string(),
                })?;
                row.push(v);
            }
            table.ids.push(rec[0].to_string());
            table.rows.push(row);
        }
        Ok(table)
    }
}
