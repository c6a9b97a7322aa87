//! Precomputed external (abstract) features supplied as CSV.

use std::collections::BTreeMap;
use std::path::Path;

use super::{FeatureError, FeatureVector};
use crate::io::View;
use crate::preprocess::SliceSet;

/// Key of one slice in an external feature manifest.
pub fn gamma_slice_id(source_id: &str, k: usize, view: View) -> String {
    format!("{source_id}:k{k}:{}", view.name())
}

/// External vectors keyed by slice id, all of one width.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GammaTable {
    pub width: usize,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl GammaTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, slice_id: &str) -> Option<FeatureVector> {
        self.rows.get(slice_id).map(|v| {
            FeatureVector::new(v.clone(), (0..v.len()).map(|g| format!("GAMMA:g{g}")).collect())
        })
    }

    /// Vectors for every slice of a scan in schema order, `None` when the
    /// table is empty.
    pub fn vectors_for(&self, source_id: &str, ss: &SliceSet) -> Result<Option<Vec<Vec<f64>>>, FeatureError> {
        if self.is_empty() {
            return Ok(None);
        }
        ss.labeled()
            .map(|(k, view, _)| {
                let id = gamma_slice_id(source_id, k, view);
                self.rows.get(&id).cloned().ok_or(FeatureError::MissingGamma(id))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Read `slice_id, g0, ..., g{n-1}`. A header-only file yields an empty table.
pub fn load_external_features(path: &Path) -> Result<GammaTable, FeatureError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("slice_id") {
        return Err(FeatureError::Malformed("first column must be slice_id".into()));
    }
    let width = header.len() - 1;
    let mut table = GammaTable {
        width,
        rows: BTreeMap::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(FeatureError::RaggedRows {
                line,
                expected: width,
                found: rec.len().saturating_sub(1),
            });
        }
        let mut values = Vec::with_capacity(width);
        for (j, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| FeatureError::NonNumeric {
                    line,
                    column: header[j].trim().to_string(),
                    value: field.to_string(),
                })?;
            values.push(v);
        }
        table.rows.insert(rec[0].trim().to_string(), values);
    }
    Ok(table)
}
