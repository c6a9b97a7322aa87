//! Summary statistics of k-space magnitudes over four regions.

use std::sync::OnceLock;

use crate::kspace::{self, DEFAULT_LOW_RADIUS_FRACTION};
use crate::preprocess::Slice;
use crate::stats::SampleSummary;

/// Centre disc, periphery, whole spectrum and annulus sums.
pub const REGION_NAMES: [&str; 4] = ["hl", "hh", "ht", "hc"];

/// `{region}_{statistic}` for the 36 k-space features.
pub fn psi_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        REGION_NAMES
            .iter()
            .flat_map(|r| SampleSummary::NAMES.iter().map(move |s| format!("{r}_{s}")))
            .collect()
    })
}

pub fn kspace_feature_values(slice: &Slice) -> [f64; 36] {
    let k = kspace::forward(&slice.data);
    let regions = kspace::regions(&k, DEFAULT_LOW_RADIUS_FRACTION);
    let mut out = [0.0; 36];
    for (r, sample) in regions.all().iter().enumerate() {
        out[r * 9..(r + 1) * 9].copy_from_slice(&SampleSummary::of(sample).to_array());
    }
    out
}
