use serde::{Deserialize, Serialize};

/// The nine artefact classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArtefactClass {
    Gibbs,
    Folding,
    Ghosting,
    Blurring,
    Band,
    Bias,
    Zipper,
    Noise,
    Mislabel,
}

impl ArtefactClass {
    pub const ALL: [ArtefactClass; 9] = [
        ArtefactClass::Gibbs,
        ArtefactClass::Folding,
        ArtefactClass::Ghosting,
        ArtefactClass::Blurring,
        ArtefactClass::Band,
        ArtefactClass::Bias,
        ArtefactClass::Zipper,
        ArtefactClass::Noise,
        ArtefactClass::Mislabel,
    ];

    /// Classes with a continuous severity axis (everything but mislabelling).
    pub const PARAMETRIC: [ArtefactClass; 8] = [
        ArtefactClass::Gibbs,
        ArtefactClass::Folding,
        ArtefactClass::Ghosting,
        ArtefactClass::Blurring,
        ArtefactClass::Band,
        ArtefactClass::Bias,
        ArtefactClass::Zipper,
        ArtefactClass::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtefactClass::Gibbs => "GIBBS",
            ArtefactClass::Folding => "FOLDING",
            ArtefactClass::Ghosting => "GHOSTING",
            ArtefactClass::Blurring => "BLURRING",
            ArtefactClass::Band => "BAND",
            ArtefactClass::Bias => "BIAS",
            ArtefactClass::Zipper => "ZIPPER",
            ArtefactClass::Noise => "NOISE",
            ArtefactClass::Mislabel => "MISLABEL",
        }
    }

    pub fn parse(s: &str) -> Option<ArtefactClass> {
        ArtefactClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn index(self) -> usize {
        ArtefactClass::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn has_severity(self) -> bool {
        self != ArtefactClass::Mislabel
    }

    /// Field names in component order.
    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            ArtefactClass::Gibbs => &["cut_freq", "cut_phase"],
            ArtefactClass::Folding => &["spacing"],
            ArtefactClass::Ghosting => &["rot_deg", "trans_px", "swap_fraction"],
            ArtefactClass::Blurring => &["filter_sigma"],
            ArtefactClass::Band => &["spike_amp", "max_center_dist", "n_points"],
            ArtefactClass::Bias => &["deg_x", "deg_y", "deg_xy"],
            ArtefactClass::Zipper => &["n_regions", "max_region_px"],
            ArtefactClass::Noise => &["sigma"],
            ArtefactClass::Mislabel => &["pool_index"],
        }
    }

    /// Whether component `i` is integer valued.
    pub fn integer_component(self, i: usize) -> bool {
        matches!(
            (self, i),
            (ArtefactClass::Gibbs, _)
                | (ArtefactClass::Folding, _)
                | (ArtefactClass::Band, 1 | 2)
                | (ArtefactClass::Zipper, _)
                | (ArtefactClass::Mislabel, _)
        )
    }

    /// Severity bounds used when no calibration file provides them, expressed
    /// at a reference slice side of 300 pixels.
    pub fn default_theta_max(self) -> Severity {
        match self {
            ArtefactClass::Gibbs => Severity::Gibbs {
                cut_freq: 120,
                cut_phase: 120,
            },
            ArtefactClass::Folding => Severity::Folding { spacing: 8 },
            ArtefactClass::Ghosting => Severity::Ghosting {
                rot_deg: 10.0,
                trans_px: 20.0,
                swap_fraction: 0.5,
            },
            ArtefactClass::Blurring => Severity::Blurring { filter_sigma: 6.0 },
            ArtefactClass::Band => Severity::Band {
                spike_amp: 0.5,
                max_center_dist: 60,
                n_points: 6,
            },
            ArtefactClass::Bias => Severity::Bias {
                deg_x: 0.8,
                deg_y: 0.8,
                deg_xy: 0.8,
            },
            ArtefactClass::Zipper => Severity::Zipper {
                n_regions: 8,
                max_region_px: 6,
            },
            ArtefactClass::Noise => Severity::Noise { sigma: 1.0 },
            ArtefactClass::Mislabel => Severity::Mislabel { pool_index: 0 },
        }
    }
}

impl std::fmt::Display for ArtefactClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-class severity parameters. Phase encoding runs along rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    /// Outermost k-space rows (`cut_freq`) and columns (`cut_phase`) zeroed on each side.
    Gibbs { cut_freq: usize, cut_phase: usize },
    /// Phase-encode lines skipped between kept lines.
    Folding { spacing: usize },
    /// Motion: rotation bound (degrees), translation bound (pixels) and the
    /// fraction of phase-encode rows taken from the moved acquisition.
    Ghosting {
        rot_deg: f64,
        trans_px: f64,
        swap_fraction: f64,
    },
    /// Image-domain Gaussian width in pixels.
    Blurring { filter_sigma: f64 },
    /// Spike amplitude as a multiple of max |K|, maximum spike radius in
    /// k-space samples and number of spike pairs.
    Band {
        spike_amp: f64,
        max_center_dist: usize,
        n_points: usize,
    },
    /// Coefficients of `1 + x u + y v + xy u v`.
    Bias { deg_x: f64, deg_y: f64, deg_xy: f64 },
    Zipper {
        n_regions: usize,
        max_region_px: usize,
    },
    /// Noise standard deviation relative to the std of |K|.
    Noise { sigma: f64 },
    Mislabel { pool_index: usize },
}

impl Severity {
    pub fn class(&self) -> ArtefactClass {
        match self {
            Severity::Gibbs { .. } => ArtefactClass::Gibbs,
            Severity::Folding { .. } => ArtefactClass::Folding,
            Severity::Ghosting { .. } => ArtefactClass::Ghosting,
            Severity::Blurring { .. } => ArtefactClass::Blurring,
            Severity::Band { .. } => ArtefactClass::Band,
            Severity::Bias { .. } => ArtefactClass::Bias,
            Severity::Zipper { .. } => ArtefactClass::Zipper,
            Severity::Noise { .. } => ArtefactClass::Noise,
            Severity::Mislabel { .. } => ArtefactClass::Mislabel,
        }
    }

    /// The identity severity; `None` for mislabelling.
    pub fn zero(class: ArtefactClass) -> Option<Severity> {
        class
            .has_severity()
            .then(|| Severity::from_components(class, &vec![0.0; class.component_names().len()]))
    }

    pub fn components(&self) -> Vec<f64> {
        match *self {
            Severity::Gibbs {
                cut_freq,
                cut_phase,
            } => vec![cut_freq as f64, cut_phase as f64],
            Severity::Folding { spacing } => vec![spacing as f64],
            Severity::Ghosting {
                rot_deg,
                trans_px,
                swap_fraction,
            } => vec![rot_deg, trans_px, swap_fraction],
            Severity::Blurring { filter_sigma } => vec![filter_sigma],
            Severity::Band {
                spike_amp,
                max_center_dist,
                n_points,
            } => vec![spike_amp, max_center_dist as f64, n_points as f64],
            Severity::Bias {
                deg_x,
                deg_y,
                deg_xy,
            } => vec![deg_x, deg_y, deg_xy],
            Severity::Zipper {
                n_regions,
                max_region_px,
            } => vec![n_regions as f64, max_region_px as f64],
            Severity::Noise { sigma } => vec![sigma],
            Severity::Mislabel { pool_index } => vec![pool_index as f64],
        }
    }

    /// Build from real components; integer fields round to nearest and
    /// negative integer values clamp to zero.
    ///
    /// # Panics
    ///
    /// If the component count does not match the class.
    pub fn from_components(class: ArtefactClass, c: &[f64]) -> Severity {
        assert_eq!(c.len(), class.component_names().len(), "component count");
        let int = |v: f64| v.round().max(0.0) as usize;
        match class {
            ArtefactClass::Gibbs => Severity::Gibbs {
                cut_freq: int(c[0]),
                cut_phase: int(c[1]),
            },
            ArtefactClass::Folding => Severity::Folding { spacing: int(c[0]) },
            ArtefactClass::Ghosting => Severity::Ghosting {
                rot_deg: c[0],
                trans_px: c[1],
                swap_fraction: c[2],
            },
            ArtefactClass::Blurring => Severity::Blurring {
                filter_sigma: c[0],
            },
            ArtefactClass::Band => Severity::Band {
                spike_amp: c[0],
                max_center_dist: int(c[1]),
                n_points: int(c[2]),
            },
            ArtefactClass::Bias => Severity::Bias {
                deg_x: c[0],
                deg_y: c[1],
                deg_xy: c[2],
            },
            ArtefactClass::Zipper => Severity::Zipper {
                n_regions: int(c[0]),
                max_region_px: int(c[1]),
            },
            ArtefactClass::Noise => Severity::Noise { sigma: c[0] },
            ArtefactClass::Mislabel => Severity::Mislabel {
                pool_index: int(c[0]),
            },
        }
    }

    /// Convert pixel-unit fields from a reference slice side `reference`
    /// to a `rows x cols` plane. Fields in k-space cycles, fractions, degrees
    /// and relative amplitudes are resolution independent and kept.
    pub fn rescaled_to(&self, reference: usize, rows: usize, cols: usize) -> Severity {
        let fy = rows as f64 / reference as f64;
        let fx = cols as f64 / reference as f64;
        let favg = (fx + fy) / 2.0;
        let px = |v: usize, f: f64| (v as f64 * f).round() as usize;
        match *self {
            Severity::Gibbs {
                cut_freq,
                cut_phase,
            } => Severity::Gibbs {
                cut_freq: px(cut_freq, fy),
                cut_phase: px(cut_phase, fx),
            },
            Severity::Ghosting {
                rot_deg,
                trans_px,
                swap_fraction,
            } => Severity::Ghosting {
                rot_deg,
                trans_px: trans_px * favg,
                swap_fraction,
            },
            Severity::Blurring { filter_sigma } => Severity::Blurring {
                filter_sigma: filter_sigma * favg,
            },
            Severity::Zipper {
                n_regions,
                max_region_px,
            } => Severity::Zipper {
                n_regions,
                max_region_px: px(max_region_px, favg).max(usize::from(max_region_px > 0)),
            },
            ref other => other.clone(),
        }
    }
}
