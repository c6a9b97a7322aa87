//! Per-artefact search over feature-partition combinations.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{predict, train_svm, ClassifierError, LabeledRows, SvmHyperparams};
use crate::features::{FeatureVector, Partition};
use crate::generators::ArtefactClass;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("partition {0} is not present in the feature schema")]
    UnknownPartition(Partition),
    #[error("invalid combination {0:?}")]
    BadMask(String),
    #[error("{split} split needs both labels")]
    DegenerateLabels { split: &'static str },
}

/// Non-empty subset of `{XI, PSI, GAMMA}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComboMask(u8);

impl ComboMask {
    pub const XI: ComboMask = ComboMask(0b001);
    pub const PSI: ComboMask = ComboMask(0b010);
    pub const GAMMA: ComboMask = ComboMask(0b100);
    pub const FULL: ComboMask = ComboMask(0b111);

    /// Candidate enumeration order, which also breaks final ties.
    pub const ENUMERATION: [ComboMask; 7] = [
        ComboMask(0b001),
        ComboMask(0b010),
        ComboMask(0b100),
        ComboMask(0b101),
        ComboMask(0b011),
        ComboMask(0b110),
        ComboMask(0b111),
    ];

    fn bit(p: Partition) -> u8 {
        match p {
            Partition::Xi => 0b001,
            Partition::Psi => 0b010,
            Partition::Gamma => 0b100,
        }
    }

    pub fn from_partitions(parts: &[Partition]) -> Option<Self> {
        let bits = parts.iter().fold(0, |acc, &p| acc | Self::bit(p));
        (bits != 0).then_some(ComboMask(bits))
    }

    pub fn contains(self, p: Partition) -> bool {
        self.0 & Self::bit(p) != 0
    }

    pub fn partitions(self) -> Vec<Partition> {
        Partition::ALL.into_iter().filter(|&p| self.contains(p)).collect()
    }

    /// The 7 combinations, or the 3 without `GAMMA`.
    pub fn candidates(gamma_available: bool) -> Vec<ComboMask> {
        Self::ENUMERATION
            .into_iter()
            .filter(|m| gamma_available || !m.contains(Partition::Gamma))
            .collect()
    }

    /// Every partition present in a schema.
    pub fn all_of(names: &[String]) -> Option<ComboMask> {
        let parts: Vec<Partition> = names.iter().filter_map(|n| Partition::of_name(n)).collect();
        Self::from_partitions(&parts)
    }

    fn order(self) -> usize {
        Self::ENUMERATION.iter().position(|&m| m == self).expect("valid mask")
    }
}

impl fmt::Display for ComboMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.partitions().iter().map(|p| p.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for ComboMask {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split('+')
            .map(|p| Partition::parse(p.trim()).ok_or_else(|| SelectionError::BadMask(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_partitions(&parts).ok_or_else(|| SelectionError::BadMask(s.to_string()))
    }
}

impl Serialize for ComboMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ComboMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Indices of the names whose partition is in the mask, in schema order.
pub fn projection_indices(names: &[String], mask: ComboMask) -> Result<Vec<usize>, SelectionError> {
    let present: Vec<Option<Partition>> = names.iter().map(|n| Partition::of_name(n)).collect();
    for p in mask.partitions() {
        if !present.contains(&Some(p)) {
            return Err(SelectionError::UnknownPartition(p));
        }
    }
    Ok(present
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some_and(|p| mask.contains(p)))
        .map(|(i, _)| i)
        .collect())
}

pub fn project(f: &FeatureVector, mask: ComboMask) -> Result<FeatureVector, SelectionError> {
    let idx = projection_indices(&f.names, mask)?;
    Ok(FeatureVector::new(
        idx.iter().map(|&i| f.values[i]).collect(),
        idx.iter().map(|&i| f.names[i].clone()).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComboScore {
    pub mask: ComboMask,
    pub width: usize,
    pub accuracy: f64,
    pub predictions: Vec<i8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRow {
    pub class: ArtefactClass,
    pub chosen: ComboMask,
    pub scores: Vec<ComboScore>,
}

impl SelectionRow {
    pub fn chosen_score(&self) -> &ComboScore {
        self.scores.iter().find(|s| s.mask == self.chosen).expect("chosen mask is scored")
    }
}

fn check_labels(d: &LabeledRows, split: &'static str) -> Result<(), SelectionError> {
    if d.labels.iter().any(|&l| l > 0) && d.labels.iter().any(|&l| l <= 0) {
        Ok(())
    } else {
        Err(SelectionError::DegenerateLabels { split })
    }
}

/// Train on every candidate projection, score plain accuracy on `val` and
/// keep the best; ties go to the narrower projection, then to enumeration
/// order.
pub fn select_combo(
    class: ArtefactClass,
    train: &LabeledRows,
    val: &LabeledRows,
    hp: &SvmHyperparams,
) -> Result<SelectionRow, ClassifierError> {
    check_labels(train, "train")?;
    check_labels(val, "validation")?;
    let gamma = train.names.iter().any(|n| Partition::of_name(n) == Some(Partition::Gamma));
    let mut scores = Vec::new();
    for mask in ComboMask::candidates(gamma) {
        let idx = projection_indices(&train.names, mask)?;
        let t = train.columns(&idx);
        let v = val.columns(&idx);
        let model = train_svm(&t.rows, &t.labels, hp)?;
        let predictions = v
            .rows
            .iter()
            .map(|r| predict(&model, r).map(|p| p.0))
            .collect::<Result<Vec<_>, _>>()?;
        let correct = predictions.iter().zip(&v.labels).filter(|(p, l)| p == l).count();
        scores.push(ComboScore {
            mask,
            width: idx.len(),
            accuracy: correct as f64 / v.len() as f64,
            predictions,
        });
    }
    let chosen = scores
        .iter()
        .min_by(|a, b| {
            b.accuracy
                .total_cmp(&a.accuracy)
                .then(a.width.cmp(&b.width))
                .then(a.mask.order().cmp(&b.mask.order()))
        })
        .expect("at least one candidate")
        .mask;
    Ok(SelectionRow { class, chosen, scores })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
}

impl SelectionReport {
    /// `class,mask,width,accuracy,chosen`, one line per candidate.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "class,mask,width,accuracy,chosen")?;
        for row in &self.rows {
            for s in &row.scores {
                writeln!(
                    f,
                    "{},{},{},{:?},{}",
                    row.class,
                    s.mask,
                    s.width,
                    s.accuracy,
                    u8::from(s.mask == row.chosen)
                )?;
            }
        }
        f.flush()
    }

    /// `(class, chosen mask)` pairs from a report written by [`Self::write_csv`].
    pub fn read_choices(path: &Path) -> Result<Vec<(ArtefactClass, ComboMask)>, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(format!("line {}: expected 5 columns", i + 1));
            }
            if cols[4].trim() == "1" {
                let class = ArtefactClass::parse(cols[0]).ok_or_else(|| format!("line {}: unknown class", i + 1))?;
                let mask = cols[1].parse().map_err(|e: SelectionError| e.to_string())?;
                out.push((class, mask));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::schema_names;
    use crate::io::View;
    use crate::SeedStream;

    fn names(gamma: usize) -> Vec<String> {
        schema_names(3, &View::ALL, gamma)
    }

    #[test]
    fn projection_widths() {
        let n = names(0);
        let f = FeatureVector::new(vec![0.0; n.len()], n.clone());
        assert_eq!(project(&f, ComboMask::from_str("XI+PSI").unwrap()).unwrap(), f);
        assert_eq!(project(&f, ComboMask::PSI).unwrap().width(), 324);
        assert_eq!(
            project(&f, ComboMask::GAMMA),
            Err(SelectionError::UnknownPartition(Partition::Gamma))
        );
        let g = names(64);
        let fg = FeatureVector::new((0..g.len()).map(|i| i as f64).collect(), g);
        let p = project(&fg, ComboMask::XI).unwrap();
        assert_eq!(p.width(), 234);
        assert!(p.values.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(project(&fg, ComboMask::FULL).unwrap(), fg);
    }

    #[test]
    fn mask_text_roundtrip_and_candidates() {
        for m in ComboMask::ENUMERATION {
            assert_eq!(m.to_string().parse::<ComboMask>().unwrap(), m);
        }
        assert_eq!(ComboMask::candidates(true).len(), 7);
        let without: Vec<String> = ComboMask::candidates(false).iter().map(|m| m.to_string()).collect();
        assert_eq!(without, ["XI", "PSI", "XI+PSI"]);
        assert!("".parse::<ComboMask>().is_err());
        assert!("XI+FOO".parse::<ComboMask>().is_err());
        let json = serde_json::to_string(&ComboMask::FULL).unwrap();
        assert_eq!(json, "\"XI+PSI+GAMMA\"");
    }

    /// Two XI columns of noise and two PSI columns, one of which sets the label.
    fn synthetic(n: usize, seed: u64) -> LabeledRows {
        let mut rng = SeedStream::new(seed);
        let names = vec![
            "XI:k0:axial:a".to_string(),
            "XI:k0:axial:b".to_string(),
            "PSI:k0:axial:c".to_string(),
            "PSI:k0:axial:d".to_string(),
        ];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label: i8 = if i % 2 == 0 { 1 } else { -1 };
            let c = label as f64 * (1.0 + rng.uniform());
            rows.push(vec![rng.normal(), rng.normal(), c, rng.normal()]);
            labels.push(label);
        }
        LabeledRows { names, rows, labels }
    }

    #[test]
    fn psi_signal_is_found() {
        let train = synthetic(60, 1);
        let val = synthetic(40, 2);
        let row = select_combo(ArtefactClass::Noise, &train, &val, &SvmHyperparams::default()).unwrap();
        assert!(row.chosen.contains(Partition::Psi));
        assert_eq!(row.chosen_score().accuracy, 1.0);
        assert_eq!(row.scores.len(), 3);
        // tie between PSI and XI+PSI resolves to the narrower mask
        assert_eq!(row.chosen, ComboMask::PSI);
    }

    #[test]
    fn resubstitution_on_separable_data() {
        let d = synthetic(40, 3);
        let row = select_combo(ArtefactClass::Band, &d, &d, &SvmHyperparams::default()).unwrap();
        assert_eq!(row.chosen_score().accuracy, 1.0);
    }

    #[test]
    fn reported_accuracy_matches_predictions() {
        let train = synthetic(50, 4);
        let val = synthetic(30, 5);
        let row = select_combo(ArtefactClass::Zipper, &train, &val, &SvmHyperparams::default()).unwrap();
        for s in &row.scores {
            let acc = s.predictions.iter().zip(&val.labels).filter(|(p, l)| p == l).count() as f64 / 30.0;
            assert_eq!(acc, s.accuracy);
        }
        let best = row.scores.iter().map(|s| s.accuracy).fold(0.0, f64::max);
        assert_eq!(row.chosen_score().accuracy, best);
        let again = select_combo(ArtefactClass::Zipper, &train, &val, &SvmHyperparams::default()).unwrap();
        assert_eq!(again, row);
    }

    #[test]
    fn single_label_is_degenerate() {
        let mut d = synthetic(10, 6);
        d.labels = vec![1; 10];
        assert!(matches!(
            select_combo(ArtefactClass::Gibbs, &d, &synthetic(10, 7), &SvmHyperparams::default()),
            Err(ClassifierError::Selection(SelectionError::DegenerateLabels { .. }))
        ));
    }

    #[test]
    fn report_csv_roundtrip() {
        let train = synthetic(30, 8);
        let row = select_combo(ArtefactClass::Noise, &train, &synthetic(20, 9), &SvmHyperparams::default()).unwrap();
        let report = SelectionReport { rows: vec![row.clone()] };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sel.csv");
        report.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(SelectionReport::read_choices(&p).unwrap(), vec![(ArtefactClass::Noise, row.chosen)]);
    }
}
