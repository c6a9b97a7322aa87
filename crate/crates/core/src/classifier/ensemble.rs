use serde::{Deserialize, Serialize};

use super::{predict, ClassifierError, SvmModel};
use crate::features::{schema_fingerprint, FeatureVector};
use crate::generators::ArtefactClass;
use crate::selection::{projection_indices, ComboMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberModel {
    pub class: ArtefactClass,
    pub mask: ComboMask,
    pub model: SvmModel,
}

/// One classifier per artefact class over a shared feature schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub schema: String,
    pub names: Vec<String>,
    pub members: Vec<MemberModel>,
}

impl EnsembleModel {
    pub fn new(names: Vec<String>, members: Vec<MemberModel>) -> Self {
        Self {
            schema: schema_fingerprint(&names),
            names,
            members,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleVerdict {
    /// `(class, label, margin)` per member.
    pub per_class: Vec<(ArtefactClass, i8, f64)>,
    /// True when any member fires.
    pub artefact: bool,
    pub fired: Vec<ArtefactClass>,
}

/// Apply every member to its projection of `f`; the scan is flagged when
/// any member predicts `+1`.
pub fn ensemble_predict(e: &EnsembleModel, f: &FeatureVector) -> Result<EnsembleVerdict, ClassifierError> {
    let found = f.fingerprint();
    if found != e.schema {
        return Err(ClassifierError::SchemaMismatch {
            expected: e.schema.clone(),
            found,
        });
    }
    let mut per_class = Vec::with_capacity(e.members.len());
    let mut fired = Vec::new();
    for m in &e.members {
        let idx = projection_indices(&e.names, m.mask)?;
        let row: Vec<f64> = idx.iter().map(|&i| f.values[i]).collect();
        let (label, margin) = predict(&m.model, &row)?;
        if label > 0 {
            fired.push(m.class);
        }
        per_class.push((m.class, label, margin));
    }
    Ok(EnsembleVerdict {
        per_class,
        artefact: !fired.is_empty(),
        fired,
    })
}
