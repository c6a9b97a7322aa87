//! Versioned JSON envelopes for the files passed between pipeline stages.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StageError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed stage file: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: expected a {expected} file, found {found}")]
    WrongKind {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: {kind} version mismatch: expected {expected}, found {found}")]
    Version {
        path: String,
        kind: String,
        expected: u32,
        found: u32,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    #[serde(default)]
    schema: Option<String>,
    payload: T,
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    version: u32,
}

pub fn write_stage<T: Serialize>(
    path: &Path,
    kind: &str,
    version: u32,
    schema: Option<&str>,
    payload: &T,
) -> Result<(), StageError> {
    let env = Envelope {
        kind: kind.to_string(),
        version,
        schema: schema.map(str::to_string),
        payload,
    };
    let text = serde_json::to_string_pretty(&env).map_err(|e| StageError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| StageError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Payload and schema fingerprint of a stage file of the given kind and
/// version.
pub fn read_stage<T: DeserializeOwned>(path: &Path, kind: &str, version: u32) -> Result<(T, Option<String>), StageError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| StageError::Io {
        path: p.clone(),
        message: e.to_string(),
    })?;
    let parse = |e: serde_json::Error| StageError::Parse {
        path: p.clone(),
        message: e.to_string(),
    };
    let header: Header = serde_json::from_str(&text).map_err(parse)?;
    if header.kind != kind {
        return Err(StageError::WrongKind {
            path: p,
            expected: kind.to_string(),
            found: header.kind,
        });
    }
    if header.version != version {
        return Err(StageError::Version {
            path: p,
            kind: kind.to_string(),
            expected: version,
            found: header.version,
        });
    }
    let env: Envelope<T> = serde_json::from_str(&text).map_err(parse)?;
    Ok((env.payload, env.schema))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        write_stage(&p, "model", 2, Some("abc"), &vec![1.5, 2.0]).unwrap();
        let (v, schema): (Vec<f64>, _) = read_stage(&p, "model", 2).unwrap();
        assert_eq!(v, vec![1.5, 2.0]);
        assert_eq!(schema.as_deref(), Some("abc"));
        assert!(matches!(
            read_stage::<Vec<f64>>(&p, "model", 3),
            Err(StageError::Version { expected: 3, found: 2, .. })
        ));
        assert!(matches!(
            read_stage::<Vec<f64>>(&p, "calibration", 2),
            Err(StageError::WrongKind { .. })
        ));
    }
}
