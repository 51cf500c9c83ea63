//! Embedding bundle interchange format: a versioned JSON document carrying
//! row ids, embeddings, and (optionally) the survival labels, so downstream
//! analysis never needs the raw feature rows. Bundles from any external
//! encoder can be imported as long as they satisfy the same schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("inconsistent row count: {field} has {got}, expected {expected}")]
    InconsistentRowCount {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("bad label: {0}")]
    BadLabel(String),
}

/// Versioned embedding container. `times`/`events` are present when the
/// producing stage carried survival labels along (the analysis stages rely
/// on that rather than re-reading raw rows).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingBundle {
    pub version: u32,
    pub d: usize,
    pub n: usize,
    pub ids: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<u8>>,
    pub source: String,
}

impl EmbeddingBundle {
    pub fn validate(&self) -> Result<(), BundleError> {
        if self.version != BUNDLE_VERSION {
            return Err(BundleError::UnsupportedVersion(self.version));
        }
        if self.ids.len() != self.n {
            return Err(BundleError::InconsistentRowCount {
                field: "ids",
                got: self.ids.len(),
                expected: self.n,
            });
        }
        if self.embeddings.len() != self.n {
            return Err(BundleError::InconsistentRowCount {
                field: "embeddings",
                got: self.embeddings.len(),
                expected: self.n,
            });
        }
        for (i, row) in self.embeddings.iter().enumerate() {
            if row.len() != self.d {
                return Err(BundleError::Malformed(format!(
                    "embedding row {i} has length {}, expected {}",
                    row.len(),
                    self.d
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(BundleError::Malformed(format!(
                    "non-finite embedding value at row {i}, column {j}"
                )));
            }
        }
        if let Some(times) = &self.times {
            if times.len() != self.n {
                return Err(BundleError::InconsistentRowCount {
                    field: "times",
                    got: times.len(),
                    expected: self.n,
                });
            }
            for (i, t) in times.iter().enumerate() {
                if !t.is_finite() || *t < 0.0 {
                    return Err(BundleError::BadLabel(format!("time {t} at row {i}")));
                }
            }
        }
        if let Some(events) = &self.events {
            if events.len() != self.n {
                return Err(BundleError::InconsistentRowCount {
                    field: "events",
                    got: events.len(),
                    expected: self.n,
                });
            }
            if let Some(i) = events.iter().position(|e| *e > 1) {
                return Err(BundleError::BadLabel(format!(
                    "event flag {} at row {i}",
                    events[i]
                )));
            }
        }
        if self.times.is_some() != self.events.is_some() {
            return Err(BundleError::Malformed(
                "times and events must be present together".into(),
            ));
        }
        Ok(())
    }

    /// Borrowed label pair, present only when both labels were carried.
    pub fn labels(&self) -> Option<(&[f64], &[u8])> {
        match (&self.times, &self.events) {
            (Some(t), Some(e)) => Some((t, e)),
            _ => None,
        }
    }
}

pub fn export_bundle(bundle: &EmbeddingBundle, path: &Path) -> Result<(), BundleError> {
    bundle.validate()?;
    let json = serde_json::to_string_pretty(bundle)
        .map_err(|e| BundleError::Malformed(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|source| BundleError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn import_bundle(path: &Path) -> Result<EmbeddingBundle, BundleError> {
    let raw = std::fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bundle: EmbeddingBundle =
        serde_json::from_str(&raw).map_err(|e| BundleError::Malformed(e.to_string()))?;
    bundle.validate()?;
    Ok(bundle)
}
