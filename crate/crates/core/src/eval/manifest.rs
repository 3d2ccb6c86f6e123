//! Cohort manifest: patients, their ordered timepoints and ground truth.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimepointEntry {
    pub id: String,
    pub mask_path: PathBuf,
    pub flip_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_path: Option<PathBuf>,
    /// Absent for the baseline, present for every later timepoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progressive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientEntry {
    pub id: String,
    pub timepoints: Vec<TimepointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortManifest {
    pub schema_version: u32,
    pub patients: Vec<PatientEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CohortManifest {
    pub fn new(patients: Vec<PatientEntry>) -> Self {
        CohortManifest {
            schema_version: SCHEMA_VERSION,
            patients,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut manifest: CohortManifest = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("manifest is not valid: {e}")))?;
        manifest.base_dir = base_dir.into();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.patients.is_empty() {
            return Err(Error::validation("manifest lists no patients"));
        }
        let mut seen = HashSet::new();
        for patient in &self.patients {
            if !seen.insert(patient.id.as_str()) {
                return Err(Error::validation(format!("duplicate patient id '{}'", patient.id)));
            }
            if patient.timepoints.len() < 2 {
                return Err(Error::validation(format!(
                    "patient '{}' has {} timepoint(s); at least 2 are needed",
                    patient.id,
                    patient.timepoints.len()
                )));
            }
            for (k, tp) in patient.timepoints.iter().enumerate() {
                match (k, tp.progressive) {
                    (0, Some(_)) => {
                        return Err(Error::validation(format!(
                            "patient '{}': baseline '{}' must not carry a progression label",
                            patient.id, tp.id
                        )))
                    }
                    (k, None) if k > 0 => {
                        return Err(Error::validation(format!(
                            "patient '{}': timepoint '{}' has no progression label",
                            patient.id, tp.id
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Number of labelled (post-baseline) timepoints.
    pub fn labelled_count(&self) -> usize {
        self.patients.iter().map(|p| p.timepoints.len() - 1).sum()
    }
}
