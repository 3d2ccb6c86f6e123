//! Loading a cohort onto per-patient common grids and scoring every
//! consecutive timepoint pair with every registered progression metric.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::change::{ChangeParams, RuleRegistry, Timepoint};
use crate::error::{Error, Result};
use crate::grid_ops::{common_grid, resample_flip, resample_mask, resample_score, RigidTransform};
use crate::metrics::{pair_metrics, timepoint_metrics, MetricRegistry, PairMetrics, TimepointMetrics};
use crate::nifti::{read_flip_map, read_mask, read_score_map};
use crate::volume::{FlipMap, Grid, LesionMask, ScoreMap};

use super::manifest::{CohortManifest, PatientEntry, TimepointEntry};
use super::roc::{confusion_at_zero, roc_auc, ConfusionTable, RocResult};

pub const DEFAULT_GRID_SPACING: f64 = 1.0;

/// A problem that excluded one timepoint or pair from evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseError {
    pub patient: String,
    pub timepoint: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadedTimepoint {
    pub id: String,
    pub progressive: Option<bool>,
    pub maps: Timepoint,
}

#[derive(Debug, Clone)]
pub struct LoadedPatient {
    pub id: String,
    pub grid: Option<Grid>,
    /// One slot per manifest timepoint; `None` where loading failed.
    pub timepoints: Vec<Option<LoadedTimepoint>>,
    pub entries: Vec<TimepointEntry>,
}

#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub patients: Vec<LoadedPatient>,
    pub errors: Vec<CaseError>,
}

struct NativeTimepoint {
    mask: LesionMask,
    flip: FlipMap,
    score: Option<ScoreMap>,
    transform: RigidTransform,
}

fn load_native(manifest: &CohortManifest, entry: &TimepointEntry) -> Result<NativeTimepoint> {
    let mask = read_mask(manifest.resolve(&entry.mask_path))?;
    let (flip, _) = read_flip_map(manifest.resolve(&entry.flip_path))?;
    let score = entry
        .score_path
        .as_ref()
        .map(|p| read_score_map(manifest.resolve(p)).map(|(s, _)| s))
        .transpose()?;
    let transform = match &entry.transform_path {
        Some(p) => RigidTransform::read(manifest.resolve(p))?,
        None => RigidTransform::identity(),
    };
    Ok(NativeTimepoint {
        mask,
        flip,
        score,
        transform,
    })
}

fn to_common(native: &NativeTimepoint, grid: &Grid) -> Result<Timepoint> {
    let t = &native.transform;
    Timepoint::new(
        resample_mask(&native.mask, grid, t)?,
        Some(resample_flip(&native.flip, grid, t)?),
        native
            .score
            .as_ref()
            .map(|s| resample_score(s, grid, t))
            .transpose()?,
    )
}

fn load_patient(
    manifest: &CohortManifest,
    patient: &PatientEntry,
    spacing: f64,
) -> (LoadedPatient, Vec<CaseError>) {
    let mut errors = Vec::new();
    let case_error = |tp: &TimepointEntry, e: &Error| CaseError {
        patient: patient.id.clone(),
        timepoint: tp.id.clone(),
        message: e.to_string(),
    };

    let natives: Vec<Option<NativeTimepoint>> = patient
        .timepoints
        .iter()
        .map(|tp| match load_native(manifest, tp) {
            Ok(n) => Some(n),
            Err(e) => {
                warn!("patient {} timepoint {}: {e}", patient.id, tp.id);
                errors.push(case_error(tp, &e));
                None
            }
        })
        .collect();

    let fields: Vec<(&Grid, &RigidTransform)> = natives
        .iter()
        .flatten()
        .map(|n| (n.mask.grid(), &n.transform))
        .collect();
    let grid = if fields.is_empty() {
        None
    } else {
        match common_grid(&fields, spacing) {
            Ok(g) => Some(g),
            Err(e) => {
                errors.push(CaseError {
                    patient: patient.id.clone(),
                    timepoint: String::new(),
                    message: e.to_string(),
                });
                None
            }
        }
    };

    let mut timepoints = Vec::with_capacity(natives.len());
    for (entry, native) in patient.timepoints.iter().zip(natives) {
        let loaded = match (&grid, native) {
            (Some(grid), Some(native)) => match to_common(&native, grid) {
                Ok(maps) => Some(LoadedTimepoint {
                    id: entry.id.clone(),
                    progressive: entry.progressive,
                    maps,
                }),
                Err(e) => {
                    errors.push(case_error(entry, &e));
                    None
                }
            },
            _ => None,
        };
        timepoints.push(loaded);
    }
    (
        LoadedPatient {
            id: patient.id.clone(),
            grid,
            timepoints,
            entries: patient.timepoints.clone(),
        },
        errors,
    )
}

/// Reads and resamples every timepoint. Unreadable inputs become
/// [`CaseError`]s instead of failing the whole cohort. Patients are
/// processed in parallel; output order follows the manifest.
pub fn load_cohort(manifest: &CohortManifest, grid_spacing: f64) -> Result<LoadedCohort> {
    manifest.validate()?;
    if !(grid_spacing.is_finite() && grid_spacing > 0.0) {
        return Err(Error::validation(format!("grid spacing {grid_spacing} must be positive")));
    }
    let loaded: Vec<(LoadedPatient, Vec<CaseError>)> = manifest
        .patients
        .par_iter()
        .map(|p| load_patient(manifest, p, grid_spacing))
        .collect();
    let mut patients = Vec::with_capacity(loaded.len());
    let mut errors = Vec::new();
    for (p, e) in loaded {
        patients.push(p);
        errors.extend(e);
    }
    Ok(LoadedCohort { patients, errors })
}

/// One consecutive timepoint pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub patient: String,
    pub from_timepoint: String,
    pub to_timepoint: String,
    pub progressive: bool,
    pub before: TimepointMetrics,
    pub after: TimepointMetrics,
    pub metrics: PairMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub name: String,
    pub label: String,
    /// `None` when the evaluated pairs contain only one class.
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_note: Option<String>,
    pub confusion: ConfusionTable,
    #[serde(skip)]
    pub roc: Option<RocResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortEvaluation {
    pub params: ChangeParams,
    pub rows: Vec<PairRow>,
    pub methods: Vec<MethodResult>,
    pub errors: Vec<CaseError>,
}

impl CohortEvaluation {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.progressive).collect()
    }
}

fn evaluate_patient(
    patient: &LoadedPatient,
    params: &ChangeParams,
) -> (Vec<PairRow>, Vec<CaseError>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let conn = params.connectivity;
    for k in 1..patient.timepoints.len() {
        let entry = &patient.entries[k];
        let (Some(a), Some(b)) = (&patient.timepoints[k - 1], &patient.timepoints[k]) else {
            if patient.timepoints[k].is_some() {
                errors.push(CaseError {
                    patient: patient.id.clone(),
                    timepoint: entry.id.clone(),
                    message: format!(
                        "previous timepoint '{}' could not be loaded",
                        patient.entries[k - 1].id
                    ),
                });
            }
            continue;
        };
        match pair_metrics(&a.maps, &b.maps, params) {
            Ok(metrics) => rows.push(PairRow {
                patient: patient.id.clone(),
                from_timepoint: a.id.clone(),
                to_timepoint: b.id.clone(),
                progressive: b.progressive.unwrap_or(false),
                before: timepoint_metrics(&a.maps.mask, conn),
                after: timepoint_metrics(&b.maps.mask, conn),
                metrics,
            }),
            Err(e) => errors.push(CaseError {
                patient: patient.id.clone(),
                timepoint: entry.id.clone(),
                message: e.to_string(),
            }),
        }
    }
    (rows, errors)
}

/// Scores every pair of an already loaded cohort under `params`.
pub fn evaluate_loaded(
    cohort: &LoadedCohort,
    params: &ChangeParams,
    metrics: &MetricRegistry,
) -> Result<CohortEvaluation> {
    params.validate(&RuleRegistry::builtin())?;
    let per_patient: Vec<(Vec<PairRow>, Vec<CaseError>)> = cohort
        .patients
        .par_iter()
        .map(|p| evaluate_patient(p, params))
        .collect();
    let mut rows = Vec::new();
    let mut errors = cohort.errors.clone();
    for (r, e) in per_patient {
        rows.extend(r);
        errors.extend(e);
    }

    let labels: Vec<bool> = rows.iter().map(|r| r.progressive).collect();
    let mut methods = Vec::with_capacity(metrics.len());
    for metric in metrics.iter() {
        let scores: Vec<f64> = rows.iter().map(|r| metric.score(&r.metrics)).collect();
        let confusion = confusion_at_zero(&scores, &labels)?;
        let (roc, auc_note) = match roc_auc(&scores, &labels) {
            Ok(roc) => (Some(roc), None),
            Err(e @ (Error::UndefinedAuc(_) | Error::Validation(_))) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        methods.push(MethodResult {
            name: metric.name().into(),
            label: metric.label().into(),
            auc: roc.as_ref().map(|r| r.auc),
            auc_note,
            confusion,
            roc,
        });
    }
    Ok(CohortEvaluation {
        params: params.clone(),
        rows,
        methods,
        errors,
    })
}

/// Loads `manifest` and evaluates it with the built-in metrics.
pub fn evaluate_cohort(
    manifest: &CohortManifest,
    params: &ChangeParams,
    grid_spacing: f64,
) -> Result<CohortEvaluation> {
    params.validate(&RuleRegistry::builtin())?;
    let cohort = load_cohort(manifest, grid_spacing)?;
    evaluate_loaded(&cohort, params, &MetricRegistry::builtin())
}
