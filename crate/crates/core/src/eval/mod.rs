//! Cohort evaluation: manifests, ROC analysis, sweeps and reports.

mod cohort;
mod manifest;
mod report;
mod roc;
mod sweep;

pub use cohort::{
    evaluate_cohort, evaluate_loaded, load_cohort, CaseError, CohortEvaluation, LoadedCohort,
    LoadedPatient, LoadedTimepoint, MethodResult, PairRow, DEFAULT_GRID_SPACING,
};
pub use manifest::{CohortManifest, PatientEntry, TimepointEntry, SCHEMA_VERSION};
pub use report::{results_csv, roc_csv, roc_svg, summary_json, write_evaluation, RESULTS_COLUMNS};
pub use roc::{confusion_at_zero, roc_auc, trapezoid_area, ConfusionTable, RocPoint, RocResult};
pub use sweep::{parse_sweep_spec, sweep, SweepAxis, SweepRow, SweepTable};
