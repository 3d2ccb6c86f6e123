//! Confident change detection for longitudinal lesion segmentations.
//!
//! Two timepoints are resampled onto a common grid, each voxel is labelled
//! lesion / non-lesion / uncertain by a pluggable change rule, and voxels that
//! flip confidently between timepoints form the new- and missing-lesion maps.
//! Cohort evaluation turns the resulting volumes into ROC curves against
//! ground-truth progression labels.

pub mod change;
pub mod error;
pub mod eval;
pub mod grid_ops;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod phantom;
pub mod serde_inf;
pub mod volume;

pub use change::{
    change_maps, change_maps_for, summarize_change, ChangeMaps, ChangeParams, ChangeRule,
    ChangeSummary, ConfidenceLabel, RuleRegistry, Timepoint,
};
pub use error::{Error, Result};
pub use grid_ops::{resample, Interpolation, RigidTransform};
pub use metrics::{pair_metrics, MetricRegistry, PairMetrics, ProgressionMetric};
pub use morphology::{label_components, Connectivity};
pub use volume::{FlipMap, Grid, LesionMask, ScoreMap, TargetGrid, Volume};
