//! Per-timepoint lesion load and the progression metrics of a timepoint pair.

use serde::{Deserialize, Serialize};

use crate::change::{change_maps, ChangeParams, FlipConfidence, Naive, ScoreMargin, Timepoint};
use crate::error::{Error, Result};
use crate::morphology::{lesion_count, Connectivity};
use crate::volume::LesionMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimepointMetrics {
    pub lesion_volume_mm3: f64,
    pub lesion_count: usize,
}

/// Lesion load of an unfiltered mask.
pub fn timepoint_metrics(mask: &LesionMask, connectivity: Connectivity) -> TimepointMetrics {
    TimepointMetrics {
        lesion_volume_mm3: mask.volume_mm3(),
        lesion_count: lesion_count(mask, connectivity),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    /// `V_B - V_A`, mm³.
    pub abs_volume_change: f64,
    /// `(V_B - V_A) / V_A`; `+inf` when `V_A = 0 < V_B`, 0 when both are 0.
    #[serde(with = "crate::serde_inf")]
    pub rel_volume_change: f64,
    pub count_change: i64,
    pub naive_new_volume: f64,
    pub confident_new_volume: f64,
    pub margin_new_volume: f64,
}

impl PairMetrics {
    pub const ZERO: PairMetrics = PairMetrics {
        abs_volume_change: 0.0,
        rel_volume_change: 0.0,
        count_change: 0,
        naive_new_volume: 0.0,
        confident_new_volume: 0.0,
        margin_new_volume: 0.0,
    };
}

pub fn relative_change(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        if after > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (after - before) / before
    }
}

/// All six metrics for `a → b`. New-lesion volumes are measured after the
/// `min_voxels` size filter; lesion counts use the unfiltered masks.
pub fn pair_metrics(a: &Timepoint, b: &Timepoint, params: &ChangeParams) -> Result<PairMetrics> {
    params.check_q()?;
    params.check_margin()?;
    for (which, tp) in [("earlier", a), ("later", b)] {
        if tp.flip.is_none() {
            return Err(Error::validation(format!("{which} timepoint has no flip map")));
        }
        if tp.score.is_none() {
            return Err(Error::validation(format!("{which} timepoint has no score map")));
        }
    }
    let conn = params.connectivity;
    let ta = timepoint_metrics(&a.mask, conn);
    let tb = timepoint_metrics(&b.mask, conn);
    let new_volume = |rule: &dyn crate::change::ChangeRule| -> Result<f64> {
        Ok(change_maps(a, b, rule, params.min_voxels, conn)?
            .new_lesion
            .volume_mm3())
    };
    Ok(PairMetrics {
        abs_volume_change: tb.lesion_volume_mm3 - ta.lesion_volume_mm3,
        rel_volume_change: relative_change(ta.lesion_volume_mm3, tb.lesion_volume_mm3),
        count_change: tb.lesion_count as i64 - ta.lesion_count as i64,
        naive_new_volume: new_volume(&Naive)?,
        confident_new_volume: new_volume(&FlipConfidence { q: params.q })?,
        margin_new_volume: new_volume(&ScoreMargin { m: params.margin })?,
    })
}

/// A scalar score of a timepoint pair; larger means "more progressive".
pub trait ProgressionMetric: Send + Sync {
    fn name(&self) -> &'static str;

    fn label(&self) -> &'static str;

    fn score(&self, pair: &PairMetrics) -> f64;
}

type FieldGetter = fn(&PairMetrics) -> f64;

struct FieldMetric {
    name: &'static str,
    label: &'static str,
    get: FieldGetter,
}

impl ProgressionMetric for FieldMetric {
    fn name(&self) -> &'static str {
        self.name
    }

    fn label(&self) -> &'static str {
        self.label
    }

    fn score(&self, pair: &PairMetrics) -> f64 {
        (self.get)(pair)
    }
}

/// Ordered set of metrics evaluated by the cohort harness.
pub struct MetricRegistry {
    metrics: Vec<Box<dyn ProgressionMetric>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        MetricRegistry { metrics: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        let builtins: [(&'static str, &'static str, FieldGetter); 6] = [
            ("abs_volume_change", "Absolute volume change", |p| p.abs_volume_change),
            ("rel_volume_change", "Relative volume change", |p| p.rel_volume_change),
            ("count_change", "Lesion count change", |p| p.count_change as f64),
            ("naive_new_volume", "New lesion volume", |p| p.naive_new_volume),
            ("margin_new_volume", "Margin method", |p| p.margin_new_volume),
            ("confident_new_volume", "Confidence method", |p| p.confident_new_volume),
        ];
        for (name, label, get) in builtins {
            reg.register(Box::new(FieldMetric { name, label, get }))
                .expect("unique builtin names");
        }
        reg
    }

    pub fn register(&mut self, metric: Box<dyn ProgressionMetric>) -> Result<()> {
        if self.get(metric.name()).is_some() {
            return Err(Error::validation(format!(
                "metric '{}' already registered",
                metric.name()
            )));
        }
        self.metrics.push(metric);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn ProgressionMetric> {
        self.metrics.iter().find(|m| m.name() == name).map(|m| m.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn ProgressionMetric> + '_ {
        self.metrics.iter().map(|m| m.as_ref())
    }

    pub fn len(&self) -> usize {
        self.metrics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metrics.is_empty()
    }
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
