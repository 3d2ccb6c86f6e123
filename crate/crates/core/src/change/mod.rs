//! Confident new / missing lesion maps between two co-registered timepoints.
//!
//! A voxel is *new* when it is confidently non-lesion at the earlier
//! timepoint and confidently lesion at the later one, and *missing* in the
//! opposite case. What "confident" means is decided by a [`ChangeRule`]
//! looked up by name in a [`RuleRegistry`]. Connected components smaller than
//! `min_voxels` are removed from each map independently afterwards.

mod rules;

pub use rules::{
    confidence_label_flip, confidence_label_margin, ChangeRule, ConfidenceLabel, FlipConfidence,
    Naive, RequiredMap, RuleEntry, RuleFactory, RuleRegistry, ScoreMargin,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{filter_small_components, lesion_count, Connectivity};
use crate::volume::{FlipMap, Grid, LesionMask, ScoreMap};

/// Grids closer than this (per entry) count as identical.
pub const GRID_TOLERANCE: f64 = 1e-4;

pub const DEFAULT_Q: f64 = 0.05;
pub const DEFAULT_MARGIN: f64 = 0.45;
pub const DEFAULT_MIN_VOXELS: usize = 12;
pub const DEFAULT_RULE: &str = "confidence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangeParams {
    /// Registered rule name.
    pub rule: String,
    /// Flip-probability threshold, in (0, 0.5].
    pub q: f64,
    /// Score margin around 0.5, in [0, 0.5).
    pub margin: f64,
    pub min_voxels: usize,
    pub connectivity: Connectivity,
}

impl Default for ChangeParams {
    fn default() -> Self {
        ChangeParams {
            rule: DEFAULT_RULE.into(),
            q: DEFAULT_Q,
            margin: DEFAULT_MARGIN,
            min_voxels: DEFAULT_MIN_VOXELS,
            connectivity: Connectivity::default(),
        }
    }
}

impl ChangeParams {
    pub fn check_q(&self) -> Result<()> {
        if self.q > 0.0 && self.q <= 0.5 {
            Ok(())
        } else {
            Err(Error::validation(format!("q = {} outside (0, 0.5]", self.q)))
        }
    }

    pub fn check_margin(&self) -> Result<()> {
        if (0.0..0.5).contains(&self.margin) {
            Ok(())
        } else {
            Err(Error::validation(format!("margin = {} outside [0, 0.5)", self.margin)))
        }
    }

    /// Checks every numeric parameter and that the rule is registered.
    pub fn validate(&self, registry: &RuleRegistry) -> Result<()> {
        self.check_q()?;
        self.check_margin()?;
        registry.build(self).map(|_| ())
    }
}

/// The maps of one timepoint on the common grid.
#[derive(Debug, Clone)]
pub struct Timepoint {
    pub mask: LesionMask,
    pub flip: Option<FlipMap>,
    pub score: Option<ScoreMap>,
}

impl Timepoint {
    pub fn new(mask: LesionMask, flip: Option<FlipMap>, score: Option<ScoreMap>) -> Result<Self> {
        let grid = mask.grid();
        let same = |g: &Grid| g.matches(grid, GRID_TOLERANCE);
        if flip.as_ref().is_some_and(|f| !same(f.grid())) {
            return Err(Error::validation("flip map grid differs from mask grid"));
        }
        if score.as_ref().is_some_and(|s| !same(s.grid())) {
            return Err(Error::validation("score map grid differs from mask grid"));
        }
        Ok(Timepoint { mask, flip, score })
    }

    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMaps {
    pub new_lesion: LesionMask,
    pub missing_lesion: LesionMask,
}

/// Voxelwise maps before size filtering.
pub fn raw_change_maps(a: &Timepoint, b: &Timepoint, rule: &dyn ChangeRule) -> Result<ChangeMaps> {
    if !a.grid().matches(b.grid(), GRID_TOLERANCE) {
        return Err(Error::validation(
            "timepoints are on different grids; resample both onto a common grid first",
        ));
    }
    let la = rule.classify(a)?;
    let lb = rule.classify(b)?;
    let mut new = Vec::with_capacity(la.len());
    let mut missing = Vec::with_capacity(la.len());
    for (&x, &y) in la.iter().zip(&lb) {
        use ConfidenceLabel::*;
        new.push(x == ConfidentNonLesion && y == ConfidentLesion);
        missing.push(x == ConfidentLesion && y == ConfidentNonLesion);
    }
    let grid = a.grid().clone();
    Ok(ChangeMaps {
        new_lesion: LesionMask::new(grid.clone(), new)?,
        missing_lesion: LesionMask::new(grid, missing)?,
    })
}

/// Voxelwise maps under `rule`, then the size filter on each map.
pub fn change_maps(
    a: &Timepoint,
    b: &Timepoint,
    rule: &dyn ChangeRule,
    min_voxels: usize,
    connectivity: Connectivity,
) -> Result<ChangeMaps> {
    let raw = raw_change_maps(a, b, rule)?;
    Ok(ChangeMaps {
        new_lesion: filter_small_components(&raw.new_lesion, min_voxels, connectivity),
        missing_lesion: filter_small_components(&raw.missing_lesion, min_voxels, connectivity),
    })
}

/// [`change_maps`] with the rule looked up from `params.rule` in the
/// built-in registry.
pub fn change_maps_for(a: &Timepoint, b: &Timepoint, params: &ChangeParams) -> Result<ChangeMaps> {
    let rule = RuleRegistry::builtin().build(params)?;
    change_maps(a, b, rule.as_ref(), params.min_voxels, params.connectivity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub new_volume_mm3: f64,
    pub missing_volume_mm3: f64,
    pub new_component_count: usize,
    pub missing_component_count: usize,
}

pub fn summarize_change(maps: &ChangeMaps, connectivity: Connectivity) -> ChangeSummary {
    ChangeSummary {
        new_volume_mm3: maps.new_lesion.volume_mm3(),
        missing_volume_mm3: maps.missing_lesion.volume_mm3(),
        new_component_count: lesion_count(&maps.new_lesion, connectivity),
        missing_component_count: lesion_count(&maps.missing_lesion, connectivity),
    }
}
