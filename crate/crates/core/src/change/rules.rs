//! Voxel confidence rules and the registry that selects them by name.

use std::fmt;

use crate::error::{Error, Result};
use crate::volume::{FlipMap, LesionMask, ScoreMap};

use super::{ChangeParams, Timepoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfidenceLabel {
    ConfidentLesion,
    ConfidentNonLesion,
    Uncertain,
}

/// Flip-probability rule: the mask label counts only when `flip < q`.
pub fn confidence_label_flip(in_mask: bool, flip: f64, q: f64) -> Result<ConfidenceLabel> {
    if !(0.0..=0.5).contains(&flip) {
        return Err(Error::validation(format!("flip probability {flip} outside [0, 0.5]")));
    }
    if !(q > 0.0 && q <= 0.5) {
        return Err(Error::validation(format!("q = {q} outside (0, 0.5]")));
    }
    Ok(flip_label(in_mask, flip, q))
}

/// Score-margin rule: lesion above `0.5 + m`, non-lesion below `0.5 - m`.
pub fn confidence_label_margin(p: f64, m: f64) -> Result<ConfidenceLabel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("score {p} outside [0, 1]")));
    }
    if !(0.0..0.5).contains(&m) {
        return Err(Error::validation(format!("margin {m} outside [0, 0.5)")));
    }
    Ok(margin_label(p, m))
}

#[inline]
fn flip_label(in_mask: bool, flip: f64, q: f64) -> ConfidenceLabel {
    match (flip < q, in_mask) {
        (true, true) => ConfidenceLabel::ConfidentLesion,
        (true, false) => ConfidenceLabel::ConfidentNonLesion,
        (false, _) => ConfidenceLabel::Uncertain,
    }
}

#[inline]
fn margin_label(p: f64, m: f64) -> ConfidenceLabel {
    if p > 0.5 + m {
        ConfidenceLabel::ConfidentLesion
    } else if p < 0.5 - m {
        ConfidenceLabel::ConfidentNonLesion
    } else {
        ConfidenceLabel::Uncertain
    }
}

/// Which map besides the mask a rule reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequiredMap {
    MaskOnly,
    Flip,
    Score,
}

/// A strategy for labelling every voxel of one timepoint.
pub trait ChangeRule: Send + Sync + fmt::Debug {
    /// Registry name.
    fn name(&self) -> &'static str;

    fn requires(&self) -> RequiredMap;

    /// One label per voxel, in grid order.
    fn classify(&self, tp: &Timepoint) -> Result<Vec<ConfidenceLabel>>;
}

fn missing(rule: &str, what: &str) -> Error {
    Error::validation(format!("rule '{rule}' needs a {what} map for every timepoint"))
}

#[derive(Debug, Clone)]
pub struct FlipConfidence {
    pub q: f64,
}

impl FlipConfidence {
    pub fn labels(&self, mask: &LesionMask, flip: &FlipMap) -> Vec<ConfidenceLabel> {
        mask.bits()
            .iter()
            .zip(flip.data())
            .map(|(&m, &f)| flip_label(m, f64::from(f), self.q))
            .collect()
    }
}

impl ChangeRule for FlipConfidence {
    fn name(&self) -> &'static str {
        "confidence"
    }

    fn requires(&self) -> RequiredMap {
        RequiredMap::Flip
    }

    fn classify(&self, tp: &Timepoint) -> Result<Vec<ConfidenceLabel>> {
        let flip = tp.flip.as_ref().ok_or_else(|| missing(self.name(), "flip"))?;
        Ok(self.labels(&tp.mask, flip))
    }
}

#[derive(Debug, Clone)]
pub struct ScoreMargin {
    pub m: f64,
}

impl ScoreMargin {
    pub fn labels(&self, score: &ScoreMap) -> Vec<ConfidenceLabel> {
        score
            .data()
            .iter()
            .map(|&p| margin_label(f64::from(p), self.m))
            .collect()
    }
}

impl ChangeRule for ScoreMargin {
    fn name(&self) -> &'static str {
        "margin"
    }

    fn requires(&self) -> RequiredMap {
        RequiredMap::Score
    }

    fn classify(&self, tp: &Timepoint) -> Result<Vec<ConfidenceLabel>> {
        let score = tp.score.as_ref().ok_or_else(|| missing(self.name(), "score"))?;
        Ok(self.labels(score))
    }
}

/// Plain mask membership; every voxel is "confident".
#[derive(Debug, Clone, Default)]
pub struct Naive;

impl ChangeRule for Naive {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn requires(&self) -> RequiredMap {
        RequiredMap::MaskOnly
    }

    fn classify(&self, tp: &Timepoint) -> Result<Vec<ConfidenceLabel>> {
        Ok(tp
            .mask
            .bits()
            .iter()
            .map(|&m| {
                if m {
                    ConfidenceLabel::ConfidentLesion
                } else {
                    ConfidenceLabel::ConfidentNonLesion
                }
            })
            .collect())
    }
}

pub type RuleFactory = fn(&ChangeParams) -> Result<Box<dyn ChangeRule>>;

pub struct RuleEntry {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub summary: &'static str,
    pub build: RuleFactory,
}

/// Change rules addressable by name (or alias).
pub struct RuleRegistry {
    entries: Vec<RuleEntry>,
}

impl RuleRegistry {
    pub fn empty() -> Self {
        RuleRegistry { entries: Vec::new() }
    }

    /// The confidence, margin and naive rules.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(RuleEntry {
            name: "confidence",
            aliases: &["flip_confidence", "flip"],
            summary: "mask label counts where label-flip probability < q",
            build: |p| {
                p.check_q()?;
                Ok(Box::new(FlipConfidence { q: p.q }))
            },
        })
        .expect("fresh registry");
        reg.register(RuleEntry {
            name: "margin",
            aliases: &["score_margin"],
            summary: "lesion where score > 0.5 + m, non-lesion where score < 0.5 - m",
            build: |p| {
                p.check_margin()?;
                Ok(Box::new(ScoreMargin { m: p.margin }))
            },
        })
        .expect("fresh registry");
        reg.register(RuleEntry {
            name: "naive",
            aliases: &["difference"],
            summary: "plain mask difference",
            build: |_| Ok(Box::new(Naive)),
        })
        .expect("fresh registry");
        reg
    }

    pub fn register(&mut self, entry: RuleEntry) -> Result<()> {
        let taken = |n: &str| self.lookup(n).is_some();
        if taken(entry.name) || entry.aliases.iter().any(|a| taken(a)) {
            return Err(Error::validation(format!("rule '{}' already registered", entry.name)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&RuleEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name || e.aliases.contains(&name))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|e| e.name)
    }

    pub fn build_named(&self, name: &str, params: &ChangeParams) -> Result<Box<dyn ChangeRule>> {
        let entry = self.lookup(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::validation(format!("unknown rule '{name}' (known: {})", known.join(", ")))
        })?;
        (entry.build)(params)
    }

    /// Builds the rule selected by `params.rule`.
    pub fn build(&self, params: &ChangeParams) -> Result<Box<dyn ChangeRule>> {
        self.build_named(&params.rule, params)
    }
}

impl Default for RuleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConfidenceLabel::*;

    #[test]
    fn flip_rule_examples() {
        assert_eq!(confidence_label_flip(true, 0.01, 0.05).unwrap(), ConfidentLesion);
        assert_eq!(confidence_label_flip(false, 0.01, 0.05).unwrap(), ConfidentNonLesion);
        assert_eq!(confidence_label_flip(false, 0.30, 0.05).unwrap(), Uncertain);
        assert_eq!(confidence_label_flip(true, 0.05, 0.05).unwrap(), Uncertain);
        assert!(confidence_label_flip(true, 0.6, 0.05).is_err());
        assert!(confidence_label_flip(true, -0.1, 0.05).is_err());
        assert!(confidence_label_flip(true, 0.1, 0.0).is_err());
    }

    #[test]
    fn margin_rule_examples() {
        assert_eq!(confidence_label_margin(0.96, 0.45).unwrap(), ConfidentLesion);
        assert_eq!(confidence_label_margin(0.04, 0.45).unwrap(), ConfidentNonLesion);
        for m in [0.0, 0.1, 0.45, 0.49] {
            assert_eq!(confidence_label_margin(0.5, m).unwrap(), Uncertain);
            assert_eq!(confidence_label_margin(0.5 + m, m).unwrap(), Uncertain);
            assert_eq!(confidence_label_margin(0.5 - m, m).unwrap(), Uncertain);
        }
        assert!(confidence_label_margin(1.2, 0.45).is_err());
        assert!(confidence_label_margin(0.5, 0.5).is_err());
    }

    #[test]
    fn registry_resolves_names_and_aliases() {
        let reg = RuleRegistry::builtin();
        let params = ChangeParams::default();
        for (name, canonical) in [
            ("confidence", "confidence"),
            ("flip_confidence", "confidence"),
            ("margin", "margin"),
            ("score_margin", "margin"),
            ("naive", "naive"),
        ] {
            assert_eq!(reg.build_named(name, &params).unwrap().name(), canonical);
        }
        assert!(reg.build_named("otsu", &params).is_err());
        assert_eq!(reg.names().collect::<Vec<_>>(), ["confidence", "margin", "naive"]);
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut reg = RuleRegistry::builtin();
        let dup = RuleEntry {
            name: "other",
            aliases: &["naive"],
            summary: "",
            build: |_| Ok(Box::new(Naive)),
        };
        assert!(reg.register(dup).is_err());
    }

    #[test]
    fn factories_validate_parameters() {
        let reg = RuleRegistry::builtin();
        let bad_q = ChangeParams {
            q: 0.7,
            ..ChangeParams::default()
        };
        assert!(reg.build_named("confidence", &bad_q).is_err());
        assert!(reg.build_named("naive", &bad_q).is_ok());
        let bad_m = ChangeParams {
            margin: 0.5,
            ..ChangeParams::default()
        };
        assert!(reg.build_named("margin", &bad_m).is_err());
    }
}
