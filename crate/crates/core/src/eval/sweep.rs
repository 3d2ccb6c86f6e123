//! Parameter sensitivity sweeps over q, the score margin, or the
//! minimum component size.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::change::ChangeParams;
use crate::error::{Error, Result};
use crate::metrics::MetricRegistry;

use super::cohort::{evaluate_loaded, LoadedCohort};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Q,
    Margin,
    MinVoxels,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Q => "q",
            SweepAxis::Margin => "margin",
            SweepAxis::MinVoxels => "min_voxels",
        }
    }

    /// `params` with this axis set to `value`, validated.
    pub fn apply(self, params: &ChangeParams, value: f64) -> Result<ChangeParams> {
        let mut p = params.clone();
        match self {
            SweepAxis::Q => {
                p.q = value;
                p.check_q()?;
            }
            SweepAxis::Margin => {
                p.margin = value;
                p.check_margin()?;
            }
            SweepAxis::MinVoxels => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::validation(format!(
                        "min_voxels value {value} is not a non-negative integer"
                    )));
                }
                p.min_voxels = value as usize;
            }
        }
        Ok(p)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(SweepAxis::Q),
            "m" | "margin" => Ok(SweepAxis::Margin),
            "min_voxels" | "min-voxels" => Ok(SweepAxis::MinVoxels),
            other => Err(Error::validation(format!(
                "unknown sweep axis '{other}' (expected q, margin or min_voxels)"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `"q=0.01,0.05"` into an axis and its values.
pub fn parse_sweep_spec(spec: &str) -> Result<(SweepAxis, Vec<f64>)> {
    let (axis, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("sweep '{spec}' is not of the form axis=v1,v2,...")))?;
    let axis: SweepAxis = axis.trim().parse()?;
    let values = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("sweep value '{v}' is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((axis, values))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub aucs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub methods: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.axis.name().to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![match self.axis {
                SweepAxis::MinVoxels => format!("{}", row.value as u64),
                _ => format!("{}", row.value),
            }];
            rec.extend(
                row.aucs
                    .iter()
                    .map(|a| a.map(|v| format!("{v}")).unwrap_or_default()),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// AUC column of one method.
    pub fn column(&self, method: &str) -> Option<Vec<Option<f64>>> {
        let k = self.methods.iter().position(|m| m == method)?;
        Some(self.rows.iter().map(|r| r.aucs[k]).collect())
    }
}

/// One cohort evaluation per value; every metric's AUC is reported.
pub fn sweep(
    cohort: &LoadedCohort,
    base: &ChangeParams,
    axis: SweepAxis,
    values: &[f64],
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::validation("sweep needs at least one value"));
    }
    let params = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let registry = MetricRegistry::builtin();
    let mut rows = Vec::with_capacity(values.len());
    for (&value, p) in values.iter().zip(&params) {
        let eval = evaluate_loaded(cohort, p, &registry)?;
        rows.push(SweepRow {
            value,
            aucs: eval.methods.iter().map(|m| m.auc).collect(),
        });
    }
    Ok(SweepTable {
        axis,
        methods: registry.iter().map(|m| m.name().to_string()).collect(),
        rows,
    })
}
