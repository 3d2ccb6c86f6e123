//! On-disk evaluation reports: `results.csv`, `roc_<method>.csv`,
//! `summary.json` and `roc.svg`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::change::ChangeParams;
use crate::error::{Error, Result};
use crate::serde_inf;

use super::cohort::{CaseError, CohortEvaluation, MethodResult, PairRow};
use super::roc::RocResult;

/// Column order of `results.csv`.
pub const RESULTS_COLUMNS: [&str; 14] = [
    "patient",
    "from_timepoint",
    "to_timepoint",
    "progressive",
    "volume_before_mm3",
    "volume_after_mm3",
    "count_before",
    "count_after",
    "abs_volume_change",
    "rel_volume_change",
    "count_change",
    "naive_new_volume",
    "margin_new_volume",
    "confident_new_volume",
];

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("flush")
}

pub fn results_csv(rows: &[PairRow]) -> Vec<u8> {
    csv_bytes(
        &RESULTS_COLUMNS,
        rows.iter().map(|r| {
            let m = &r.metrics;
            vec![
                r.patient.clone(),
                r.from_timepoint.clone(),
                r.to_timepoint.clone(),
                r.progressive.to_string(),
                r.before.lesion_volume_mm3.to_string(),
                r.after.lesion_volume_mm3.to_string(),
                r.before.lesion_count.to_string(),
                r.after.lesion_count.to_string(),
                m.abs_volume_change.to_string(),
                serde_inf::format(m.rel_volume_change),
                m.count_change.to_string(),
                m.naive_new_volume.to_string(),
                m.margin_new_volume.to_string(),
                m.confident_new_volume.to_string(),
            ]
        }),
    )
}

pub fn roc_csv(roc: &RocResult) -> Vec<u8> {
    csv_bytes(
        &["threshold", "fpr", "tpr"],
        roc.points.iter().map(|p| {
            vec![
                serde_inf::format(p.threshold),
                p.fpr.to_string(),
                p.tpr.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub params: &'a ChangeParams,
    pub pairs: usize,
    pub progressive: usize,
    pub stable: usize,
    pub methods: &'a [MethodResult],
    pub errors: &'a [CaseError],
}

pub fn summary_json(eval: &CohortEvaluation) -> String {
    let progressive = eval.rows.iter().filter(|r| r.progressive).count();
    let summary = Summary {
        schema_version: 1,
        params: &eval.params,
        pairs: eval.rows.len(),
        progressive,
        stable: eval.rows.len() - progressive,
        methods: &eval.methods,
        errors: &eval.errors,
    };
    serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// ROC curves as SVG polylines, with a star at each zero-change operating point.
pub fn roc_svg(methods: &[MethodResult]) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let px = |fpr: f64| MARGIN + fpr * SIZE;
    let py = |tpr: f64| MARGIN + (1.0 - tpr) * SIZE;
    let width = SIZE + 2.0 * MARGIN + 220.0;
    let height = SIZE + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    for (k, method) in methods.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let legend_y = MARGIN + 10.0 + 20.0 * k as f64;
        let auc = method
            .auc
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{legend_y:.1}" fill="{color}">{} (AUC {auc})</text>"#,
            MARGIN + SIZE + 15.0,
            method.label
        );
        let Some(roc) = &method.roc else { continue };
        let pts: Vec<String> = roc
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let c = &method.confusion;
        let negatives = (c.tn + c.fp).max(1) as f64;
        let positives = (c.tp + c.fn_).max(1) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}" text-anchor="middle" dominant-baseline="central" font-size="16">*</text>"#,
            px(c.fp as f64 / negatives),
            py(c.tp as f64 / positives)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every report file for `eval` into `out_dir`.
pub fn write_evaluation(eval: &CohortEvaluation, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("results.csv"), results_csv(&eval.rows))?;
    for method in &eval.methods {
        if let Some(roc) = &method.roc {
            write_file(&out_dir.join(format!("roc_{}.csv", method.name)), roc_csv(roc))?;
        }
    }
    write_file(&out_dir.join("summary.json"), summary_json(eval))?;
    write_file(&out_dir.join("roc.svg"), roc_svg(&eval.methods))?;
    Ok(())
}
