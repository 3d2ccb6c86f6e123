use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use lesion_change::change::{change_maps_for, summarize_change, ChangeParams, ChangeSummary, Timepoint};
use lesion_change::eval::{
    evaluate_loaded, load_cohort, parse_sweep_spec, sweep, write_evaluation, CohortManifest,
    LoadedCohort,
};
use lesion_change::grid_ops::{common_grid, resample_flip, resample_mask, resample_score, RigidTransform};
use lesion_change::metrics::{relative_change, timepoint_metrics, TimepointMetrics};
use lesion_change::nifti::{read_flip_map, read_mask, read_score_map, write_mask};
use lesion_change::phantom::generate_cohort;
use lesion_change::MetricRegistry;
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{CliError, EXIT_PARTIAL, EXIT_SUCCESS};

#[derive(Debug, Clone, Args)]
pub struct ChangeArgs {
    /// Lesion mask of the earlier timepoint
    #[arg(long, value_name = "FILE")]
    pub before_mask: PathBuf,
    /// Flip map of the earlier timepoint
    #[arg(long, value_name = "FILE")]
    pub before_flip: Option<PathBuf>,
    /// Score map of the earlier timepoint
    #[arg(long, value_name = "FILE")]
    pub before_score: Option<PathBuf>,
    /// Rigid transform of the earlier timepoint, 16 numbers row-major [default: identity]
    #[arg(long, value_name = "FILE")]
    pub before_transform: Option<PathBuf>,
    /// Lesion mask of the later timepoint
    #[arg(long, value_name = "FILE")]
    pub after_mask: PathBuf,
    /// Flip map of the later timepoint
    #[arg(long, value_name = "FILE")]
    pub after_flip: Option<PathBuf>,
    /// Score map of the later timepoint
    #[arg(long, value_name = "FILE")]
    pub after_score: Option<PathBuf>,
    /// Rigid transform of the later timepoint, 16 numbers row-major [default: identity]
    #[arg(long, value_name = "FILE")]
    pub after_transform: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Cohort manifest (JSON)
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Parameter sweep, e.g. q=0.0005,0.001,0.01,0.05,0.1,0.2 (repeatable)
    #[arg(long, value_name = "AXIS=VALUES")]
    pub sweep: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    /// RNG seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of patients [default: 20]
    #[arg(long)]
    pub n_patients: Option<usize>,
    /// Timepoints per patient [default: 4]
    #[arg(long)]
    pub timepoints: Option<usize>,
    /// Chance that a follow-up timepoint gains a new lesion [default: 0.3]
    #[arg(long)]
    pub progression_probability: Option<f64>,
    /// Standard deviation of the per-timepoint logit offset [default: 0.5]
    #[arg(long)]
    pub contrast_jitter_sd: Option<f64>,
    /// Logit units per mm at lesion edges [default: 6]
    #[arg(long)]
    pub boundary_sharpness: Option<f64>,
    /// Cubic grid side in voxels [default: 64]
    #[arg(long)]
    pub grid_size: Option<usize>,
}

struct Side<'a> {
    mask: &'a Path,
    flip: Option<&'a Path>,
    score: Option<&'a Path>,
    transform: Option<&'a Path>,
}

struct LoadedSide {
    mask: lesion_change::LesionMask,
    flip: Option<lesion_change::FlipMap>,
    score: Option<lesion_change::ScoreMap>,
    transform: RigidTransform,
}

fn load_side(side: &Side) -> Result<LoadedSide, CliError> {
    Ok(LoadedSide {
        mask: read_mask(side.mask)?,
        flip: side.flip.map(read_flip_map).transpose()?.map(|(m, _)| m),
        score: side.score.map(read_score_map).transpose()?.map(|(m, _)| m),
        transform: match side.transform {
            Some(p) => RigidTransform::read(p)?,
            None => RigidTransform::identity(),
        },
    })
}

fn onto_grid(side: LoadedSide, grid: &lesion_change::TargetGrid) -> Result<Timepoint, CliError> {
    let t = &side.transform;
    Ok(Timepoint::new(
        resample_mask(&side.mask, grid, t)?,
        side.flip.map(|f| resample_flip(&f, grid, t)).transpose()?,
        side.score.map(|s| resample_score(&s, grid, t)).transpose()?,
    )?)
}

#[derive(Debug, Serialize)]
struct GridReport {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
}

#[derive(Debug, Serialize)]
struct ChangeReport {
    params: ChangeParams,
    grid: GridReport,
    #[serde(flatten)]
    summary: ChangeSummary,
    before: TimepointMetrics,
    after: TimepointMetrics,
    abs_volume_change: f64,
    #[serde(with = "lesion_change::serde_inf")]
    rel_volume_change: f64,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn change(args: &ChangeArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let out = cfg.out_dir()?;
    let params = cfg.change_params();
    let before = load_side(&Side {
        mask: &args.before_mask,
        flip: args.before_flip.as_deref(),
        score: args.before_score.as_deref(),
        transform: args.before_transform.as_deref(),
    })?;
    let after = load_side(&Side {
        mask: &args.after_mask,
        flip: args.after_flip.as_deref(),
        score: args.after_score.as_deref(),
        transform: args.after_transform.as_deref(),
    })?;
    let grid = common_grid(
        &[
            (before.mask.grid(), &before.transform),
            (after.mask.grid(), &after.transform),
        ],
        cfg.grid_spacing,
    )?;
    let a = onto_grid(before, &grid)?;
    let b = onto_grid(after, &grid)?;
    let maps = change_maps_for(&a, &b, &params)?;
    let summary = summarize_change(&maps, params.connectivity);
    let before = timepoint_metrics(&a.mask, params.connectivity);
    let after = timepoint_metrics(&b.mask, params.connectivity);

    create_dir(out)?;
    write_mask(&maps.new_lesion, out.join("new_lesion.nii.gz"))?;
    write_mask(&maps.missing_lesion, out.join("missing_lesion.nii.gz"))?;
    let report = ChangeReport {
        params,
        grid: GridReport {
            dims: grid.dims(),
            spacing_mm: grid.spacing(),
        },
        summary,
        before,
        after,
        abs_volume_change: after.lesion_volume_mm3 - before.lesion_volume_mm3,
        rel_volume_change: relative_change(before.lesion_volume_mm3, after.lesion_volume_mm3),
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(&out.join("report.json"), &text)?;
    println!(
        "new lesion {:.1} mm3 in {} component(s); missing lesion {:.1} mm3 in {} component(s)",
        summary.new_volume_mm3,
        summary.new_component_count,
        summary.missing_volume_mm3,
        summary.missing_component_count
    );
    Ok(EXIT_SUCCESS)
}

fn write_sweeps(cohort: &LoadedCohort, cfg: &RunConfig, specs: &[String], out: &Path) -> Result<(), CliError> {
    let params = cfg.change_params();
    for spec in specs {
        let (axis, values) = parse_sweep_spec(spec)?;
        let table = sweep(cohort, &params, axis, &values)?;
        let path = out.join(format!("sweep_{}.csv", axis.name()));
        write_text(&path, &table.to_csv())?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn sweep_specs(args: &EvaluateArgs, cfg: &RunConfig) -> Vec<String> {
    if args.sweep.is_empty() {
        cfg.sweep.clone()
    } else {
        args.sweep.clone()
    }
}

fn partial_status(errors: &[lesion_change::eval::CaseError]) -> i32 {
    for e in errors {
        eprintln!("case {}/{} failed: {}", e.patient, e.timepoint, e.message);
    }
    if errors.is_empty() {
        EXIT_SUCCESS
    } else {
        EXIT_PARTIAL
    }
}

pub fn evaluate(args: &EvaluateArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let out = cfg.out_dir()?;
    let specs = sweep_specs(args, cfg);
    for spec in &specs {
        parse_sweep_spec(spec)?;
    }
    let manifest = CohortManifest::load(&args.manifest)?;
    let cohort = load_cohort(&manifest, cfg.grid_spacing)?;
    let eval = evaluate_loaded(&cohort, &cfg.change_params(), &MetricRegistry::builtin())?;
    write_evaluation(&eval, out)?;
    write_sweeps(&cohort, cfg, &specs, out)?;
    for m in &eval.methods {
        match m.auc {
            Some(auc) => println!("{:<24} AUC {auc:.4}", m.name),
            None => println!("{:<24} AUC undefined", m.name),
        }
    }
    Ok(partial_status(&eval.errors))
}

pub fn run_sweep(args: &EvaluateArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let out = cfg.out_dir()?;
    let specs = sweep_specs(args, cfg);
    if specs.is_empty() {
        return Err(CliError::validation("sweep needs at least one --sweep AXIS=VALUES"));
    }
    for spec in &specs {
        parse_sweep_spec(spec)?;
    }
    let manifest = CohortManifest::load(&args.manifest)?;
    let cohort = load_cohort(&manifest, cfg.grid_spacing)?;
    create_dir(out)?;
    write_sweeps(&cohort, cfg, &specs, out)?;
    Ok(partial_status(&cohort.errors))
}

pub fn phantom(args: &PhantomArgs, cfg: &RunConfig) -> Result<i32, CliError> {
    let out = cfg.out_dir()?;
    let mut config = cfg.phantom.clone();
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.n_patients {
        config.n_patients = v;
    }
    if let Some(v) = args.timepoints {
        config.timepoints_per_patient = v;
    }
    if let Some(v) = args.progression_probability {
        config.progression_probability = v;
    }
    if let Some(v) = args.contrast_jitter_sd {
        config.contrast_jitter_sd = v;
    }
    if let Some(v) = args.boundary_sharpness {
        config.boundary_sharpness = v;
    }
    if let Some(v) = args.grid_size {
        config.grid_dims = [v; 3];
    }
    config.validate()?;
    let manifest = generate_cohort(&config, out)?;
    let progressive = manifest
        .patients
        .iter()
        .flat_map(|p| &p.timepoints)
        .filter(|t| t.progressive == Some(true))
        .count();
    println!(
        "wrote {} patients, {} labelled timepoints ({} progressive) to {}",
        manifest.patients.len(),
        manifest.labelled_count(),
        progressive,
        out.display()
    );
    Ok(EXIT_SUCCESS)
}
