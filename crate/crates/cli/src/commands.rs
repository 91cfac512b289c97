use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context as _;
use chrono::{DateTime, Utc};
use log::{info, warn};
use serde_json::json;
use vdaa_core::cas::{build_mdp, export_csv, load_table, save_table, value_iteration_with, CasError, SolveOptions};
use vdaa_core::dataset_io::{
    generate_synthetic_dataset, load_detections, read_encounter_dir, read_summary, summarize, write_dataset_dir,
    write_encounter_dir, write_results_jsonl, write_summary,
};
use vdaa_core::encounters::{generate_encounters, ConditionGrid};
use vdaa_core::metrics::{
    compare_reports, detection_slices, evaluate_detections, plot_data, reports_to_csv, reports_to_markdown, Facet,
    SliceReport,
};
use vdaa_core::perception::{DetectorProfile, PerceptionConfig};
use vdaa_core::simulator::run_batch_configured;
use vdaa_core::{Encounter, Policy};

use crate::args::{
    EvalArgs, GenerateDatasetArgs, GenerateEncountersArgs, GridKind, PerceptionKind, ReportArgs, SimulateArgs,
    SolveArgs,
};
use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::CliError;

/// Environment variable holding `host:port` of an external detector.
pub const DETECTOR_ADDR_ENV: &str = "VDAA_DETECTOR_ADDR";

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub started: DateTime<Utc>,
}

impl Context {
    fn manifest(&self) -> RunManifest {
        RunManifest::new(&self.config, self.seed, self.workers, self.started)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write(path: &Path, text: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.outputs.push(path.to_path_buf());
    Ok(())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Removes files a previous run of the same command may have left, so a
/// smaller rerun does not leave stale outputs behind.
fn remove_stale(dir: &Path, is_ours: impl Fn(&str) -> bool) -> anyhow::Result<()> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(()) };
    for entry in entries {
        let path = entry?.path();
        if path.is_file() && path.file_name().and_then(|n| n.to_str()).is_some_and(&is_ours) {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
        }
    }
    Ok(())
}

fn parse_facets(names: &[String]) -> Result<Vec<Facet>, CliError> {
    names.iter().map(|n| n.parse().map_err(|e| usage(format!("{e}")))).collect()
}

pub fn generate_encounters_cmd(ctx: &Context, args: &GenerateEncountersArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let grid = match args.grid {
        GridKind::Iid => ConditionGrid::Iid { count: args.n },
        GridKind::Factorial if args.n.is_multiple_of(288) => ConditionGrid::Factorial { per_cell: args.n / 288 },
        GridKind::Factorial => return Err(usage(format!("--n {} is not a multiple of the 288 factorial cells", args.n))),
    };
    let encounters = generate_encounters(ctx.seed, grid, &ctx.config.encounters).map_err(|e| usage(e.to_string()))?;
    let mut manifest = ctx.manifest();
    create_dir(&args.out)?;
    remove_stale(&args.out, |name| name.starts_with("encounter_") && name.ends_with(".json"))?;
    write_encounter_dir(&args.out, &encounters).context("writing encounters")?;
    manifest.outputs.push(args.out.clone());
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote {} encounters to {}", encounters.len(), args.out.display());
    Ok(())
}

pub fn generate_dataset_cmd(ctx: &Context, args: &GenerateDatasetArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(usage("--n must be positive"));
    }
    ctx.config.dataset.camera.validate().map_err(|e| usage(e.to_string()))?;
    let samples = generate_synthetic_dataset(args.n, ctx.seed, &ctx.config.dataset).context("generating dataset")?;
    let mut manifest = ctx.manifest();
    create_dir(&args.out)?;
    remove_stale(&args.out, |name| {
        let (stem, ext) = name.rsplit_once('.').unwrap_or((name, ""));
        (ext == "txt" || ext == "json") && !stem.is_empty() && stem.bytes().all(|b| b.is_ascii_digit())
    })?;
    write_dataset_dir(&args.out, &samples).context("writing dataset")?;
    manifest.outputs.push(args.out.clone());
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote {} labelled samples to {}", samples.len(), args.out.display());
    Ok(())
}

pub fn solve_cmd(ctx: &Context, args: &SolveArgs) -> Result<(), CliError> {
    if !(args.tolerance > 0.0 && args.tolerance.is_finite()) {
        return Err(usage(format!("--tolerance must be positive, got {}", args.tolerance)));
    }
    if args.max_iterations == 0 {
        return Err(usage("--max-iterations must be positive"));
    }
    let spec = build_mdp(&ctx.config.mdp).map_err(|e| usage(e.to_string()))?;
    info!("solving MDP with {} grid nodes and {} advisories", spec.num_nodes(), spec.num_actions());
    let options = SolveOptions { tolerance: args.tolerance, max_iterations: args.max_iterations };
    let table = match value_iteration_with(&spec, &options) {
        Ok(t) => t,
        Err(e @ CasError::NotConverged { .. }) => {
            return Err(anyhow::Error::new(e).context("no policy table written").into());
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    let mut manifest = ctx.manifest();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_table(&table, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    manifest.outputs.push(args.out.clone());
    if let Some(csv) = &args.csv {
        let file = fs::File::create(csv).with_context(|| format!("creating {}", csv.display()))?;
        export_csv(&table, std::io::BufWriter::new(file)).with_context(|| format!("writing {}", csv.display()))?;
        manifest.outputs.push(csv.clone());
    }
    let mut name = args.out.clone().into_os_string();
    name.push(".manifest.json");
    manifest.write(Path::new(&name))?;
    println!(
        "converged after {} iterations, residual {:e}; {} of {} (state, previous advisory) rows alert; wrote {}",
        table.iterations,
        table.residual,
        table.alerting_count(),
        table.q.len() / table.num_actions(),
        args.out.display()
    );
    Ok(())
}

fn perception_config(ctx: &Context, args: &SimulateArgs) -> Result<PerceptionConfig, CliError> {
    let configured = &ctx.config.simulation.perception;
    let Some(kind) = args.perception else {
        let mut cfg = configured.clone();
        if let (PerceptionConfig::Stochastic { scale, .. }, Some(s)) = (&mut cfg, args.scale) {
            *scale = s;
        }
        return Ok(cfg);
    };
    Ok(match kind {
        PerceptionKind::Perfect => PerceptionConfig::Perfect,
        PerceptionKind::Blind => PerceptionConfig::Blind,
        PerceptionKind::Stochastic => {
            let (profile, noise) = match configured {
                PerceptionConfig::Stochastic { profile, noise, .. } => (profile.clone(), *noise),
                _ => (DetectorProfile::baseline(), None),
            };
            PerceptionConfig::Stochastic { profile, scale: args.scale.unwrap_or(1.0), noise }
        }
        PerceptionKind::BoxGeometry => PerceptionConfig::BoxGeometry { assumed: Default::default() },
        PerceptionKind::External => {
            let (command, address) = match &args.detector_cmd {
                Some(cmd) => (Some(cmd.clone()), None),
                None => match std::env::var(DETECTOR_ADDR_ENV) {
                    Ok(addr) if !addr.is_empty() => (None, Some(addr)),
                    _ => return Err(usage(format!("external perception needs --detector-cmd or {DETECTOR_ADDR_ENV}"))),
                },
            };
            let mut cfg = match configured {
                PerceptionConfig::External { .. } => configured.clone(),
                _ => PerceptionConfig::External {
                    command: None,
                    address: None,
                    timeout_ms: 5000,
                    on_timeout: Default::default(),
                    min_confidence: 0.0,
                    assumed: Default::default(),
                },
            };
            if let PerceptionConfig::External { command: c, address: a, .. } = &mut cfg {
                *c = command;
                *a = address;
            }
            cfg
        }
    })
}

pub fn simulate_cmd(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let facets = parse_facets(&args.facets)?;
    let mut manifest = ctx.manifest();
    let mut sim = ctx.config.simulation.clone();
    sim.perception = perception_config(ctx, args)?;
    if args.scale.is_some() && !matches!(sim.perception, PerceptionConfig::Stochastic { .. }) {
        return Err(usage("--scale only applies to stochastic perception"));
    }
    sim.validate().map_err(|e| usage(e.to_string()))?;
    let policy = match (&args.policy, args.no_avoidance) {
        (Some(path), _) => {
            manifest.inputs.push(path.clone());
            let table = load_table(path).with_context(|| format!("loading policy {}", path.display()))?;
            Policy::Table(Arc::new(table))
        }
        (None, true) => Policy::AlwaysCoc,
        (None, false) => return Err(usage("give --policy <file> or --no-avoidance")),
    };
    let (encounters, master_seed): (Vec<Encounter>, Option<u64>) = match (&args.encounters, args.n) {
        (Some(dir), _) => {
            manifest.inputs.push(dir.clone());
            let e = read_encounter_dir(dir).with_context(|| format!("reading encounters from {}", dir.display()))?;
            (e, None)
        }
        (None, Some(n)) if n > 0 => {
            let e = generate_encounters(ctx.seed, ConditionGrid::Iid { count: n }, &ctx.config.encounters)
                .map_err(|e| usage(e.to_string()))?;
            (e, Some(ctx.seed))
        }
        (None, Some(_)) => return Err(usage("--n must be positive")),
        (None, None) => return Err(usage("give --encounters <dir> or --n <count>")),
    };
    if encounters.is_empty() {
        return Err(anyhow::anyhow!("no encounters to simulate").into());
    }
    info!("simulating {} encounters", encounters.len());
    let mut batch = run_batch_configured(&encounters, &policy, &sim, ctx.workers).context("simulation failed")?;
    batch.master_seed = master_seed;
    for f in &batch.failures {
        warn!("encounter {} failed: {}", f.id, f.message);
    }

    create_dir(&args.out)?;
    write(&args.out.join("results.jsonl"), &write_results_jsonl(&batch.results), &mut manifest)?;
    if batch.results.is_empty() {
        manifest.write(&args.out.join("manifest.json"))?;
        return Err(anyhow::anyhow!("all {} encounters failed", batch.failures.len()).into());
    }
    let summary = summarize(&batch, &facets).context("summarizing")?;
    write(&args.out.join("summary.json"), &write_summary(&summary), &mut manifest)?;
    write_slices(&args.out, &summary.slices, &mut manifest)?;
    manifest.write(&args.out.join("manifest.json"))?;
    println!(
        "{} encounters: NMAC frequency {:.4} (se {:.4}), alert frequency {:.4} (se {:.4})",
        summary.encounters,
        summary.nmac.value,
        summary.nmac.standard_error,
        summary.alert.value,
        summary.alert.standard_error
    );
    if !batch.failures.is_empty() {
        return Err(anyhow::anyhow!("{} encounters failed", batch.failures.len()).into());
    }
    Ok(())
}

fn write_slices(dir: &Path, reports: &[SliceReport], manifest: &mut RunManifest) -> anyhow::Result<()> {
    write(&dir.join("slices.csv"), &reports_to_csv(reports)?, manifest)?;
    write(&dir.join("slices.md"), &reports_to_markdown(reports)?, manifest)?;
    let plot = serde_json::to_string_pretty(&plot_data(reports))? + "\n";
    write(&dir.join("plot.json"), &plot, manifest)
}

pub fn eval_cmd(ctx: &Context, args: &EvalArgs) -> Result<(), CliError> {
    let facets = parse_facets(&args.facet)?;
    let eval = ctx.config.eval;
    for (name, t) in [("iouThreshold", eval.iou_threshold), ("confidenceThreshold", eval.confidence_threshold)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(usage(format!("eval.{name} {t} outside [0, 1]")));
        }
    }
    let mut manifest = ctx.manifest();
    manifest.inputs.extend([args.labels.clone(), args.predictions.clone()]);
    let loaded = load_detections(&args.labels, &args.predictions, &ctx.config.metadata_adapter, args.strict)
        .context("loading labels and predictions")?;
    for s in &loaded.missing_predictions {
        warn!("{s}: no prediction file, evaluated as no detections");
    }
    for s in &loaded.orphan_predictions {
        warn!("{s}: prediction file without labels, ignored");
    }
    if loaded.records.is_empty() {
        return Err(anyhow::anyhow!("no label files in {}", args.labels.display()).into());
    }
    let overall =
        evaluate_detections(loaded.records.iter().map(|r| &r.detections), &eval).context("evaluating detections")?;
    let mut reports = Vec::new();
    for &facet in &facets {
        reports.extend(detection_slices(&loaded.records, facet, &eval).context("slicing")?);
    }

    create_dir(&args.out)?;
    let summary = json!({
        "images": loaded.records.len(),
        "config": eval,
        "overall": overall,
        "missingPredictions": loaded.missing_predictions,
        "orphanPredictions": loaded.orphan_predictions,
    });
    write(&args.out.join("summary.json"), &(serde_json::to_string_pretty(&summary).context("summary")? + "\n"), &mut manifest)?;
    write_slices(&args.out, &reports, &mut manifest)?;
    manifest.write(&args.out.join("manifest.json"))?;
    println!(
        "{} images: precision {:.4}, recall {:.4}, mAP {:.4}",
        loaded.records.len(),
        overall.precision,
        overall.recall,
        overall.map
    );
    Ok(())
}

fn default_name(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn report_cmd(ctx: &Context, args: &ReportArgs) -> Result<(), CliError> {
    if !args.names.is_empty() && args.names.len() != args.summaries.len() {
        return Err(usage(format!("{} --name values for {} summaries", args.names.len(), args.summaries.len())));
    }
    let mut manifest = ctx.manifest();
    let mut runs = Vec::with_capacity(args.summaries.len());
    for (i, path) in args.summaries.iter().enumerate() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let summary = read_summary(&text).with_context(|| format!("parsing {}", path.display()))?;
        let name = args.names.get(i).cloned().unwrap_or_else(|| default_name(path));
        manifest.inputs.push(path.clone());
        runs.push((name, summary.slices));
    }
    let comparison = compare_reports(&runs).context("merging summaries")?;
    create_dir(&args.out)?;
    let markdown = comparison.to_markdown();
    write(&args.out.join("comparison.csv"), &comparison.to_csv(), &mut manifest)?;
    write(&args.out.join("comparison.md"), &markdown, &mut manifest)?;
    manifest.write(&args.out.join("manifest.json"))?;
    print!("{markdown}");
    Ok(())
}
