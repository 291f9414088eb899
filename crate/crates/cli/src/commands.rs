use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use reefmap::analytics::{self, Connectivity, DEFAULT_MIN_PIXELS, DEFAULT_PRESENCE_THRESHOLD};
use reefmap::annotate::{
    argmax_label, normalize_raster, unlabeled_fraction, upsample_nearest, NormalizationParams, DEFAULT_EPSILON,
    DEFAULT_P_HIGH, DEFAULT_P_LOW,
};
use reefmap::dataset::{
    self, DatasetRound, TrainingHyperparams, DEFAULT_MAX_REPLICATION, DEFAULT_MIN_LABELED, DEFAULT_TILE_SIZE,
};
use reefmap::ingest::{consecutive_distances, parse_point_predictions, survey_spacing, write_point_predictions};
use reefmap::io::grf::{
    read_label_raster, read_probability_raster, read_sidecar, write_label_raster, write_probability_raster,
};
use reefmap::io::png::write_label_png;
use reefmap::io::write_json;
use reefmap::metrics::{self, confusion_matrix, evaluate_zones};
use reefmap::rasterize::rasterize_set;
use reefmap::synth::{synth_scene, SynthParams};
use reefmap::{grid_from_extent, ClassCatalog, Grid, Labels, Points, Probabilities};

use crate::config::{parse_pair, PipelineConfig};
use crate::stage::Workspace;
use crate::UsageError;

pub struct Ctx {
    pub ws: Workspace,
    pub config: PipelineConfig,
    pub catalog: ClassCatalog,
}

impl Ctx {
    /// Most refined label raster produced so far: upsampled, else coarse.
    fn latest_labels(&self) -> PathBuf {
        let up = self.ws.stage_file("upsample", "labels.grf");
        if up.is_file() {
            up
        } else {
            self.ws.stage_file("label", "labels.grf")
        }
    }

    fn points(&self, input: &Option<PathBuf>) -> PathBuf {
        input.clone().unwrap_or_else(|| self.ws.stage_file("ingest", "points.csv"))
    }

    fn dataset_root(&self) -> PathBuf {
        self.ws.stage_dir("dataset")
    }
}

fn read_points(path: &Path, catalog: &ClassCatalog, origin: Option<(f64, f64)>) -> Result<Points> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_point_predictions(BufReader::new(f), catalog, origin).with_context(|| format!("parsing {}", path.display()))
}

fn write_points(path: &Path, set: &Points) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_point_predictions(set, BufWriter::new(f))?;
    Ok(())
}

fn class_file(prefix: &str, class_id: usize) -> String {
    format!("{prefix}_{class_id}.grf")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(reefmap::io::write_bytes(path, text.as_bytes())?)
}

// ── survey → coarse labels ──────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Point-CSV with `session_id,seq,x,y,prob_<Class>…` or `lat,lon` columns
    #[arg(long)]
    input: Option<PathBuf>,
    /// Projection origin `lat,lon` for geographic input
    #[arg(long, value_parser = parse_pair)]
    origin: Option<(f64, f64)>,
}

pub fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<()> {
    let input = a
        .input
        .clone()
        .or_else(|| ctx.config.points.clone())
        .ok_or_else(|| UsageError("ingest needs --input (or `points` in the config file)".into()))?;
    let params = json!({ "origin": a.origin, "catalog": ctx.catalog });
    ctx.ws.run_stage("ingest", params, std::slice::from_ref(&input), |dir| {
        let set = read_points(&input, &ctx.catalog, a.origin)?;
        write_points(&dir.join("points.csv"), &set)?;
        let sessions: serde_json::Map<String, serde_json::Value> =
            set.sessions.iter().map(|(id, pts)| (id.clone(), json!(pts.len()))).collect();
        write_json(
            &dir.join("summary.json"),
            &json!({
                "points": set.len(),
                "sessions": sessions,
                "bounds": set.bounds(),
                "spacing_m": survey_spacing(&set).ok(),
            }),
        )?;
        eprintln!("ingest: {} points in {} sessions", set.len(), set.sessions.len());
        Ok(())
    })?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SpacingArgs {
    /// Point-CSV (default: ingest output)
    #[arg(long)]
    input: Option<PathBuf>,
}

pub fn spacing(ctx: &Ctx, a: &SpacingArgs) -> Result<()> {
    let input = ctx.points(&a.input);
    ctx.ws.run_stage("spacing", json!({ "catalog": ctx.catalog }), std::slice::from_ref(&input), |dir| {
        let set = read_points(&input, &ctx.catalog, None)?;
        let pooled = survey_spacing(&set)?;
        let per_session: serde_json::Map<String, serde_json::Value> = set
            .sessions
            .iter()
            .map(|(id, s)| {
                let mut d = consecutive_distances(s);
                d.sort_by(f64::total_cmp);
                (id.clone(), json!(d.get(d.len() / 2)))
            })
            .collect();
        write_json(&dir.join("spacing.json"), &json!({ "median_spacing_m": pooled, "sessions": per_session }))
            .map_err(Into::into)
    })?;
    let v: serde_json::Value = reefmap::io::read_json(&ctx.ws.stage_file("spacing", "spacing.json"))?;
    println!("{}", v["median_spacing_m"]);
    Ok(())
}

#[derive(Args, Debug)]
pub struct RasterizeArgs {
    /// Point-CSV (default: ingest output)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Cell size in meters (default: median consecutive spacing)
    #[arg(long)]
    grid_spacing: Option<f64>,
    /// Rasterize onto the grid of this raster instead
    #[arg(long)]
    reference: Option<PathBuf>,
}

pub fn rasterize(ctx: &Ctx, a: &RasterizeArgs) -> Result<()> {
    let input = ctx.points(&a.input);
    let spacing = a.grid_spacing.or(ctx.config.grid_spacing);
    let mut inputs = vec![input.clone()];
    if let Some(r) = &a.reference {
        inputs.push(reefmap::io::grf::sidecar_path(r));
    }
    let params = json!({ "grid_spacing": spacing, "reference": a.reference.is_some(), "catalog": ctx.catalog });
    ctx.ws.run_stage("rasterize", params, &inputs, |dir| {
        let set = read_points(&input, &ctx.catalog, None)?;
        let grid: Grid = match &a.reference {
            Some(r) => read_sidecar(r)?.grid()?,
            None => {
                let s = match spacing {
                    Some(s) => s,
                    None => survey_spacing(&set)?,
                };
                let (x0, y0, x1, y1) = set.bounds().ok_or(reefmap::Error::EmptySet)?;
                grid_from_extent(x0, y0, x1, y1, s)?
            }
        };
        eprintln!("rasterize: {}x{} cells at {} m", grid.width, grid.height, grid.spacing);
        let rasters = rasterize_set(&set, &grid)?;
        rasters.par_iter().try_for_each(|r| write_probability_raster(&dir.join(class_file("prob", r.class_id)), r))?;
        Ok(())
    })?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    /// Point-CSV the percentiles are computed from (default: ingest output)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Low and high percentile as fractions
    #[arg(long, value_parser = parse_pair)]
    percentiles: Option<(f64, f64)>,
    #[arg(long)]
    epsilon: Option<f64>,
}

pub fn normalize(ctx: &Ctx, a: &NormalizeArgs) -> Result<()> {
    let input = ctx.points(&a.input);
    let (p_low, p_high) = a.percentiles.or(ctx.config.percentiles).unwrap_or((DEFAULT_P_LOW, DEFAULT_P_HIGH));
    let epsilon = a.epsilon.or(ctx.config.epsilon).unwrap_or(DEFAULT_EPSILON);
    let n = ctx.catalog.len();
    let mut inputs = vec![input.clone()];
    inputs.extend((0..n).map(|c| ctx.ws.stage_file("rasterize", &class_file("prob", c))));
    let params = json!({ "percentiles": [p_low, p_high], "epsilon": epsilon, "catalog": ctx.catalog });
    ctx.ws.run_stage("normalize", params, &inputs, |dir| {
        let set = read_points(&input, &ctx.catalog, None)?;
        let stats = NormalizationParams::from_points(&set, p_low, p_high, epsilon)?;
        (0..n).into_par_iter().try_for_each(|c| -> Result<()> {
            let r: Probabilities = read_probability_raster(&ctx.ws.stage_file("rasterize", &class_file("prob", c)), c)?;
            let out = normalize_raster(&r, stats.stats(c)?, epsilon)?;
            write_probability_raster(&dir.join(class_file("norm", c)), &out)?;
            Ok(())
        })?;
        write_json(&dir.join("params.json"), &stats)?;
        Ok(())
    })?;
    Ok(())
}

pub fn label(ctx: &Ctx) -> Result<()> {
    let n = ctx.catalog.len();
    let inputs: Vec<PathBuf> = (0..n).map(|c| ctx.ws.stage_file("normalize", &class_file("norm", c))).collect();
    ctx.ws.run_stage("label", json!({ "catalog": ctx.catalog }), &inputs, |dir| {
        let rasters = inputs
            .par_iter()
            .enumerate()
            .map(|(c, p)| Ok(read_probability_raster(p, c)?))
            .collect::<Result<Vec<Probabilities>>>()?;
        let labels = argmax_label(&rasters, n)?;
        write_label_raster(&dir.join("labels.grf"), &labels)?;
        write_label_png(&dir.join("labels.png"), &labels, &ctx.catalog)?;
        write_json(
            &dir.join("summary.json"),
            &json!({
                "unlabeled_fraction": unlabeled_fraction(&labels),
                "class_pixels": labels.class_counts(&ctx.catalog)?,
            }),
        )?;
        Ok(())
    })?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct UpsampleArgs {
    /// Label raster (default: label output)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Raster whose grid (e.g. the orthophoto's) is the destination
    #[arg(long, conflicts_with = "grid_spacing")]
    reference: Option<PathBuf>,
    /// Destination cell size, keeping the source origin and extent
    #[arg(long)]
    grid_spacing: Option<f64>,
}

pub fn upsample(ctx: &Ctx, a: &UpsampleArgs) -> Result<()> {
    let input = a.input.clone().unwrap_or_else(|| ctx.ws.stage_file("label", "labels.grf"));
    let mut inputs = vec![input.clone()];
    if let Some(r) = &a.reference {
        inputs.push(reefmap::io::grf::sidecar_path(r));
    } else if a.grid_spacing.is_none() {
        return Err(UsageError("upsample needs --reference or --grid-spacing".into()).into());
    }
    let params = json!({ "grid_spacing": a.grid_spacing, "reference": a.reference.is_some() });
    ctx.ws.run_stage("upsample", params, &inputs, |dir| {
        let src: Labels = read_label_raster(&input)?;
        let dst: Grid = match (&a.reference, a.grid_spacing) {
            (Some(r), _) => read_sidecar(r)?.grid()?,
            (None, Some(s)) => {
                let (x0, y0, x1, y1) = src.grid.bounds();
                grid_from_extent(x0, y0, x1, y1, s)?.with_crs(src.grid.crs_tag.clone())
            }
            (None, None) => unreachable!("checked above"),
        };
        let out = upsample_nearest(&src, &dst)?;
        write_label_raster(&dir.join("labels.grf"), &out)?;
        write_label_png(&dir.join("labels.png"), &out, &ctx.catalog)?;
        Ok(())
    })?;
    Ok(())
}

// ── datasets and distillation ───────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct TileArgs {
    /// Label raster (default: upsample output, else label output)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Manual annotations on the same grid; they override machine labels
    #[arg(long)]
    manual: Option<PathBuf>,
    #[arg(long)]
    tile_size: Option<usize>,
    /// Minimum labeled fraction for a tile to be kept
    #[arg(long)]
    min_labeled: Option<f64>,
    #[arg(long)]
    max_replication: Option<u32>,
}

pub fn tile(ctx: &Ctx, a: &TileArgs) -> Result<()> {
    let input = a.input.clone().unwrap_or_else(|| ctx.latest_labels());
    let size = a.tile_size.or(ctx.config.tile_size).unwrap_or(DEFAULT_TILE_SIZE);
    let min_labeled = a.min_labeled.or(ctx.config.min_labeled).unwrap_or(DEFAULT_MIN_LABELED);
    let max_rep = a.max_replication.or(ctx.config.max_replication).unwrap_or(DEFAULT_MAX_REPLICATION);
    let mut inputs = vec![input.clone()];
    inputs.extend(a.manual.iter().cloned());
    let params = json!({
        "tile_size": size, "min_labeled": min_labeled, "max_replication": max_rep,
        "manual": a.manual.is_some(), "catalog": ctx.catalog,
    });
    ctx.ws.run_stage("dataset", params, &inputs, |dir| {
        let mut labels: Labels = read_label_raster(&input)?;
        if let Some(m) = &a.manual {
            labels = dataset::merge_manual_annotations(&labels, &read_label_raster(m)?)?;
        }
        let round = DatasetRound::initial(&labels, &ctx.catalog, size, min_labeled, max_rep)?;
        dataset::write_round(dir, &round, &TrainingHyperparams::default())?;
        eprintln!("tile: {} tiles kept", round.manifest.tiles.len());
        Ok(())
    })?;
    Ok(())
}

#[derive(Subcommand, Debug)]
pub enum DistillCommand {
    /// Build round 0 from a label raster (same as `tile`)
    Init(TileArgs),
    /// Write stand-in predicted masks for a round (noisy copies of its tiles)
    Mock {
        #[arg(long)]
        round: Option<u32>,
        /// Per-pixel probability of resampling a label
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build round n+1 from round n's `pred/` masks
    Next {
        #[arg(long)]
        round: Option<u32>,
    },
    /// Re-hash every round and check the manifest chain
    Verify,
}

fn latest(root: &Path) -> Result<u32> {
    dataset::latest_round(root)
        .ok_or_else(|| anyhow::Error::from(reefmap::Error::ChainBroken(format!("no dataset under {}", root.display()))))
}

pub fn distill(ctx: &Ctx, cmd: &DistillCommand) -> Result<()> {
    let root = ctx.dataset_root();
    match cmd {
        DistillCommand::Init(a) => tile(ctx, a),
        DistillCommand::Mock { round, noise, seed } => {
            let n = match round {
                Some(n) => *n,
                None => latest(&root)?,
            };
            let seed = seed.or(ctx.config.seed).unwrap_or(0);
            let r: DatasetRound<f64> = dataset::read_round(&root, n)?;
            let masks = dataset::mock_segment(&r.patches, &r.manifest.catalog, *noise, seed)?;
            let pred = dataset::round_dir(&root, n).join("pred");
            if pred.exists() {
                fs::remove_dir_all(&pred).with_context(|| format!("clearing {}", pred.display()))?;
            }
            dataset::write_masks(&root, n, &masks)?;
            eprintln!("distill mock: {} masks for round {n}", masks.len());
            Ok(())
        }
        DistillCommand::Next { round } => {
            let n = match round {
                Some(n) => *n,
                None => latest(&root)?,
            };
            let manifest = dataset::read_manifest::<f64>(&root, n)?;
            let masks = dataset::read_masks(&root, n)?;
            let next = dataset::distill_round(&manifest, &masks)?;
            // later rounds were built from other masks; they are stale now
            let mut stale = n + 1;
            while dataset::round_dir(&root, stale).exists() {
                let d = dataset::round_dir(&root, stale);
                fs::remove_dir_all(&d).with_context(|| format!("clearing {}", d.display()))?;
                stale += 1;
            }
            dataset::write_round(&root, &next, &TrainingHyperparams::default())?;
            eprintln!("distill next: round {} written", n + 1);
            Ok(())
        }
        DistillCommand::Verify => {
            let s = dataset::verify_chain(&root)?;
            println!("verified {} rounds, {} files", s.rounds, s.files_checked);
            Ok(())
        }
    }
}

// ── evaluation and analytics ────────────────────────────────────────────────

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth label raster; repeat once per zone
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// Predicted label raster, paired with --truth (default: latest labels)
    #[arg(long)]
    pred: Vec<PathBuf>,
    /// Zone name, paired with --truth
    #[arg(long)]
    zone: Vec<String>,
}

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let preds = if a.pred.is_empty() && a.truth.len() == 1 { vec![ctx.latest_labels()] } else { a.pred.clone() };
    if preds.len() != a.truth.len() {
        return Err(UsageError(format!("{} --truth but {} --pred", a.truth.len(), preds.len())).into());
    }
    if !a.zone.is_empty() && a.zone.len() != a.truth.len() {
        return Err(UsageError(format!("{} --truth but {} --zone", a.truth.len(), a.zone.len())).into());
    }
    let zones: Vec<String> =
        (0..a.truth.len()).map(|i| a.zone.get(i).cloned().unwrap_or_else(|| format!("zone_{}", i + 1))).collect();
    let inputs: Vec<PathBuf> = a.truth.iter().zip(&preds).flat_map(|(t, p)| [t.clone(), p.clone()]).collect();
    let params = json!({ "zones": zones, "catalog": ctx.catalog });
    ctx.ws.run_stage("evaluate", params, &inputs, |dir| {
        let counts = zones
            .iter()
            .zip(a.truth.iter().zip(&preds))
            .map(|(z, (t, p))| {
                let truth: Labels = read_label_raster(t)?;
                let pred: Labels = read_label_raster(p)?;
                let c = confusion_matrix(&truth, &pred, &ctx.catalog)
                    .with_context(|| format!("zone `{z}`: {} vs {}", t.display(), p.display()))?;
                Ok((z.clone(), c))
            })
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate_zones(&counts)?;
        write_json(&dir.join("report.json"), &report)?;
        let mut rows: Vec<&metrics::EvalReport> = report.zones.iter().collect();
        if rows.len() > 1 {
            rows.push(&report.total);
        }
        let table = metrics::format_table(&rows);
        write_text(&dir.join("report.txt"), &table)?;
        write_text(&dir.join("confusion.csv"), &metrics::confusion_csv(&report.total))?;
        Ok(())
    })?;
    print!("{}", fs::read_to_string(ctx.ws.stage_file("evaluate", "report.txt"))?);
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Label raster (default: latest labels)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Class names or indices to extract instances for (default: all)
    #[arg(long = "class")]
    classes: Vec<String>,
    /// 4 or 8
    #[arg(long)]
    connectivity: Option<u8>,
    /// Components smaller than this are dropped as speckle
    #[arg(long)]
    min_pixels: Option<usize>,
    /// Surveyed area in m² for densities (default: labeled area)
    #[arg(long)]
    area: Option<f64>,
    /// Point-CSV for relative abundance
    #[arg(long)]
    points: Option<PathBuf>,
    /// Presence threshold for relative abundance
    #[arg(long)]
    threshold: Option<f64>,
}

pub fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let input = a.input.clone().unwrap_or_else(|| ctx.latest_labels());
    let connectivity = Connectivity::try_from(a.connectivity.or(ctx.config.connectivity).unwrap_or(8))?;
    let min_pixels = a.min_pixels.or(ctx.config.min_pixels).unwrap_or(DEFAULT_MIN_PIXELS);
    let threshold = a.threshold.or(ctx.config.threshold).unwrap_or(DEFAULT_PRESENCE_THRESHOLD);
    let classes: Vec<usize> = if a.classes.is_empty() {
        (0..ctx.catalog.len()).collect()
    } else {
        a.classes
            .iter()
            .map(|c| {
                ctx.catalog
                    .index_of(c)
                    .or_else(|| c.parse().ok())
                    .ok_or_else(|| anyhow::Error::from(reefmap::Error::BadParameters(format!("unknown class `{c}`"))))
            })
            .collect::<Result<_>>()?
    };
    let mut inputs = vec![input.clone()];
    inputs.extend(a.points.iter().cloned());
    let params = json!({
        "classes": classes, "connectivity": connectivity, "min_pixels": min_pixels,
        "area": a.area, "threshold": threshold, "catalog": ctx.catalog,
    });
    ctx.ws.run_stage("analyze", params, &inputs, |dir| {
        let labels: Labels = read_label_raster(&input)?;
        let cover = analytics::class_cover(&labels, &ctx.catalog)?;
        write_json(&dir.join("cover.json"), &cover)?;
        let area = a.area.unwrap_or(cover.labeled_area_m2);
        let per_class = classes
            .par_iter()
            .map(|&c| Ok(analytics::connected_components(&labels, &ctx.catalog, c, connectivity, min_pixels)?))
            .collect::<Result<Vec<_>>>()?;
        let mut summary = serde_json::Map::new();
        for (&c, inst) in classes.iter().zip(&per_class) {
            let lengths: Vec<f64> = inst.iter().map(|i| i.length_m).collect();
            let stats = analytics::length_summary(&lengths).ok();
            summary.insert(
                ctx.catalog.name(c).unwrap_or("?").to_string(),
                json!({
                    "instances": inst.len(),
                    "density_per_m2": analytics::density(inst.len(), area)?,
                    "length": stats,
                    "length_text": stats.map(|s| s.format_cm()),
                }),
            );
        }
        write_json(&dir.join("summary.json"), &json!({ "surveyed_area_m2": area, "classes": summary }))?;
        let all: Vec<analytics::InstanceRecord> = per_class.into_iter().flatten().collect();
        write_text(&dir.join("instances.csv"), &analytics::instances_csv(&all, &ctx.catalog))?;
        write_json(
            &dir.join("instances.geojson"),
            &analytics::instances_geojson(&all, &ctx.catalog, &labels.grid.crs_tag),
        )?;
        if let Some(p) = &a.points {
            let set = read_points(p, &ctx.catalog, None)?;
            let freq = analytics::relative_abundance(&set, threshold)?;
            let named: serde_json::Map<String, serde_json::Value> =
                ctx.catalog.classes().iter().zip(&freq).map(|(c, f)| (c.name.clone(), json!(f))).collect();
            write_json(
                &dir.join("abundance.json"),
                &json!({ "threshold": threshold, "points": set.len(), "frequency": named }),
            )?;
        }
        Ok(())
    })?;
    print!("{}", fs::read_to_string(ctx.ws.stage_file("analyze", "summary.json"))?);
    Ok(())
}

// ── synthetic scenes and reporting ──────────────────────────────────────────

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Side of the square scene, meters
    #[arg(long, default_value_t = 50.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.5)]
    transect_spacing: f64,
    #[arg(long, default_value_t = 0.3)]
    point_step: f64,
    /// Standard deviation of the Gaussian noise added to one-hot probabilities
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Ground-truth cell size (default: point step)
    #[arg(long)]
    truth_spacing: Option<f64>,
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut p =
        SynthParams::new(a.seed.or(ctx.config.seed).unwrap_or(0), a.extent, a.transect_spacing, a.point_step, a.noise);
    p.truth_spacing = a.truth_spacing;
    let params = json!({ "scene": p, "catalog": ctx.catalog });
    ctx.ws.run_stage("synth", params, &[], |dir| {
        let scene = synth_scene::<f64>(&p, &ctx.catalog)?;
        write_points(&dir.join("points.csv"), &scene.survey_points)?;
        write_label_raster(&dir.join("truth.grf"), &scene.ground_truth)?;
        write_label_png(&dir.join("truth.png"), &scene.ground_truth, &ctx.catalog)?;
        write_json(
            &dir.join("scene.json"),
            &json!({ "params": p, "sites": scene.sites, "points": scene.survey_points.len() }),
        )?;
        Ok(())
    })?;
    Ok(())
}

/// Collects stage records and headline results into `run/report/report.md`.
pub fn report(ctx: &Ctx) -> Result<()> {
    let mut md = String::from("# Pipeline report\n\n## Stages\n\n");
    let run = ctx.ws.root.join("run");
    let mut stages: Vec<String> = match fs::read_dir(&run) {
        Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => bail!(reefmap::Error::io(&run, std::io::Error::from(std::io::ErrorKind::NotFound))),
    };
    stages.sort();
    for s in &stages {
        if let Ok(rec) =
            reefmap::io::read_json::<crate::stage::StageRecord>(&ctx.ws.stage_file(s, crate::stage::RECORD))
        {
            md.push_str(&format!("- `{s}`: {} inputs, {} outputs\n", rec.inputs.len(), rec.outputs.len()));
        }
    }
    if let Ok(t) = fs::read_to_string(ctx.ws.stage_file("evaluate", "report.txt")) {
        md.push_str("\n## Evaluation\n\n```\n");
        md.push_str(&t);
        md.push_str("```\n\nTotals pool pixel counts across zones.\n");
    }
    if let Ok(v) = reefmap::io::read_json::<serde_json::Value>(&ctx.ws.stage_file("analyze", "summary.json")) {
        md.push_str("\n## Instances\n\n| class | instances | density (1/m²) | length |\n|---|---|---|---|\n");
        if let Some(classes) = v["classes"].as_object() {
            for (name, c) in classes {
                md.push_str(&format!(
                    "| {name} | {} | {} | {} |\n",
                    c["instances"],
                    c["density_per_m2"],
                    c["length_text"].as_str().unwrap_or("-")
                ));
            }
        }
    }
    let root = ctx.dataset_root();
    if let Some(n) = dataset::latest_round(&root) {
        let m = dataset::read_manifest::<f64>(&root, n)?;
        let chain = match dataset::verify_chain(&root) {
            Ok(s) => format!("verified ({} files)", s.files_checked),
            Err(e) => format!("FAILED: {e}"),
        };
        md.push_str(&format!(
            "\n## Dataset\n\nLatest round {n}: {} tiles, {} samples after replication. Hash chain {chain}.\n",
            m.tiles.len(),
            m.tiles.iter().map(|t| t.replication as u64).sum::<u64>(),
        ));
    }
    write_text(&ctx.ws.stage_file("report", "report.md"), &md)?;
    print!("{md}");
    Ok(())
}
