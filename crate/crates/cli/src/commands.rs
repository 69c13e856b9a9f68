//! One function per subcommand. Every command resolves its config up
//! front, refuses to clobber an existing run directory without `--force`,
//! and finishes by writing `run.json`: the resolved config echo that can be
//! passed straight back to `--config` to reproduce the run.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use sirst_core::eval::{detect, evaluate, pd_at_fa, roc, threshold_grid, Detector};
use sirst_core::io::{read_config, read_gray8, read_mask, write_gray16, write_mask, KvMap};
use sirst_core::metrics::{EvalCounts, MetricsReport, RocPoint};
use sirst_core::net::{load_checkpoint, Checkpoint};
use sirst_core::parallel;
use sirst_core::postproc::{DetectionSet, Mask};
use sirst_core::synth::{load_dataset, synth_dataset, Manifest};
use sirst_core::train::{train, write_trace_csv};
use sirst_core::{Error, Image, Result};

use crate::config::{Resolver, RunConfig};

#[derive(Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved key=value config; a valid `--config` input.
    pub config: KvMap,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json encode: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::decode(path, format!("json parse: {e}")))
}

/// Creates the run directory; an existing run.json means a prior run owns
/// it and only `--force` may overwrite.
fn prepare_out(out: &Path, force: bool) -> Result<()> {
    let marker = out.join("run.json");
    if marker.exists() && !force {
        return Err(Error::Config(format!(
            "{} already holds a run (pass --force to overwrite)",
            out.display()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_run_manifest(out: &Path, command: &str, config: KvMap, inputs: &[&Path]) -> Result<()> {
    write_json(
        &out.join("run.json"),
        &RunManifest {
            command: command.to_string(),
            config,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        },
    )
}

fn load_config_map(path: &Option<PathBuf>) -> Result<KvMap> {
    match path {
        Some(p) => read_config(p),
        None => Ok(KvMap::new()),
    }
}

fn dataset_manifest(root: &Path) -> Result<Manifest> {
    read_json(&root.join("manifest.json"))
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args)]
pub struct SynthArgs {
    /// Key=value config file or a previous run.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides synth.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut r = Resolver::new(load_config_map(&args.config)?);
    if let Some(seed) = args.seed {
        r.set("synth.seed", seed.to_string());
    }
    let rc = r.resolve()?;

    prepare_out(&args.out, args.force)?;
    let stats = synth_dataset(&rc.synth, &args.out, true)?;
    write_run_manifest(&args.out, "synth", rc.echo, &[])?;

    println!(
        "wrote {} samples ({} targets) to {}",
        stats.count,
        stats.targets,
        args.out.display()
    );
    println!(
        "scr within 5% (unclipped): {:.1}%  area bound met: {:.1}%  unclipped: {:.1}%",
        100.0 * stats.scr_ok_unclipped_fraction,
        100.0 * stats.spie_fraction,
        100.0 * stats.unclipped_fraction
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `sirst synth`.
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides train.seed and net.seed together.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides net.variant.
    #[arg(long)]
    pub variant: Option<String>,
    /// Continue from an earlier checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut r = Resolver::new(load_config_map(&args.config)?);
    if let Some(seed) = args.seed {
        r.set("train.seed", seed.to_string());
        r.set("net.seed", seed.to_string());
    }
    if let Some(variant) = &args.variant {
        r.set("net.variant", variant.clone());
    }
    let rc = r.resolve()?;

    let dataset = load_dataset(&args.data)?;
    let resume = match &args.resume {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };

    prepare_out(&args.out, args.force)?;
    let outcome = train(&dataset, &rc.net, &rc.train, Some(&args.out), resume)?;
    write_trace_csv(&args.out.join("trace.csv"), &outcome.trace)?;
    write_run_manifest(&args.out, "train", rc.echo, &[&args.data])?;

    let last = outcome.trace.last();
    println!(
        "trained to step {} on {} samples; final loss {}",
        outcome.final_step,
        dataset.len(),
        last.map(|r| format!("{:.4}", r.loss)).unwrap_or_else(|| "-".into())
    );
    println!("checkpoint: {}", args.out.join("final.ckpt").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// detector selection shared by detect / eval / roc

#[derive(Args)]
pub struct DetectorArgs {
    /// Network checkpoint; required for the net detector.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// net (default), top_hat, or max_median.
    #[arg(long)]
    pub detector: Option<String>,
}

fn build_detector(sel: &DetectorArgs, rc: &RunConfig) -> Result<Detector> {
    let name = sel.detector.as_deref().unwrap_or("net");
    match name {
        "net" => {
            let path = sel.checkpoint.as_ref().ok_or_else(|| {
                Error::Config("the net detector needs --checkpoint".into())
            })?;
            let ck: Checkpoint = load_checkpoint(path)?;
            Detector::from_checkpoint(ck, rc.normalize)
        }
        "top_hat" | "tophat" => Ok(Detector::TopHat { window: rc.window }),
        "max_median" | "maxmedian" => Ok(Detector::MaxMedian { window: rc.window }),
        other => Err(Error::Config(format!("unknown detector {other:?}"))),
    }
}

fn load_images(root: &Path, manifest: &Manifest) -> Result<Vec<Image>> {
    let mut out = Vec::with_capacity(manifest.samples.len());
    for name in &manifest.samples {
        out.push(read_gray8(&root.join("images").join(format!("{name}.png")))?);
    }
    Ok(out)
}

fn load_masks(dir: &Path, names: &[String]) -> Result<Vec<Mask>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        out.push(read_mask(&dir.join(format!("{name}.png")))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// detect

#[derive(Args)]
pub struct DetectArgs {
    /// Dataset directory.
    pub data: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

/// Copy of the image with every detected bbox outlined at full intensity.
fn overlay(image: &Image, set: &DetectionSet) -> Image {
    let mut img = image.clone();
    for c in &set.components {
        let (y0, x0, y1, x1) = c.bbox;
        for x in x0..=x1 {
            img.set(y0, x, 1.0);
            img.set(y1, x, 1.0);
        }
        for y in y0..=y1 {
            img.set(y, x0, 1.0);
            img.set(y, x1, 1.0);
        }
    }
    img
}

pub fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let rc = Resolver::new(load_config_map(&args.config)?).resolve()?;
    let det = build_detector(&args.detector, &rc)?;

    let manifest = dataset_manifest(&args.data)?;
    let images = load_images(&args.data, &manifest)?;

    prepare_out(&args.out, args.force)?;
    for sub in ["prob", "masks", "detections", "overlay"] {
        let dir = args.out.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let results = parallel::ordered_map(images.len(), |i| detect(&det, &images[i]));
    let mut components = 0usize;
    for (i, res) in results.into_iter().enumerate() {
        let d = res?;
        let name = &manifest.samples[i];
        write_gray16(&args.out.join("prob").join(format!("{name}.png")), &d.prob)?;
        write_mask(&args.out.join("masks").join(format!("{name}.png")), &d.mask)?;
        write_json(&args.out.join("detections").join(format!("{name}.json")), &d.set)?;
        let ov = overlay(&images[i], &d.set);
        sirst_core::io::write_gray8(&args.out.join("overlay").join(format!("{name}.png")), &ov)?;
        components += d.set.components.len();
    }
    write_run_manifest(&args.out, "detect", rc.echo, &[&args.data])?;

    println!(
        "{} detector: {} images, {} components -> {}",
        det.name(),
        images.len(),
        components,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
pub struct EvalArgs {
    /// Dataset directory holding ground truth.
    pub data: PathBuf,
    /// Detection run to score; omitted means detect in-process.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides eval.d_thresh.
    #[arg(long)]
    pub d_thresh: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Serialize, Deserialize)]
pub struct PerImageRow {
    pub name: String,
    pub counts: EvalCounts,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut r = Resolver::new(load_config_map(&args.config)?);
    if let Some(d) = args.d_thresh {
        r.set("eval.d_thresh", d.to_string());
    }
    let rc = r.resolve()?;
    let d_thresh = rc.d_thresh;

    let manifest = dataset_manifest(&args.data)?;
    let gts = load_masks(&args.data.join("masks"), &manifest.samples)?;

    let (preds, inputs): (Vec<Mask>, Vec<&Path>) = match &args.pred {
        Some(pred) => {
            if args.detector.checkpoint.is_some() || args.detector.detector.is_some() {
                return Err(Error::Config(
                    "--pred and an in-process detector are mutually exclusive".into(),
                ));
            }
            let preds = load_masks(&pred.join("masks"), &manifest.samples)?;
            (preds, vec![&args.data, pred])
        }
        None => {
            let det = build_detector(&args.detector, &rc)?;
            let images = load_images(&args.data, &manifest)?;
            let results = parallel::ordered_map(images.len(), |i| {
                detect(&det, &images[i]).map(|d| d.mask)
            });
            let mut preds = Vec::with_capacity(results.len());
            for res in results {
                preds.push(res?);
            }
            (preds, vec![&args.data])
        }
    };

    let report = evaluate(&preds, &gts, d_thresh)?;
    let per_image: Vec<PerImageRow> = manifest
        .samples
        .iter()
        .zip(preds.iter().zip(&gts))
        .map(|(name, (p, g))| {
            sirst_core::eval::eval_counts(p, g, d_thresh)
                .map(|counts| PerImageRow { name: name.clone(), counts })
        })
        .collect::<Result<_>>()?;

    prepare_out(&args.out, args.force)?;
    write_json(&args.out.join("metrics.json"), &report)?;
    write_json(&args.out.join("per_image.json"), &per_image)?;
    write_run_manifest(&args.out, "eval", rc.echo, &inputs)?;

    let pd = if report.pd_defined { format!("{:.4}", report.pd) } else { "-".into() };
    println!(
        "iou {:.4}  pd {}  fa {:.3e}  (d_thresh {})",
        report.iou, pd, report.fa, d_thresh
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// roc

#[derive(Args)]
pub struct RocArgs {
    /// Dataset directory.
    pub data: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d_thresh: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    use std::io::Write as _;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "threshold,pd,fa").map_err(|e| Error::io(path, e))?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.pd, p.fa).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_roc(args: &RocArgs) -> Result<()> {
    let mut r = Resolver::new(load_config_map(&args.config)?);
    if let Some(d) = args.d_thresh {
        r.set("eval.d_thresh", d.to_string());
    }
    let rc = r.resolve()?;
    let d_thresh = rc.d_thresh;
    let det = build_detector(&args.detector, &rc)?;

    let manifest = dataset_manifest(&args.data)?;
    let images = load_images(&args.data, &manifest)?;
    let gts = load_masks(&args.data.join("masks"), &manifest.samples)?;

    let results = parallel::ordered_map(images.len(), |i| det.prob_map(&images[i]));
    let mut maps = Vec::with_capacity(results.len());
    for res in results {
        maps.push(res?);
    }
    let points = roc(&maps, &gts, &threshold_grid(rc.thresholds), d_thresh)?;

    prepare_out(&args.out, args.force)?;
    write_roc_csv(&args.out.join("roc.csv"), &points)?;
    write_json(&args.out.join("roc.json"), &points)?;
    write_run_manifest(&args.out, "roc", rc.echo, &[&args.data])?;

    println!(
        "{} detector: {} operating points over {} images -> {}",
        det.name(),
        points.len(),
        images.len(),
        args.out.display()
    );
    for budget in [1e-3, 1e-4] {
        match pd_at_fa(&points, budget) {
            Some(pd) => println!("pd at fa <= {budget:.0e}: {pd:.4}"),
            None => println!("pd at fa <= {budget:.0e}: no operating point"),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report

#[derive(Args)]
pub struct ReportArgs {
    /// Eval or roc run directories to aggregate.
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_at_fa_1e3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_at_fa_1e4: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    if args.runs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let mut rows = Vec::new();
    for run in &args.runs {
        let manifest: RunManifest = read_json(&run.join("run.json"))?;
        let metrics_path = run.join("metrics.json");
        let metrics: Option<MetricsReport> =
            if metrics_path.exists() { Some(read_json(&metrics_path)?) } else { None };
        let roc_path = run.join("roc.json");
        let (pd3, pd4) = if roc_path.exists() {
            let points: Vec<RocPoint> = read_json(&roc_path)?;
            (pd_at_fa(&points, 1e-3), pd_at_fa(&points, 1e-4))
        } else {
            (None, None)
        };
        rows.push(ReportRow {
            run: run.display().to_string(),
            command: manifest.command,
            metrics,
            pd_at_fa_1e3: pd3,
            pd_at_fa_1e4: pd4,
        });
    }

    prepare_out(&args.out, args.force)?;
    write_json(&args.out.join("report.json"), &rows)?;

    let mut md = String::from("| run | command | IoU | Pd | Fa | Pd@Fa<=1e-3 | Pd@Fa<=1e-4 |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for row in &rows {
        let (iou, pd, fa) = match &row.metrics {
            Some(m) => (
                format!("{:.4}", m.iou),
                if m.pd_defined { format!("{:.4}", m.pd) } else { "-".into() },
                format!("{:.3e}", m.fa),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            row.run,
            row.command,
            iou,
            pd,
            fa,
            fmt_opt(row.pd_at_fa_1e3),
            fmt_opt(row.pd_at_fa_1e4)
        ));
    }
    let md_path = args.out.join("report.md");
    std::fs::write(&md_path, &md).map_err(|e| Error::io(&md_path, e))?;
    write_run_manifest(
        &args.out,
        "report",
        KvMap::new(),
        &args.runs.iter().map(PathBuf::as_path).collect::<Vec<_>>(),
    )?;

    print!("{md}");
    Ok(())
}
