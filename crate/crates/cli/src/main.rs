//! `coseg` command-line front end.
//!
//! Exit status: 0 on full success, 2 when some images failed, 1 on fatal
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coseg_core::metrics::EvalMode;
use coseg_core::pipeline::{
    evaluate, mask_edgemap, run_ablation_matrix, run_class, synthesize_dataset, verify_defaults, AblationSpec,
    ClassJob, JobMode, PipelineConfig, SynthOptions,
};
use coseg_core::tensor_io::{load_gray_png, load_mask_png, write_gray_png};
use log::info;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "coseg",
    version,
    about = "Co-segmentation of image collections from patch features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one class.
    Segment(SegmentArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Run the relevance-source x affinity-source matrix.
    Ablate(AblateArgs),
    /// Keep only the edges inside a mask.
    MaskEdges(MaskEdgesArgs),
    /// Write a synthetic dataset of planted classes.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("override `{kv}` is not key=value"))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Standard,
    Outliers,
    Loo,
}

#[derive(Args)]
struct SegmentArgs {
    /// JSON job file; flags given alongside it take precedence.
    #[arg(long)]
    job: Option<PathBuf>,
    #[arg(long)]
    relevance_pack: Option<PathBuf>,
    /// Defaults to the relevance pack.
    #[arg(long)]
    affinity_pack: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of outlier images to inject into the relevance fit.
    #[arg(long)]
    outliers: Option<usize>,
    /// Donor pack for outlier injection; may repeat.
    #[arg(long = "donor")]
    donors: Vec<PathBuf>,
    /// Shorthand for `--mode loo`.
    #[arg(long)]
    loo: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalModeArg {
    Coseg,
    Cosal,
}

impl From<EvalModeArg> for EvalMode {
    fn from(m: EvalModeArg) -> Self {
        match m {
            EvalModeArg::Coseg => EvalMode::Coseg,
            EvalModeArg::Cosal => EvalMode::Cosal,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "coseg")]
    mode: EvalModeArg,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// JSON matrix spec.
    #[arg(long)]
    spec: PathBuf,
    /// Write the JSON table here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct MaskEdgesArgs {
    #[arg(long)]
    edgemap: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    images: usize,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 20)]
    image_noise: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn path_field(job: &Value, key: &str, base: &Path) -> Option<PathBuf> {
    job.get(key).and_then(Value::as_str).map(|s| base.join(s))
}

fn build_job(args: &SegmentArgs) -> Result<ClassJob> {
    let file: Option<(Value, PathBuf)> = match &args.job {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let base = p.parent().unwrap_or(Path::new(".")).to_owned();
            Some((serde_json::from_str(&text)?, base))
        }
        None => None,
    };
    let from_file = |key: &str| file.as_ref().and_then(|(v, b)| path_field(v, key, b));

    let relevance_pack = args
        .relevance_pack
        .clone()
        .or_else(|| from_file("relevance_pack"))
        .context("--relevance-pack is required")?;
    let affinity_pack = args
        .affinity_pack
        .clone()
        .or_else(|| from_file("affinity_pack"))
        .unwrap_or_else(|| relevance_pack.clone());
    let images = args.images.clone().or_else(|| from_file("images"));
    let out = args
        .out
        .clone()
        .or_else(|| from_file("out"))
        .context("--out is required")?;

    let file_mode = file
        .as_ref()
        .and_then(|(v, _)| v.get("mode").and_then(Value::as_str).map(str::to_owned));
    let mode = match (args.loo, args.mode, file_mode.as_deref()) {
        (true, _, _) | (_, Some(ModeArg::Loo), _) | (_, None, Some("loo" | "leave-one-out")) => JobMode::LeaveOneOut,
        (_, Some(ModeArg::Outliers), _) | (_, None, Some("outliers")) => {
            let count = args
                .outliers
                .or_else(|| {
                    file.as_ref()
                        .and_then(|(v, _)| v.get("outliers")?.as_u64().map(|n| n as usize))
                })
                .context("outlier mode needs --outliers N")?;
            let mut donor_packs = args.donors.clone();
            if donor_packs.is_empty() {
                if let Some((v, base)) = &file {
                    if let Some(list) = v.get("donors").and_then(Value::as_array) {
                        donor_packs = list.iter().filter_map(Value::as_str).map(|s| base.join(s)).collect();
                    }
                }
            }
            if donor_packs.is_empty() && count > 0 {
                bail!("outlier mode needs at least one --donor pack");
            }
            JobMode::OutlierInjection { count, donor_packs }
        }
        (_, Some(ModeArg::Standard), _) | (_, None, None | Some("standard")) => {
            if args.outliers.is_some() {
                bail!("--outliers needs --mode outliers");
            }
            JobMode::Standard
        }
        (_, None, Some(other)) => bail!("unknown job mode `{other}`"),
    };
    Ok(ClassJob {
        relevance_pack,
        affinity_pack,
        images,
        out,
        mode,
    })
}

fn segment(args: &SegmentArgs) -> Result<bool> {
    let cfg = args.config.load()?;
    let job = build_job(args)?;
    let run = run_class(&job, &cfg)?;
    for (id, e) in &run.outcome.failures {
        eprintln!("failed: {id}: {e}");
    }
    info!("wrote {}", run.manifest_path.display());
    println!(
        "{}: {} masks, {} failures -> {}",
        run.outcome.class_id,
        run.outcome.results.len(),
        run.outcome.failures.len(),
        job.out.display()
    );
    Ok(!run.has_failures())
}

fn eval(args: &EvalArgs) -> Result<bool> {
    let mode = EvalMode::from(args.mode);
    let report = evaluate(&args.pred, &args.gt, mode)?;
    let json = report.to_json()?;
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{json}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    match args.report {
        ReportArg::Json => println!("{json}"),
        ReportArg::Table => print!("{}", report.to_table(mode)),
    }
    if report.f_undefined_count > 0 {
        eprintln!(
            "note: {} images have no ground-truth foreground",
            report.f_undefined_count
        );
    }
    Ok(true)
}

fn ablate(args: &AblateArgs) -> Result<bool> {
    let cfg = args.config.load()?;
    let spec = AblationSpec::load(&args.spec)?;
    let classes = spec.load_classes()?;
    let table = run_ablation_matrix(&classes, &spec.relevance_sources, &spec.affinity_sources, &cfg)?;
    print!("{}", table.to_table());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&table)?;
        std::fs::write(out, format!("{json}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(table.rows.iter().all(|r| r.failures == 0))
}

fn mask_edges(args: &MaskEdgesArgs) -> Result<bool> {
    let edges = load_gray_png(&args.edgemap)?;
    let mask = load_mask_png(&args.mask)?;
    write_gray_png(&args.out, &mask_edgemap(&edges, &mask))?;
    Ok(true)
}

fn synth(args: &SynthArgs) -> Result<bool> {
    let opts = SynthOptions {
        classes: args.classes,
        images_per_class: args.images,
        grid: args.grid,
        feature_dim: args.dim,
        separation: args.separation,
        noise: args.noise,
        image_noise: args.image_noise,
        seed: args.seed,
    };
    let written = synthesize_dataset(&opts, &args.out)?;
    for c in &written {
        println!(
            "{}: {}",
            c.class_id,
            c.affinity_pack.parent().unwrap_or(&c.affinity_pack).display()
        );
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = verify_defaults()
        .map_err(anyhow::Error::from)
        .and_then(|()| match &cli.command {
            Command::Segment(a) => segment(a),
            Command::Eval(a) => eval(a),
            Command::Ablate(a) => ablate(a),
            Command::MaskEdges(a) => mask_edges(a),
            Command::Synth(a) => synth(a),
        });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
