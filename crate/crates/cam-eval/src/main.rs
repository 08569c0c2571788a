//! `cam-eval`: batch evaluation of CAM explanation methods.
//!
//! Exit codes: 0 success, 2 config error, 3 IO error, 4 fake-check failure.

use cam_core::cam::MethodId;
use cam_core::eval::{
    emit_curves_svg, emit_report, fake_check, run_eval, ClassPolicy, EvalConfig, EvalOutcome,
    ImageSource, MetricId,
};
use cam_core::io::write_model;
use cam_core::nn::tinygap;
use cam_core::Error;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "cam-eval", version, about = "CAM explanation evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured methods and metrics over an image set.
    Run(RunArgs),
    /// Run the Fake-CAM sanity comparison and fail if it does not hold.
    FakeCheck(FakeCheckArgs),
    /// Generate a seeded desk-scale model file.
    GenModel(GenModelArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Model file (MCN1).
    #[arg(long)]
    model: PathBuf,

    /// Image source: a directory of PPMs, `@list` of CTF1 tensor paths, or
    /// `synth:N` seeded synthetic images.
    #[arg(long)]
    images: String,

    /// Target class policy: `top1`, `fixed:K`, or `@file` with
    /// `image_id,class` lines.
    #[arg(long, default_value = "top1")]
    classes: String,

    /// Comma-separated method ids.
    #[arg(
        long,
        default_value = "gap-cam,grad-cam,xgrad-cam,grad-cam++,smooth-grad-cam++,score-cam,fake-cam"
    )]
    methods: String,

    /// Comma-separated metric ids.
    #[arg(
        long,
        default_value = "avg-drop,avg-inc,insertion,deletion,coherency,complexity,adcc"
    )]
    metrics: String,

    /// Curve steps (default: min(pixels, 100)).
    #[arg(long)]
    steps: Option<usize>,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Worker pool size (default: $CAM_EVAL_JOBS, else 1).
    #[arg(long)]
    jobs: Option<usize>,

    /// JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,

    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Directory for per-curve SVG figures.
    #[arg(long = "svg-dir")]
    svg_dir: Option<PathBuf>,

    /// Skip xgrad-cam when grad-cam is also selected on a GAP-head model.
    #[arg(long)]
    dedupe_equivalent: bool,

    /// Noisy samples for smooth-grad-cam++.
    #[arg(long, default_value_t = 16)]
    smooth_samples: usize,

    /// Noise std dev as a fraction of the input value range.
    #[arg(long, default_value_t = 0.15)]
    smooth_sigma: f64,

    /// Use pre-softmax scores for score-cam channel increases.
    #[arg(long)]
    scorecam_logits: bool,
}

#[derive(Args)]
struct FakeCheckArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Maximum acceptable fake-cam ADCC.
    #[arg(long, default_value_t = 5.0)]
    threshold: f64,
}

#[derive(Args)]
struct GenModelArgs {
    /// Architecture id; `tinygap` is the built-in desk backbone.
    #[arg(long, default_value = "tinygap")]
    arch: String,

    /// Number of output classes.
    #[arg(long)]
    classes: usize,

    /// Weight initialization seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Square input size (input is 3 x size x size).
    #[arg(long, default_value_t = 32)]
    size: usize,

    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_ids<T: FromStr<Err = Error>>(csv: &str) -> Result<Vec<T>, Error> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn jobs_default(flag: Option<usize>) -> Result<usize, Error> {
    if let Some(j) = flag {
        return Ok(j);
    }
    match std::env::var("CAM_EVAL_JOBS") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad CAM_EVAL_JOBS value '{v}'"))),
        Err(_) => Ok(1),
    }
}

fn build_config(args: &RunArgs) -> Result<EvalConfig, Error> {
    let methods: Vec<MethodId> = parse_ids(&args.methods)?;
    let metrics: Vec<MetricId> = parse_ids(&args.metrics)?;
    let mut cfg = EvalConfig::new(&args.model, ImageSource::from_str(&args.images)?);
    cfg.classes = ClassPolicy::from_str(&args.classes)?;
    cfg.methods = methods;
    cfg.metrics = metrics;
    cfg.steps = args.steps;
    cfg.seed = args.seed;
    cfg.jobs = jobs_default(args.jobs)?;
    cfg.dedupe_equivalent = args.dedupe_equivalent;
    cfg.method_defaults.smooth_samples = args.smooth_samples;
    cfg.method_defaults.smooth_sigma_frac = args.smooth_sigma;
    cfg.method_defaults.scorecam_logits = args.scorecam_logits;
    cfg.json_path = args.json.clone();
    cfg.csv_path = args.csv.clone();
    cfg.svg_dir = args.svg_dir.clone();
    Ok(cfg)
}

fn emit_outputs(cfg: &EvalConfig, outcome: &EvalOutcome) -> Result<(), Error> {
    emit_report(
        &outcome.report,
        cfg.json_path.as_deref(),
        cfg.csv_path.as_deref(),
    )?;
    if let Some(dir) = &cfg.svg_dir {
        let emission = emit_curves_svg(&outcome.curves, dir)?;
        for skipped in &emission.skipped {
            eprintln!("warning: skipped svg for {skipped}");
        }
        eprintln!(
            "wrote {} svg file(s) to {}",
            emission.written.len(),
            dir.display()
        );
    }
    if let Some(p) = &cfg.json_path {
        eprintln!("wrote json report to {}", p.display());
    }
    if let Some(p) = &cfg.csv_path {
        eprintln!("wrote csv report to {}", p.display());
    }
    Ok(())
}

fn print_summary(outcome: &EvalOutcome) {
    let cell = |v: Option<f64>| match v {
        Some(v) => format!("{v:12.2}"),
        None => format!("{:>12}", "-"),
    };
    println!(
        "{:<20}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}",
        "method",
        "avg-drop",
        "avg-inc",
        "insertion",
        "deletion",
        "coherency",
        "complexity",
        "adcc",
        "adcc(mean3)"
    );
    for agg in &outcome.report.aggregates {
        println!(
            "{:<20}{}{}{}{}{}{}{}{:>12}",
            agg.method.to_string(),
            cell(agg.avg_drop),
            cell(agg.avg_increase),
            cell(agg.insertion_auc.map(|v| v * 100.0)),
            cell(agg.deletion_auc.map(|v| v * 100.0)),
            cell(agg.coherency),
            cell(agg.complexity),
            cell(agg.adcc),
            match agg.adcc_of_mean_triple {
                Some(v) => format!("{v:.2}"),
                None => "-".into(),
            },
        );
    }
    for notice in &outcome.report.notices {
        eprintln!("notice: {notice}");
    }
    eprintln!(
        "{} image(s) x {} method(s) in {:.2}s",
        outcome.report.rows.len() / outcome.report.aggregates.len().max(1),
        outcome.report.aggregates.len(),
        outcome.wall.as_secs_f64()
    );
}

fn run_command(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let outcome = run_eval(&cfg)?;
            print_summary(&outcome);
            emit_outputs(&cfg, &outcome)?;
            Ok(0)
        }
        Command::FakeCheck(args) => {
            let cfg = build_config(&args.run)?;
            let check = fake_check(&cfg, args.threshold)?;
            print!("{}", check.render_table());
            emit_outputs(&cfg, &check.outcome)?;
            eprintln!(
                "fake-check wall time {:.2}s",
                check.outcome.wall.as_secs_f64()
            );
            Ok(if check.passed { 0 } else { 4 })
        }
        Command::GenModel(args) => {
            if args.arch != "tinygap" {
                return Err(Error::Config(format!(
                    "unknown architecture '{}', expected 'tinygap'",
                    args.arch
                )));
            }
            if args.classes == 0 {
                return Err(Error::Config("classes must be at least 1".into()));
            }
            if args.size < 2 {
                return Err(Error::Config("size must be at least 2".into()));
            }
            let model = tinygap(args.classes, args.size, args.seed);
            write_model(&args.out, &model)?;
            eprintln!(
                "wrote tinygap model ({} classes, 3x{}x{}, seed {}) to {}",
                args.classes,
                args.size,
                args.size,
                args.seed,
                args.out.display()
            );
            Ok(0)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
