//! Command-line front end.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stmseg::pipeline::io::{save_gray, save_label_map};
use stmseg::pipeline::synth::{synth_generate, SceneKind, SceneParams};
use stmseg::pipeline::{
    preset, preset_names, run_and_write, ClusterMethod, PipelineConfig, PresetParams, RunMode,
};

#[derive(Parser, Debug)]
#[command(
    name = "stmseg",
    version,
    about = "Cartoon and texture segmentation of grayscale images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split images into cartoon (u) and texture (v) parts.
    Decompose(RunArgs),
    /// Multiphase segmentation of the cartoon part.
    Cartoon(RunArgs),
    /// Curvelet features and clustering of the texture part.
    Texture(RunArgs),
    /// Decomposition followed by both segmentations.
    Pipeline(RunArgs),
    /// Write a synthetic scene and its ground truth.
    Synth(SynthArgs),
    /// List the named parameter presets.
    Presets,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Input images (8/16-bit grayscale PNG or PGM). Several inputs are
    /// processed concurrently.
    inputs: Vec<PathBuf>,
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set, applied before the flags.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output file stem (single input only).
    #[arg(long)]
    stem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Low-pass scale of the decomposition.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Time step: the segmentation step for `cartoon` and `pipeline`, the
    /// graph-MBO step for `texture`.
    #[arg(long)]
    dt: Option<f64>,
    /// Graph-MBO time step (for `pipeline`).
    #[arg(long)]
    mbo_dt: Option<f64>,
    /// Spectrum threshold percentile in [0, 1).
    #[arg(long)]
    percentile: Option<f64>,
    /// Number of texture classes.
    #[arg(long)]
    clusters: Option<usize>,
    /// `kmeans` or `mbo`.
    #[arg(long)]
    method: Option<ClusterMethod>,
    /// Write the curvelet subbands as flat binaries plus a manifest.
    #[arg(long)]
    dump_subbands: bool,
    /// Write the feature matrix.
    #[arg(long)]
    export_features: bool,
    /// Skip the colour renderings of label maps.
    #[arg(long)]
    no_color: bool,
    /// Segment the input directly instead of its cartoon/texture parts.
    #[arg(long)]
    no_decompose: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// four-quadrant, ramp-bias, stripes or composite.
    kind: SceneKind,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    stem: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Scene parameters as JSON; the flags above override it.
    #[arg(long)]
    params: Option<PathBuf>,
}

fn build_config(args: &RunArgs, mode: RunMode) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    cfg.mode = mode;
    if let Some(name) = &args.preset {
        let p = preset(name)
            .with_context(|| format!("unknown preset '{name}' (see `stmseg presets`)"))?;
        p.apply(&mut cfg);
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if args.stem.is_some() {
        cfg.output.stem = args.stem.clone();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.sigma {
        cfg.decomposition.sigma = v;
    }
    if let Some(v) = args.lambda {
        cfg.cartoon.lambda = v;
    }
    if let Some(v) = args.mu {
        cfg.cartoon.mu = v;
    }
    if let Some(v) = args.beta {
        cfg.cartoon.beta = v;
    }
    if let Some(v) = args.dt {
        if mode == RunMode::Texture {
            cfg.clustering.mbo.dt = v;
        } else {
            cfg.cartoon.dt = v;
        }
    }
    if let Some(v) = args.mbo_dt {
        cfg.clustering.mbo.dt = v;
    }
    if let Some(v) = args.percentile {
        cfg.detection.percentile = v;
    }
    if let Some(v) = args.clusters {
        cfg.clustering.k = v;
    }
    if let Some(v) = args.method {
        cfg.clustering.method = v;
    }
    cfg.output.dump_subbands |= args.dump_subbands;
    cfg.output.export_features |= args.export_features;
    if args.no_color {
        cfg.output.colorized = false;
    }
    if args.no_decompose {
        cfg.decompose = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs, mode: RunMode) -> Result<()> {
    let base = build_config(&args, mode)?;
    let inputs: Vec<PathBuf> = if args.inputs.is_empty() {
        base.input.iter().cloned().collect()
    } else {
        args.inputs.clone()
    };
    if inputs.is_empty() {
        bail!("no input image given");
    }
    if inputs.len() > 1 && base.output.stem.is_some() {
        bail!("--stem needs a single input");
    }
    let configs: Vec<PipelineConfig> = inputs
        .into_iter()
        .map(|input| PipelineConfig {
            input: Some(input),
            ..base.clone()
        })
        .collect();
    let results: Vec<(PathBuf, stmseg::Result<_>)> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run_and_write(cfg)))
            .collect();
        configs
            .iter()
            .zip(handles)
            .map(|(cfg, h)| {
                (
                    cfg.input.clone().unwrap_or_default(),
                    h.join().expect("worker panicked"),
                )
            })
            .collect()
    });
    let mut failed = 0;
    for (input, result) in results {
        match result {
            Ok(report) => {
                let written = report
                    .outputs
                    .last()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default();
                println!("{}: ok ({written})", input.display());
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", input.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} input(s) failed");
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut params = match &args.params {
        Some(p) => serde_json::from_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => SceneParams::for_kind(args.kind),
    };
    if let Some(v) = args.width {
        params.width = v;
    }
    if let Some(v) = args.height {
        params.height = v;
    }
    if let Some(v) = args.noise {
        params.noise_std = v;
    }
    let scene = synth_generate(args.kind, &params, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let stem = args.stem.clone().unwrap_or_else(|| args.kind.to_string());
    let path = |suffix: &str| -> PathBuf { args.out.join(format!("{stem}{suffix}")) };
    save_gray(&path(".png"), &scene.image)?;
    save_label_map(&path(".cartoon_truth.png"), &scene.cartoon_truth)?;
    save_label_map(&path(".texture_truth.png"), &scene.texture_truth)?;
    let meta = serde_json::json!({
        "kind": args.kind,
        "seed": args.seed,
        "params": params,
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(path(".synth.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("{}", path(".png").display());
    Ok(())
}

fn list_presets() {
    for name in preset_names() {
        let p = preset(name).expect("listed preset exists");
        match p.params {
            PresetParams::Cartoon {
                lambda,
                mu,
                beta,
                dt_global,
                dt_local,
            } => println!(
                "{name:8} cartoon  lambda={lambda} mu={mu} beta={beta} dt={} (beta=0: {dt_global})",
                dt_local
            ),
            PresetParams::Texture { percentile, k, dt } => {
                println!("{name:8} texture  percentile={percentile} clusters={k} dt={dt}")
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(a) => run(a, RunMode::Decompose),
        Command::Cartoon(a) => run(a, RunMode::Cartoon),
        Command::Texture(a) => run(a, RunMode::Texture),
        Command::Pipeline(a) => run(a, RunMode::Full),
        Command::Synth(a) => synth(a),
        Command::Presets => {
            list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
