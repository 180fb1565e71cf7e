//! `lfsr` — light-field spatial super-resolution pipeline.
//!
//! Subcommands cover the whole loop: synthesize scenes, train both network
//! stages, super-resolve, evaluate against references, and render plots.
//! Runtime failures print a single `error: ...` line on stderr and exit 1;
//! usage errors exit 2 via the argument parser.

mod plot;
mod synth;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lfsr_core::checkpoint::{load_ato_model, load_reg_model};
use lfsr_core::eval::{evaluate, pair_by_name, super_resolve, EvalReport, DEFAULT_PR_THRESHOLDS};
use lfsr_core::io::{
    list_scenes, load_scene, save_scene_color, save_scene_gray, upsample_chroma, SceneMeta,
};
use lfsr_core::lightfield::{synth_lightfield, SynthSpec};
use lfsr_core::train::{downsample_scene, train_stage1, train_stage2, TraceEntry, TrainConfig};
use lfsr_core::{Disparity, EpiOrientation, Error, LightField, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "lfsr",
    version,
    about = "Light-field spatial super-resolution pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a synthetic light-field scene from a procedural texture.
    GenerateSynthetic(GenerateArgs),
    /// Train the stage-1 view-synthesis network on HR scenes.
    TrainSr(TrainSrArgs),
    /// Train the stage-2 structural-consistency network.
    TrainReg(TrainRegArgs),
    /// Super-resolve one scene with trained checkpoints.
    SuperResolve(SuperResolveArgs),
    /// Evaluate paired LR/HR scene sets and write report.json + pr.csv.
    Evaluate(EvaluateArgs),
    /// Render a report's heatmap and PR curve, or a scene's EPI strips.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Constant disparity between adjacent views, in pixels per step.
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    disparity: f64,
    /// Angular resolution as MxN.
    #[arg(long, value_parser = parse_pair, default_value = "7x7")]
    angular: (usize, usize),
    /// Spatial size of every output view as HxW.
    #[arg(long, value_parser = parse_pair, default_value = "128x128")]
    size: (usize, usize),
    /// Texture seed; falls back to LFSR_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Scene name for meta.json (default: the output directory name).
    #[arg(long)]
    name: Option<String>,
    /// Also write a bicubically downsampled copy of the scene here.
    #[arg(long)]
    lr_out: Option<PathBuf>,
    /// Downsampling factor for --lr-out (2 or 4).
    #[arg(long, default_value_t = 2)]
    alpha: usize,
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSrArgs {
    /// Root directory of HR training scenes.
    #[arg(long)]
    scenes: PathBuf,
    /// Output directory for checkpoints and the training trace.
    #[arg(long)]
    out: PathBuf,
    /// Super-resolution factor (2 or 4).
    #[arg(long)]
    alpha: Option<usize>,
    /// Angular resolution as MxN.
    #[arg(long, value_parser = parse_pair)]
    angular: Option<(usize, usize)>,
    /// RNG seed; beats the config file and the LFSR_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// key=value config file applied over defaults (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRegArgs {
    /// Root directory of HR training scenes.
    #[arg(long)]
    scenes: PathBuf,
    /// Stage-1 checkpoint that produces the intermediates.
    #[arg(long)]
    model: PathBuf,
    /// Output directory for checkpoints and the training trace.
    #[arg(long)]
    out: PathBuf,
    /// Weight of the parallax-gradient term in the stage-2 loss.
    #[arg(long)]
    lambda: Option<f64>,
    /// RNG seed; beats the config file and the LFSR_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// key=value config file applied over defaults (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SuperResolveArgs {
    /// Input LR scene directory.
    #[arg(long)]
    scene: PathBuf,
    /// Stage-1 checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Optional stage-2 checkpoint.
    #[arg(long)]
    reg: Option<PathBuf>,
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Root of LR input scenes.
    #[arg(long)]
    lr: PathBuf,
    /// Root of HR reference scenes.
    #[arg(long)]
    hr: PathBuf,
    /// Stage-1 checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Optional stage-2 checkpoint.
    #[arg(long)]
    reg: Option<PathBuf>,
    /// Output directory for report.json and pr.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Evaluation report to render (per-view heatmap + PR curve).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Scene directory whose central EPI strips to render.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output directory for PNGs.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenerateSynthetic(args) => run_generate(args),
        Cmd::TrainSr(args) => run_train_sr(args),
        Cmd::TrainReg(args) => run_train_reg(args),
        Cmd::SuperResolve(args) => run_super_resolve(args),
        Cmd::Evaluate(args) => run_evaluate(args),
        Cmd::Plot(args) => run_plot(args),
    }
}

fn parse_pair(text: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN (e.g. 7x7), got {text:?}"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected MxN (e.g. 7x7), got {text:?}"))
    };
    let pair = (parse(a)?, parse(b)?);
    if pair.0 == 0 || pair.1 == 0 {
        return Err("both sides of MxN must be positive".into());
    }
    Ok(pair)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("LFSR_SEED") {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::BadConfig {
                key: "LFSR_SEED".into(),
                reason: format!("expected an unsigned integer, got {text:?}"),
            }),
        Err(_) => Ok(None),
    }
}

/// Layer a train config: defaults (or a caller-provided base), then the
/// LFSR_SEED variable, then the key=value config file, then explicit flags.
struct TrainOverrides {
    alpha: Option<usize>,
    angular: Option<(usize, usize)>,
    seed: Option<u64>,
    epochs: Option<usize>,
    lambda: Option<f64>,
}

fn build_train_config(
    base: TrainConfig,
    config_path: Option<&Path>,
    over: TrainOverrides,
) -> Result<TrainConfig> {
    let mut cfg = base;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    if let Some(path) = config_path {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(alpha) = over.alpha {
        cfg.alpha = alpha;
    }
    if let Some(angular) = over.angular {
        cfg.angular_res = angular;
    }
    if let Some(seed) = over.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = over.epochs {
        cfg.epochs = epochs;
    }
    if let Some(lambda) = over.lambda {
        cfg.lambda_epi = lambda;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_config_file(cfg: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::BadConfig {
            key: line.into(),
            reason: "expected key=value".into(),
        })?;
        set_config_key(cfg, key.trim(), value.trim())?;
    }
    Ok(())
}

fn set_config_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let bad = |reason: String| Error::BadConfig {
        key: key.into(),
        reason,
    };
    let invalid = |value: &str| bad(format!("invalid value {value:?}"));
    match key {
        "stage" => cfg.stage = value.parse().map_err(|_| invalid(value))?,
        "lr_init" => cfg.lr_init = value.parse().map_err(|_| invalid(value))?,
        "lr_decay" => cfg.lr_decay = value.parse().map_err(|_| invalid(value))?,
        "lr_decay_every" => cfg.lr_decay_every = value.parse().map_err(|_| invalid(value))?,
        "batch_size" => cfg.batch_size = value.parse().map_err(|_| invalid(value))?,
        "patch_hr" => cfg.patch_hr = value.parse().map_err(|_| invalid(value))?,
        "alpha" => cfg.alpha = value.parse().map_err(|_| invalid(value))?,
        "angular_res" => cfg.angular_res = parse_pair(value).map_err(bad)?,
        "seed" => cfg.seed = value.parse().map_err(|_| invalid(value))?,
        "epochs" => cfg.epochs = value.parse().map_err(|_| invalid(value))?,
        "lambda_epi" => cfg.lambda_epi = value.parse().map_err(|_| invalid(value))?,
        "checkpoint_every" => cfg.checkpoint_every = value.parse().map_err(|_| invalid(value))?,
        "keep_checkpoints" => cfg.keep_checkpoints = value.parse().map_err(|_| invalid(value))?,
        _ => return Err(bad("unknown key".into())),
    }
    Ok(())
}

fn scene_display_name(dir: &Path, meta_name: &str) -> String {
    if !meta_name.is_empty() {
        return meta_name.to_string();
    }
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into())
}

fn load_training_scenes(root: &Path) -> Result<Vec<LightField<f32>>> {
    let dirs = list_scenes(root)?;
    let mut out = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        out.push(load_scene(dir)?.lf);
    }
    Ok(out)
}

fn load_named_scenes(root: &Path) -> Result<Vec<(String, LightField<f32>)>> {
    let dirs = list_scenes(root)?;
    let mut out = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let scene = load_scene(dir)?;
        out.push((scene_display_name(dir, &scene.meta.name), scene.lf));
    }
    Ok(out)
}

fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let text =
        serde_json::to_string_pretty(trace).map_err(|e| Error::json("encoding trace", e))?;
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn fmt_db(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.4}")
    } else if value > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    if args.lr_out.is_some() && args.alpha != 2 && args.alpha != 4 {
        return Err(Error::BadAlpha { alpha: args.alpha });
    }
    let (m, n) = args.angular;
    let (h, w) = args.size;
    // The renderer crops a warp-plus-kernel margin from the texture; feed it
    // a texture padded by exactly that margin so views come out at --size.
    let dmax = args.disparity.abs();
    let margin_y = (dmax * (m as f64 - 1.0) / 2.0).ceil() as usize + 2;
    let margin_x = (dmax * (n as f64 - 1.0) / 2.0).ceil() as usize + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture = synth::procedural_texture::<f32>(h + 2 * margin_y, w + 2 * margin_x, &mut rng);
    let spec = SynthSpec {
        texture,
        disparity: Disparity::Constant(args.disparity),
        angular_res: (m, n),
    };
    let lf = synth_lightfield(&spec)?;

    let name = args
        .name
        .clone()
        .unwrap_or_else(|| scene_display_name(&args.out, ""));
    let meta = SceneMeta {
        m,
        n,
        h,
        w,
        disparity: Some(args.disparity),
        name: name.clone(),
    };
    save_scene_gray(&args.out, &lf, &meta)?;
    println!(
        "wrote {}x{} views of {}x{} px to {}",
        m,
        n,
        h,
        w,
        args.out.display()
    );

    if let Some(lr_out) = &args.lr_out {
        let lr = downsample_scene(&lf, args.alpha)?;
        let (lh, lw) = lr.spatial_res();
        let meta_lr = SceneMeta {
            m,
            n,
            h: lh,
            w: lw,
            disparity: Some(args.disparity / args.alpha as f64),
            name,
        };
        save_scene_gray(lr_out, &lr, &meta_lr)?;
        println!(
            "wrote {}x{} views of {}x{} px to {}",
            m,
            n,
            lh,
            lw,
            lr_out.display()
        );
    }
    Ok(())
}

fn run_train_sr(args: TrainSrArgs) -> Result<()> {
    let cfg = build_train_config(
        TrainConfig {
            stage: 1,
            ..TrainConfig::default()
        },
        args.config.as_deref(),
        TrainOverrides {
            alpha: args.alpha,
            angular: args.angular,
            seed: args.seed,
            epochs: args.epochs,
            lambda: None,
        },
    )?;
    let scenes = load_training_scenes(&args.scenes)?;
    let (_, trace) = train_stage1(&scenes, &cfg, Some(&args.out))?;
    write_trace(&args.out.join("trace-stage1.json"), &trace)?;
    println!(
        "trained stage 1 for {} epoch(s) on {} scene(s)",
        cfg.epochs,
        scenes.len()
    );
    if let Some(last) = trace.last() {
        println!("final loss {:.6}", last.loss.value);
    }
    println!("checkpoint: {}", args.out.join("ato.ckpt").display());
    Ok(())
}

fn run_train_reg(args: TrainRegArgs) -> Result<()> {
    let (ato, _) = load_ato_model(&args.model)?;
    let cfg = build_train_config(
        TrainConfig {
            stage: 2,
            alpha: ato.config.alpha,
            angular_res: ato.config.angular_res,
            ..TrainConfig::default()
        },
        args.config.as_deref(),
        TrainOverrides {
            alpha: None,
            angular: None,
            seed: args.seed,
            epochs: args.epochs,
            lambda: args.lambda,
        },
    )?;
    if cfg.alpha != ato.config.alpha || cfg.angular_res != ato.config.angular_res {
        return Err(Error::ConfigMismatch {
            field: "alpha/angular_res".into(),
            model: format!("{}/{:?}", ato.config.alpha, ato.config.angular_res),
            input: format!("{}/{:?}", cfg.alpha, cfg.angular_res),
        });
    }
    let scenes = load_training_scenes(&args.scenes)?;
    let (_, trace) = train_stage2(&scenes, &ato, &cfg, Some(&args.out))?;
    write_trace(&args.out.join("trace-stage2.json"), &trace)?;
    println!(
        "trained stage 2 for {} epoch(s) on {} scene(s)",
        cfg.epochs,
        scenes.len()
    );
    if let Some(last) = trace.last() {
        println!("final loss {:.6}", last.loss.value);
    }
    println!("checkpoint: {}", args.out.join("reg.ckpt").display());
    Ok(())
}

fn run_super_resolve(args: SuperResolveArgs) -> Result<()> {
    let (ato, _) = load_ato_model(&args.model)?;
    let reg = match &args.reg {
        Some(path) => Some(load_reg_model(path)?.0),
        None => None,
    };
    let scene = load_scene(&args.scene)?;
    let (lh, lw) = scene.lf.spatial_res();

    let start = Instant::now();
    let sr = super_resolve(&scene.lf, &ato, reg.as_ref())?;
    let elapsed = start.elapsed().as_secs_f64();

    let alpha = ato.config.alpha;
    let (m, n) = sr.angular_res();
    let (h, w) = sr.spatial_res();
    let meta = SceneMeta {
        m,
        n,
        h,
        w,
        // Disparity is measured in pixels, so it scales with the output grid.
        disparity: scene.meta.disparity.map(|d| d * alpha as f64),
        name: scene.meta.name.clone(),
    };
    match &scene.chroma {
        Some(chroma) => {
            let up = upsample_chroma(chroma, alpha)?;
            save_scene_color(&args.out, &sr, &up, &meta)?;
        }
        None => save_scene_gray(&args.out, &sr, &meta)?,
    }
    println!(
        "super-resolved {}x{} -> {}x{} px ({} views, {}) in {:.2}s",
        lh,
        lw,
        h,
        w,
        m * n,
        if reg.is_some() {
            "regularized"
        } else {
            "stage 1 only"
        },
        elapsed
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let (ato, _) = load_ato_model(&args.model)?;
    let reg = match &args.reg {
        Some(path) => Some(load_reg_model(path)?.0),
        None => None,
    };
    let pairs = pair_by_name(load_named_scenes(&args.lr)?, load_named_scenes(&args.hr)?)?;
    let alpha = ato.config.alpha;
    for (name, lr, hr) in &pairs {
        if lr.angular_res() != hr.angular_res() {
            return Err(Error::ConfigMismatch {
                field: format!("angular_res of scene {name:?}"),
                model: format!("{:?}", lr.angular_res()),
                input: format!("{:?}", hr.angular_res()),
            });
        }
        let (lh, lw) = lr.spatial_res();
        let (hh, hw) = hr.spatial_res();
        if (hh, hw) != (lh * alpha, lw * alpha) {
            return Err(Error::ConfigMismatch {
                field: format!("spatial_res of scene {name:?}"),
                model: format!("{}x{} at alpha {}", lh, lw, alpha),
                input: format!("{}x{}", hh, hw),
            });
        }
    }

    let report = evaluate(&pairs, &ato, reg.as_ref(), &DEFAULT_PR_THRESHOLDS)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    let report_path = args.out.join("report.json");
    report.write_json(&report_path)?;
    let csv_path = args.out.join("pr.csv");
    std::fs::write(&csv_path, report.pr_csv())
        .map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;

    println!("evaluated {} scene pair(s)", report.scenes.len());
    println!("psnr_mean = {} dB", fmt_db(report.psnr_mean));
    println!("ssim_mean = {:.6}", report.ssim_mean);
    println!(
        "center-corner gap = {} dB",
        fmt_db(report.per_view_psnr.center_corner_gap)
    );
    println!("runtime = {:.3} s/scene", report.runtime_s);
    println!("report: {}", report_path.display());
    println!("pr csv: {}", csv_path.display());
    if report.excluded_infinite_psnr > 0 {
        eprintln!(
            "warning: {} infinite PSNR value(s) excluded from means",
            report.excluded_infinite_psnr
        );
    }
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    if args.report.is_none() && args.scene.is_none() {
        return Err(Error::BadConfig {
            key: "plot".into(),
            reason: "pass --report and/or --scene".into(),
        });
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;

    if let Some(report_path) = &args.report {
        let text = std::fs::read_to_string(report_path)
            .map_err(|e| Error::io(format!("reading {}", report_path.display()), e))?;
        let report = EvalReport::from_json(&text)?;
        let heat = args.out.join("psnr_heatmap.png");
        plot::heatmap_png(&report.per_view_psnr, &heat)?;
        println!("wrote {}", heat.display());
        let pr = args.out.join("pr_curve.png");
        plot::pr_png(&report.pr_points, &pr)?;
        println!("wrote {}", pr.display());
    }

    if let Some(scene_dir) = &args.scene {
        let scene = load_scene(scene_dir)?;
        let (m, n) = scene.lf.angular_res();
        let (h, w) = scene.lf.spatial_res();
        let horizontal = scene.lf.epi(EpiOrientation::Horizontal, (h / 2, m / 2))?;
        let vertical = scene.lf.epi(EpiOrientation::Vertical, (w / 2, n / 2))?;
        let h_path = args.out.join("epi_horizontal.png");
        plot::epi_strip_png(&horizontal, 12, &h_path)?;
        println!("wrote {}", h_path.display());
        let v_path = args.out.join("epi_vertical.png");
        plot::epi_strip_png(&vertical, 12, &v_path)?;
        println!("wrote {}", v_path.display());
    }
    Ok(())
}
