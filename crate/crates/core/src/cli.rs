//! Command-line front end. Exit codes: 0 success, 1 invalid arguments, 2 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::curves::emit_curves;
use crate::data::{generate_dataset, load_dataset, load_pseudo_mask, save_dataset, split_dataset, GeneratorParams, Split};
use crate::error::{Error, Result};
use crate::losses::{nc_grad, nc_loss, GradMode, LossKind, LossSpec};
use crate::model::{load_checkpoint, save_checkpoint, EncoderConfig, NetKind};
use crate::pipeline::{
    assemble_training_set, evaluate, generate_pseudo_labels, pseudo_stats, run_wsscod, train_anet, train_pnet,
    ExperimentConfig, Preset, Prompt,
};
use crate::tensor::Tensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wsscod", version, about = "Weakly semi-supervised camouflaged-object segmentation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset (count training + count/4 test samples).
    GenData(GenArgs),
    /// Train the box-prompted auxiliary network on the labelled split.
    TrainAnet(TrainArgs),
    /// Predict pseudo labels for the box-only split with a trained auxiliary network.
    PseudoLabel(PseudoArgs),
    /// Train the image-only primary network on labelled + pseudo-labelled data.
    TrainPnet(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Full protocol: split, auxiliary net, pseudo labels, primary net, evaluation.
    Run(TrainArgs),
    /// Print per-pixel gradients of the noise-correction loss on a small grid.
    DiagnoseLoss(DiagnoseArgs),
    /// Render SVG curves from a run directory's epochs.csv.
    Curves(CurvesArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    difficulty: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    #[value(name = "F1")]
    F1,
    #[value(name = "F5")]
    F5,
    #[value(name = "F10")]
    F10,
    #[value(name = "F20")]
    F20,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::F1 => Preset::F1,
            PresetArg::F5 => Preset::F5,
            PresetArg::F10 => Preset::F10,
            PresetArg::F20 => Preset::F20,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Nc,
    Ce,
    Iou,
    Mae,
    Gce,
    CeIou,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Nc => LossKind::Nc,
            LossArg::Ce => LossKind::Ce,
            LossArg::Iou => LossKind::Iou,
            LossArg::Mae => LossKind::Mae,
            LossArg::Gce => LossKind::Gce,
            LossArg::CeIou => LossKind::CeIou,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Detached,
}

impl From<ModeArg> for GradMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => GradMode::Exact,
            ModeArg::Detached => GradMode::DetachedDenominator,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncoderArg {
    Standard,
    Desk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PromptArg {
    Box,
    ImageOnly,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output directory (for `run`, defaults to runs/<preset>-s<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long)]
    frac_m: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    anet_epochs: Option<usize>,
    #[arg(long)]
    switch_epoch: Option<usize>,
    #[arg(long)]
    noise_rho: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, visible_alias = "mode", value_enum)]
    grad_mode: Option<ModeArg>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_peak: Option<f64>,
    #[arg(long, value_enum, default_value = "standard")]
    encoder: EncoderArg,
    #[arg(long, value_enum, default_value = "box")]
    prompt: PromptArg,
    #[arg(long)]
    no_flip: bool,
    #[arg(long)]
    no_crop: bool,
    /// Directory holding pseudo/<id>.pgm (train-pnet without --noise-rho).
    #[arg(long)]
    pseudo: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct PseudoArgs {
    #[arg(long)]
    data: PathBuf,
    /// Auxiliary network checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long)]
    frac_m: Option<f64>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, value_enum, default_value = "box")]
    prompt: PromptArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, visible_alias = "grad-mode", value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long, default_value_t = 8)]
    grid: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    /// Run directory containing epochs.csv.
    #[arg(long)]
    out: PathBuf,
}

fn resolve_split(preset: Option<PresetArg>, frac_m: Option<f64>) -> (Option<Preset>, f64) {
    let preset = preset.map(Preset::from);
    let frac = frac_m.unwrap_or_else(|| preset.unwrap_or(Preset::F20).frac_m());
    (preset.or(if frac_m.is_none() { Some(Preset::F20) } else { None }), frac)
}

fn build_config(a: &TrainArgs) -> Result<ExperimentConfig> {
    let (preset, frac_m) = resolve_split(a.preset, a.frac_m);
    let mut cfg = ExperimentConfig::from_preset(&a.data, preset.unwrap_or(Preset::F20));
    cfg.preset = preset;
    cfg.frac_m = frac_m;
    if let Some(e) = a.epochs {
        let anet = a.anet_epochs.unwrap_or(e);
        cfg = cfg.with_epochs(e);
        cfg.anet_epochs = anet;
        cfg.anet_lr.total_epochs = anet;
        cfg.anet_lr.warmup_epochs = (anet / 10).min(anet.saturating_sub(1));
    } else if let Some(anet) = a.anet_epochs {
        cfg.anet_epochs = anet;
        cfg.anet_lr.total_epochs = anet;
        cfg.anet_lr.warmup_epochs = (anet / 10).min(anet.saturating_sub(1));
    }
    let switch = a.switch_epoch.unwrap_or(cfg.loss.switch_epoch);
    if let Some(l) = a.loss {
        cfg.loss = LossSpec::with_kind(l.into());
    }
    cfg.loss.switch_epoch = switch;
    if let Some(m) = a.grad_mode {
        cfg.loss.grad_mode = m.into();
    }
    cfg.seed = a.seed;
    cfg.noise_override = a.noise_rho;
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr_peak {
        cfg.lr.lr_peak = lr;
        cfg.anet_lr.lr_peak = lr;
    }
    cfg.encoder = match a.encoder {
        EncoderArg::Standard => EncoderConfig::default(),
        EncoderArg::Desk => EncoderConfig::desk(),
    };
    cfg.prompt = match a.prompt {
        PromptArg::Box => Prompt::Box,
        PromptArg::ImageOnly => Prompt::ImageOnly,
    };
    cfg.augment.flip = !a.no_flip;
    cfg.augment.crop = !a.no_crop;
    cfg.validate()?;
    Ok(cfg)
}

fn eprint_log() -> impl FnMut(String) {
    |s| eprintln!("{s}")
}

fn require_out(out: &Option<PathBuf>) -> Result<&PathBuf> {
    out.as_ref().ok_or_else(|| Error::invalid("cli", "--out is required for this command"))
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    if a.count < 4 {
        return Err(Error::invalid("gen-data", "--count must be at least 4"));
    }
    let params = GeneratorParams {
        size: a.size,
        count: a.count,
        test_count: a.count / 4,
        difficulty: a.difficulty,
    };
    if a.size < 32 || !a.size.is_power_of_two() {
        return Err(Error::invalid("gen-data", "--size must be a power of two >= 32"));
    }
    if !(0.0..=1.0).contains(&a.difficulty) {
        return Err(Error::invalid("gen-data", "--difficulty must be in [0, 1]"));
    }
    let (m, s) = generate_dataset(a.seed, &params)?;
    let path = save_dataset(&m, &s, &a.out)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_train_anet(a: &TrainArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let out = require_out(&a.out)?;
    let (manifest, samples) = load_dataset(&cfg.data_dir)?;
    let split = split_dataset(&manifest, cfg.frac_m, cfg.seed)?;
    let pick = |sp: Split| -> Vec<_> {
        split.samples.iter().zip(&samples).filter(|(e, _)| e.split == sp).map(|(_, s)| s).collect()
    };
    let (dm, test) = (pick(Split::DM), pick(Split::Test));
    let (net, rec) = train_anet(&cfg, &dm, &test, &mut eprint_log())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_checkpoint(&net, &out.join("anet.ckpt"))?;
    std::fs::write(out.join("anet_epochs.csv"), rec.to_csv()).map_err(|e| Error::io(out, e))?;
    let last = rec.final_row().expect("one epoch").test;
    if a.json {
        println!("{}", last.to_json());
    } else {
        println!("{}", out.join("anet.ckpt").display());
    }
    Ok(())
}

fn cmd_pseudo(a: &PseudoArgs) -> Result<()> {
    let (_, frac_m) = resolve_split(a.preset, a.frac_m);
    let net = load_checkpoint(&a.checkpoint)?;
    if net.kind() != NetKind::Anet {
        return Err(Error::invalid("pseudo-label", "checkpoint is not an auxiliary network"));
    }
    let (manifest, samples) = load_dataset(&a.data)?;
    let split = split_dataset(&manifest, frac_m, a.seed)?;
    let dn: Vec<_> = split
        .samples
        .iter()
        .zip(&samples)
        .filter(|(e, _)| e.split == Split::DN)
        .map(|(_, s)| s)
        .collect();
    let prompt = match a.prompt {
        PromptArg::Box => Prompt::Box,
        PromptArg::ImageOnly => Prompt::ImageOnly,
    };
    let labels = generate_pseudo_labels(&net, &dn, prompt)?;
    crate::data::save_pseudo_labels(&a.out, &labels)?;
    let stats = pseudo_stats(&labels, &dn)?;
    if a.json {
        println!("{}", serde_json::to_string(&stats)?);
    } else {
        println!("{}", a.out.join("pseudo").display());
    }
    Ok(())
}

fn cmd_train_pnet(a: &TrainArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let out = require_out(&a.out)?;
    if cfg.noise_override.is_none() && a.pseudo.is_none() {
        return Err(Error::invalid("train-pnet", "need --pseudo <dir> or --noise-rho"));
    }
    let (manifest, samples) = load_dataset(&cfg.data_dir)?;
    let split = split_dataset(&manifest, cfg.frac_m, cfg.seed)?;
    let pick = |sp: Split| -> Vec<_> {
        split.samples.iter().zip(&samples).filter(|(e, _)| e.split == sp).map(|(_, s)| s).collect()
    };
    let (dm, dn, test) = (pick(Split::DM), pick(Split::DN), pick(Split::Test));
    let labels = match (cfg.noise_override, &a.pseudo) {
        (Some(rho), _) => dn
            .iter()
            .map(|s| {
                crate::data::inject_noise_for(
                    &s.gt,
                    rho,
                    crate::data::derive_seed(cfg.seed, &format!("noise/{}", s.id)),
                    s.id.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?,
        (None, Some(dir)) => dn
            .iter()
            .map(|s| {
                let mask = load_pseudo_mask(dir, &s.id)?;
                let (fp_rate, fn_rate) = crate::data::fp_fn_rates(&mask, &s.gt)?;
                Ok(crate::data::PseudoLabel {
                    sample_id: s.id.clone(),
                    mask,
                    source: crate::data::LabelSource::Anet,
                    fp_rate,
                    fn_rate,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        (None, None) => unreachable!("checked above"),
    };
    let dt = assemble_training_set(&dm, &dn, &labels)?;
    let (net, rec) = train_pnet(&cfg, &dt, &test, &mut eprint_log())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_checkpoint(&net, &out.join("pnet.ckpt"))?;
    std::fs::write(out.join("epochs.csv"), rec.to_csv()).map_err(|e| Error::io(out, e))?;
    emit_curves(out)?;
    let last = rec.final_row().expect("one epoch").test;
    if a.json {
        println!("{}", last.to_json());
    } else {
        println!("{}", out.join("pnet.ckpt").display());
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let net = load_checkpoint(&a.checkpoint)?;
    let (manifest, samples) = load_dataset(&a.data)?;
    let test: Vec<_> = manifest
        .samples
        .iter()
        .zip(&samples)
        .filter(|(e, _)| e.split == Split::Test)
        .map(|(_, s)| s)
        .collect();
    let r = evaluate(&net, &test)?;
    if a.json {
        println!("{}", r.to_json());
    } else {
        println!("{}\n{}", crate::metrics::MetricReport::CSV_HEADER, r.to_csv_row());
    }
    Ok(())
}

fn cmd_run(a: &TrainArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let out = a.out.clone().unwrap_or_else(|| {
        let tag = cfg.preset.map(|p| p.to_string()).unwrap_or_else(|| format!("m{}", cfg.frac_m));
        PathBuf::from("runs").join(format!("{tag}-s{}", cfg.seed))
    });
    let bundle = run_wsscod(&cfg, &out, &mut eprint_log())?;
    if a.json {
        println!("{}", serde_json::to_string(&bundle.summary)?);
    } else {
        println!("{}", out.join("summary.json").display());
    }
    Ok(())
}

/// Fixed diagnostic pair on a `grid × grid` board: left half foreground, seeded predictions.
pub fn diagnostic_pair(grid: usize, seed: u64) -> (Tensor, Tensor) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = Tensor::from_fn(&[1, grid, grid], |i| if i % grid < grid / 2 { 1.0 } else { 0.0 });
    let p = Tensor::from_fn(&[1, grid, grid], |_| rng.gen_range(0.05..0.95));
    (p, g)
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    if a.grid < 2 {
        return Err(Error::invalid("diagnose-loss", "--grid must be at least 2"));
    }
    if !(1.0..=2.0).contains(&a.q) {
        return Err(Error::invalid("diagnose-loss", "--q must be in [1, 2]"));
    }
    let (p, g) = diagnostic_pair(a.grid, a.seed);
    let mode: GradMode = a.mode.into();
    let value = nc_loss(&p, &g, a.q)?;
    let grad = nc_grad(&p, &g, a.q, mode)?;
    let mags: Vec<f64> = grad.data().iter().map(|v| v.abs()).collect();
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    if a.json {
        let v = serde_json::json!({
            "q": a.q,
            "mode": match mode { GradMode::Exact => "exact", GradMode::DetachedDenominator => "detached" },
            "grid": a.grid,
            "loss": value,
            "grad": grad.data(),
            "magnitude_min": lo,
            "magnitude_max": hi,
            "all_equal": hi - lo <= 1e-12 * hi.max(1.0),
        });
        println!("{v}");
    } else {
        println!("loss {value}");
        for row in mags.chunks(a.grid) {
            let cells: Vec<String> = row.iter().map(|m| format!("{m:.6e}")).collect();
            println!("{}", cells.join(" "));
        }
        println!("magnitude min {lo:e} max {hi:e}");
    }
    Ok(())
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument { .. } | Error::Shape { .. } => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("NSL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `args` (including the program name), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::GenData(a) => cmd_gen(a),
        Command::TrainAnet(a) => cmd_train_anet(a),
        Command::PseudoLabel(a) => cmd_pseudo(a),
        Command::TrainPnet(a) => cmd_train_pnet(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(a),
        Command::DiagnoseLoss(a) => cmd_diagnose(a),
        Command::Curves(a) => emit_curves(&a.out).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}
