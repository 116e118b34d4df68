//! Command-line front end for `nmhash`: data generation, training, evaluation,
//! ablations and curve export.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nmhash::data::{
    generate_synthetic, load_features, FeatureDataset, DEFAULT_CLASSES, DEFAULT_DATA_SEED,
    DEFAULT_DIM, DEFAULT_NOISE_SIGMA, DEFAULT_PER_CLASS,
};
use nmhash::trainer::{
    leave_one_out_profile, load_checkpoint, prepare_dataset, save_checkpoint, Checkpoint,
    ExperimentConfig, Model, Trainer, Variant, REPORT_SCHEMA_VERSION,
};
use serde::Serialize;

pub const CHECKPOINT_FILE: &str = "checkpoint.hmrg";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "nmhash", version, about = "Learning-to-hash with progressive neuron merging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian-cluster dataset as CSV.
    GenData(GenDataArgs),
    /// Train one variant and write a checkpoint and a JSON report.
    Train(TrainArgs),
    /// Retrieval metrics of a trained checkpoint.
    Evaluate(EvaluateArgs),
    /// Train every variant over several seeds and compare median MAP.
    Ablate(AblateArgs),
    /// Leave-one-bit-out MAP profile of a trained checkpoint.
    Profile(ProfileArgs),
    /// Write PR, top-N, bit-reduction and leave-one-out curves as CSV.
    ExportCurves(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = DEFAULT_CLASSES)]
    pub classes: usize,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_PER_CLASS)]
    pub per_class: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Hyperparameters settable from flags; each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    /// Flat `key = value` file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub b_in: Option<usize>,
    #[arg(long)]
    pub b_out: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub base_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub nm_lr: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub n_query: Option<usize>,
    #[arg(long)]
    pub n_validation: Option<usize>,
    #[arg(long)]
    pub score_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigFlags,
    /// Directory for the checkpoint and report.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Continue an interrupted run from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs and save a resumable checkpoint.
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also report MAP over the top R retrieved items.
    #[arg(long)]
    pub top_r: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,10,50,100")]
    pub top_n: Vec<usize>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigFlags,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    /// Variants to run; the full variant is always included and listed first.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Cutoffs for topn.csv; values beyond the gallery size are skipped.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50,100,200,500,1000")]
    pub top_n: Vec<usize>,
}

/// Parses `args` (including the program name) and runs the command. Output
/// meant for the user is appended to `out`.
pub fn run<I, T>(args: I, out: &mut String) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut String) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Ablate(a) => ablate(&a, out),
        Command::Profile(a) => profile(&a, out),
        Command::ExportCurves(a) => export_curves(&a, out),
    }
}

fn gen_data(a: &GenDataArgs, out: &mut String) -> Result<()> {
    let ds = generate_synthetic(a.classes, a.dim, a.per_class, a.noise, a.seed)?;
    ds.save_csv(&a.out)?;
    writeln!(out, "wrote {} items of dimension {} to {}", ds.len(), ds.dim(), a.out.display())?;
    Ok(())
}

/// Reads a flat `key = value` config file into `cfg`.
pub fn apply_config_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), no + 1);
        };
        set_key(cfg, key.trim(), value.trim())
            .with_context(|| format!("{}:{}", path.display(), no + 1))?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("invalid value {value:?} for {key}"))
}

fn set_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key.replace('-', "_").as_str() {
        "b_in" => cfg.b_in = parse(key, value)?,
        "b_out" => cfg.b_out = parse(key, value)?,
        "m" => cfg.m = parse(key, value)?,
        "n0" | "n0_epochs" => cfg.n0_epochs = parse(key, value)?,
        "n1" | "n1_epochs" => cfg.n1_epochs = parse(key, value)?,
        "base_epochs" => cfg.base_epochs = parse(key, value)?,
        "batch_size" => cfg.batch_size = parse(key, value)?,
        "lr" | "learning_rate" => cfg.backbone_sgd.learning_rate = parse(key, value)?,
        "weight_decay" => cfg.backbone_sgd.weight_decay = parse(key, value)?,
        "nm_lr" | "nm_learning_rate" => cfg.nm_learning_rate = parse(key, value)?,
        "eta" => cfg.eta = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "variant" => cfg.variant = value.parse()?,
        "dropout" | "dropout_rate" => cfg.dropout_rate = parse(key, value)?,
        "hidden" | "hidden_dims" => {
            cfg.hidden_dims = value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse(key, s.trim()))
                .collect::<Result<_>>()?
        }
        "n_query" => cfg.n_query = parse(key, value)?,
        "n_validation" => cfg.n_validation = Some(parse(key, value)?),
        "score_every" => cfg.score_every = parse(key, value)?,
        _ => bail!("unknown config key {key:?}"),
    }
    Ok(())
}

/// Defaults, then the config file, then explicit flags.
pub fn build_config(flags: &ConfigFlags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &flags.config {
        apply_config_file(&mut cfg, path)?;
    }
    macro_rules! set {
        ($flag:ident => $($field:ident).+) => {
            if let Some(v) = flags.$flag.clone() {
                cfg.$($field).+ = v;
            }
        };
    }
    set!(b_in => b_in);
    set!(b_out => b_out);
    set!(m => m);
    set!(n0 => n0_epochs);
    set!(n1 => n1_epochs);
    set!(base_epochs => base_epochs);
    set!(batch_size => batch_size);
    set!(lr => backbone_sgd.learning_rate);
    set!(weight_decay => backbone_sgd.weight_decay);
    set!(nm_lr => nm_learning_rate);
    set!(eta => eta);
    set!(seed => seed);
    set!(dropout => dropout_rate);
    set!(hidden => hidden_dims);
    set!(n_query => n_query);
    set!(score_every => score_every);
    if let Some(v) = flags.n_validation {
        cfg.n_validation = Some(v);
    }
    if let Some(v) = &flags.variant {
        cfg.variant = v.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_prepared(data: &Path, cfg: &ExperimentConfig) -> Result<FeatureDataset> {
    let raw = load_features(data)?;
    Ok(prepare_dataset(cfg, &raw)?)
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut String) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => out.push_str(text),
    }
    Ok(())
}

fn train(a: &TrainArgs, out: &mut String) -> Result<()> {
    let (cfg, state) = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            (ckpt.config, Some(ckpt.state))
        }
        None => (build_config(&a.cfg)?, None),
    };
    let ds = load_prepared(&a.data, &cfg)?;
    let mut trainer = match state {
        Some(s) => Trainer::resume(&cfg, &ds, s)?,
        None => Trainer::new(&cfg, &ds)?,
    };
    match a.max_epochs {
        Some(n) => trainer.run_epochs(n)?,
        None => while trainer.step()? {},
    }
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let ckpt_path = a.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt_path, &cfg, trainer.state())?;
    let report = &trainer.state().report;
    let report_path = a.out_dir.join(REPORT_FILE);
    fs::write(&report_path, report.to_json())
        .with_context(|| format!("writing {}", report_path.display()))?;
    match &report.final_metrics {
        Some(m) if trainer.is_finished() => writeln!(
            out,
            "{} run finished: final MAP {:.4} with {} effective bits",
            cfg.variant, m.map, m.effective_bits
        )?,
        _ => writeln!(
            out,
            "{} run paused after {} epochs at {:?}; resume with --resume {}",
            cfg.variant,
            trainer.state().epochs_run,
            trainer.state().stage,
            ckpt_path.display()
        )?,
    }
    writeln!(out, "checkpoint: {}", ckpt_path.display())?;
    writeln!(out, "report: {}", report_path.display())?;
    Ok(())
}

/// Finished checkpoint plus the dataset prepared with its config.
fn load_trained(checkpoint: &Path, data: &Path) -> Result<(Checkpoint, FeatureDataset)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let ds = load_prepared(data, &ckpt.config)?;
    if ckpt.state.model.net.input_dim() != ds.dim() {
        bail!(
            "checkpoint expects {} features per item, {} has {}",
            ckpt.state.model.net.input_dim(),
            data.display(),
            ds.dim()
        );
    }
    Ok((ckpt, ds))
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    schema_version: u32,
    variant: Variant,
    finished: bool,
    #[serde(flatten)]
    metrics: &'a nmhash::trainer::EvalMetrics,
}

fn evaluate(a: &EvaluateArgs, out: &mut String) -> Result<()> {
    let (ckpt, ds) = load_trained(&a.checkpoint, &a.data)?;
    let metrics = ckpt.state.model.evaluate(&ds, a.top_r, a.radius, &a.top_n)?;
    let json = serde_json::to_string_pretty(&EvaluateOutput {
        schema_version: REPORT_SCHEMA_VERSION,
        variant: ckpt.config.variant,
        finished: ckpt.state.report.final_metrics.is_some(),
        metrics: &metrics,
    })?;
    write_or_print(a.out.as_deref(), &(json + "\n"), out)
}

#[derive(Debug, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub median_map: f64,
    pub maps: Vec<f64>,
    pub median_leave_one_out_std: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct AblationTable {
    pub schema_version: u32,
    pub b_in: usize,
    pub b_out: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn ablate(a: &AblateArgs, out: &mut String) -> Result<()> {
    let base = build_config(&a.cfg)?;
    if a.seeds.is_empty() {
        bail!("--seeds needs at least one seed");
    }
    let mut variants = vec![Variant::Full];
    match &a.variants {
        Some(names) => {
            for n in names {
                let v: Variant = n.parse()?;
                if !variants.contains(&v) {
                    variants.push(v);
                }
            }
        }
        None => variants = Variant::ALL.to_vec(),
    }
    let raw = load_features(&a.data)?;
    let mut rows = Vec::new();
    for &v in &variants {
        let mut maps = Vec::new();
        let mut stds = Vec::new();
        for &seed in &a.seeds {
            let cfg = ExperimentConfig {
                seed,
                ..base.clone()
            }
            .for_variant(v);
            let ds = prepare_dataset(&cfg, &raw)?;
            let (_, report) = Trainer::new(&cfg, &ds)?.run_to_end()?;
            maps.push(report.final_map().expect("finished run has metrics"));
            if let Some(l) = &report.leave_one_out {
                stds.push(l.std);
            }
        }
        rows.push(AblationRow {
            variant: v,
            median_map: median(maps.clone()),
            median_leave_one_out_std: (!stds.is_empty()).then(|| median(stds)),
            maps,
        });
    }
    let table = AblationTable {
        schema_version: REPORT_SCHEMA_VERSION,
        b_in: base.b_in,
        b_out: base.b_out,
        seeds: a.seeds.clone(),
        rows,
    };
    let mut text = format!("{:<10} {:>10} {:>12}\n", "variant", "median MAP", "median LOO std");
    for r in &table.rows {
        let std = r
            .median_leave_one_out_std
            .map_or_else(|| "-".to_string(), |s| format!("{s:.5}"));
        writeln!(text, "{:<10} {:>10.4} {:>12}", r.variant.name(), r.median_map, std)?;
    }
    let json = serde_json::to_string_pretty(&table)? + "\n";
    match &a.out {
        Some(p) => {
            fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
            out.push_str(&text);
        }
        None => out.push_str(&json),
    }
    Ok(())
}

#[derive(Serialize)]
struct ProfileOutput<'a> {
    schema_version: u32,
    effective_bits: usize,
    map: f64,
    #[serde(flatten)]
    profile: &'a nmhash::trainer::LooProfile,
}

fn profile(a: &ProfileArgs, out: &mut String) -> Result<()> {
    let (ckpt, ds) = load_trained(&a.checkpoint, &a.data)?;
    let model = &ckpt.state.model;
    let profile = leave_one_out_profile(model, &ds)?;
    let json = serde_json::to_string_pretty(&ProfileOutput {
        schema_version: REPORT_SCHEMA_VERSION,
        effective_bits: model.effective_bits(),
        map: model.map(&ds)?,
        profile: &profile,
    })?;
    write_or_print(a.out.as_deref(), &(json + "\n"), out)
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = format!("{header}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn export_curves(a: &ExportArgs, out: &mut String) -> Result<()> {
    let (ckpt, ds) = load_trained(&a.checkpoint, &a.data)?;
    let model: &Model = &ckpt.state.model;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;

    let pr = model.pr_curve(&ds)?;
    write_csv(
        &dir.join("pr_curve.csv"),
        "threshold,precision,recall",
        pr.iter()
            .map(|p| format!("{},{},{}", p.threshold, p.precision, p.recall)),
    )?;

    let gallery = ds.gallery_indices().len();
    let cutoffs: Vec<usize> = a
        .top_n
        .iter()
        .copied()
        .filter(|&n| n >= 1 && n <= gallery)
        .collect();
    let metrics = model.evaluate(&ds, None, 2.0, &cutoffs)?;
    write_csv(
        &dir.join("topn.csv"),
        "n,precision",
        cutoffs
            .iter()
            .zip(&metrics.precision_at_top_n)
            .map(|(n, p)| format!("{n},{p}")),
    )?;

    write_csv(
        &dir.join("bit_reduction.csv"),
        "effective_bits,map",
        ckpt.state
            .report
            .bit_reduction
            .iter()
            .map(|p| format!("{},{}", p.effective_bits, p.map)),
    )?;

    let loo_rows = if model.effective_bits() >= 2 {
        leave_one_out_profile(model, &ds)?
            .map_without_bit
            .iter()
            .enumerate()
            .map(|(k, m)| format!("{k},{m}"))
            .collect()
    } else {
        Vec::new()
    };
    write_csv(&dir.join("loo_profile.csv"), "bit,map_without_bit", loo_rows)?;

    writeln!(
        out,
        "wrote pr_curve.csv, topn.csv, bit_reduction.csv, loo_profile.csv to {}",
        dir.display()
    )?;
    Ok(())
}

/// Collapses an error chain into one line.
pub fn one_line(err: &anyhow::Error) -> String {
    let text = match err.downcast_ref::<clap::Error>() {
        Some(e) => e.render().to_string(),
        None => format!("{err:#}"),
    };
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .collect::<Vec<_>>()
        .join(" ")
        .trim_start_matches("error: ")
        .to_string()
}
