//! The `gnnsafe` command line: `gen`, `train`, `eval` and `sweep`.
//!
//! Every command accepts `--config FILE`, a strict JSON [`ExperimentConfig`];
//! flags override file values, and the resolved settings are written to
//! `config.json` in the output directory. Exit codes: 0 on success, 2 for
//! configuration or validation errors, 3 for numeric failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::encoder::{load_checkpoint, save_checkpoint, Checkpoint, EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::eval::{evaluate, write_score_csv, EvalSettings, ScoreKind};
use crate::graphdata::{
    assemble_benchmark, gen_feature_ood, gen_label_leaveout_ood, gen_masked_ood, gen_structure_ood_with,
    load_benchmark, load_graph, load_splits, make_splits, read_json, save_benchmark, write_json, Benchmark,
    Splits, StructureOodParams, DEFAULT_HOMOPHILY, DEFAULT_RATIOS,
};
use crate::seed::derive_seed;
use crate::training::{grid_search, train, write_grid_csv, write_train_log, Grid, TrainConfig, TrainOutcome};

/// Environment variable capping worker threads for `sweep`.
pub const THREADS_ENV: &str = "GNNSAFE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    Structure,
    Feature,
    LabelLeaveout,
    Multigraph,
    AsIs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Gcn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreArg {
    Gnnsafe,
    Energy,
    Msp,
}

/// Encoder settings; the class count always comes from the benchmark.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderOptions {
    pub kind: Option<EncoderKind>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub use_feature_norm: Option<bool>,
    pub use_bias: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub lambda: Option<f64>,
    pub t_in: Option<f64>,
    pub t_out: Option<f64>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub weight_decay: Option<f64>,
    pub use_regularization: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub score: Option<ScoreKind>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    pub lr: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub t_in: Option<Vec<f64>>,
    pub t_out: Option<Vec<f64>>,
}

/// Contents of a `--config` file. Every field is optional; unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub leave_out: Option<Vec<usize>>,
    pub homophily: Option<f64>,
    pub ood: Option<Vec<PathBuf>>,
    pub exposure: Option<PathBuf>,
    pub ood_mask: Option<Vec<usize>>,
    pub exposure_mask: Option<Vec<usize>>,
    pub bench: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub encoder: EncoderOptions,
    pub train: TrainOptions,
    pub eval: EvalOptions,
    pub grid: GridOptions,
}

#[derive(Parser, Debug)]
#[command(name = "gnnsafe", version, about = "Energy-based OOD detection on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an OOD benchmark directory from a dataset.
    Gen(GenArgs),
    /// Train an encoder on a benchmark.
    Train(TrainArgs),
    /// Score a benchmark with a trained encoder.
    Eval(EvalArgs),
    /// Grid-search training hyperparameters.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Strict JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// In-distribution dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Classes held out, comma separated (label_leaveout).
    #[arg(long, value_delimiter = ',')]
    leave_out: Option<Vec<usize>>,
    /// Intra/inter block edge probability ratio (structure).
    #[arg(long)]
    homophily: Option<f64>,
    /// OOD dataset directories (multigraph).
    #[arg(long, num_args = 1..)]
    ood: Option<Vec<PathBuf>>,
    /// Exposure dataset directory (multigraph).
    #[arg(long)]
    exposure: Option<PathBuf>,
    /// OOD node ids, comma separated or a JSON array file (as_is).
    #[arg(long)]
    ood_mask: Option<String>,
    /// Exposure node ids, comma separated or a JSON array file (as_is).
    #[arg(long)]
    exposure_mask: Option<String>,
}

#[derive(Args, Debug)]
struct EncoderFlags {
    #[arg(long, value_enum)]
    encoder: Option<KindArg>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    no_feature_norm: bool,
    #[arg(long)]
    no_bias: bool,
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    /// Energy propagation mixing weight for the regularizer.
    #[arg(long)]
    alpha: Option<f64>,
    /// Energy propagation steps for the regularizer.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Add the energy-bound regularizer (needs an exposure unit).
    #[arg(long)]
    regularize: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    bench: Option<PathBuf>,
    #[command(flatten)]
    enc: EncoderFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_in: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_out: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    bench: Option<PathBuf>,
    /// Directory holding model.json and weights.bin.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Propagation steps; 0 scores raw energies.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    score: Option<ScoreArg>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    bench: Option<PathBuf>,
    #[command(flatten)]
    enc: EncoderFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Comma-separated learning rates.
    #[arg(long, allow_hyphen_values = true)]
    lr: Option<String>,
    /// Comma-separated regularizer weights.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Comma-separated in-distribution energy bounds.
    #[arg(long, allow_hyphen_values = true)]
    t_in: Option<String>,
    /// Comma-separated exposure energy bounds.
    #[arg(long, allow_hyphen_values = true)]
    t_out: Option<String>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(format!("missing required setting '{field}'")))
}

fn parse_mask(s: &str, field: &str) -> Result<Vec<usize>> {
    let parsed: std::result::Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse()).collect();
    if let Ok(v) = parsed {
        return Ok(v);
    }
    let path = Path::new(s);
    if path.is_file() {
        return read_json(path);
    }
    Err(Error::config(format!("{field}: expected node ids or a JSON array file, got '{s}'")))
}

fn parse_list(s: &str, field: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::config(format!("{field}: cannot parse '{t}' as a number")))
        })
        .collect()
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

// ---------------------------------------------------------------- gen

#[derive(Serialize)]
struct GenEcho<'a> {
    command: &'static str,
    dataset: &'a Path,
    scenario: Scenario,
    seed: u64,
    leave_out: Option<&'a [usize]>,
    homophily: Option<f64>,
    ood: Option<&'a [PathBuf]>,
    exposure: Option<&'a Path>,
    ood_mask: Option<&'a [usize]>,
    exposure_mask: Option<&'a [usize]>,
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let dataset = required(a.dataset.or(file.dataset), "dataset")?;
    let scenario = required(a.scenario.or(file.scenario), "scenario")?;
    let out = required(a.common.out.or(file.out), "out")?;
    let seed = a.common.seed.or(file.seed).unwrap_or(0);
    let leave_out = a.leave_out.or(file.leave_out);
    let homophily = a.homophily.or(file.homophily);
    let ood = a.ood.or(file.ood);
    let exposure = a.exposure.or(file.exposure);
    let ood_mask = match a.ood_mask {
        Some(s) => Some(parse_mask(&s, "ood_mask")?),
        None => file.ood_mask,
    };
    let exposure_mask = match a.exposure_mask {
        Some(s) => Some(parse_mask(&s, "exposure_mask")?),
        None => file.exposure_mask,
    };

    let g = load_graph(&dataset)?;
    let given_splits = load_splits(&dataset)?;
    let mut bench = match scenario {
        Scenario::Structure => {
            let homophily = homophily.unwrap_or(DEFAULT_HOMOPHILY);
            gen_structure_ood_with(&g, &StructureOodParams { homophily }, seed)
        }
        Scenario::Feature => gen_feature_ood(&g, seed),
        Scenario::LabelLeaveout => {
            let held = leave_out.clone().unwrap_or_else(|| crate::graphdata::default_leave_out(g.num_classes()));
            gen_label_leaveout_ood(&g, &held, seed).map_err(|e| Error::config(format!("leave_out: {e}")))
        }
        Scenario::Multigraph => {
            let dirs = required(ood.clone(), "ood")?;
            let graphs = dirs.iter().map(|d| load_graph(d)).collect::<Result<Vec<_>>>()?;
            let exp = exposure.as_deref().map(load_graph).transpose()?;
            let splits = match &given_splits {
                Some(s) => s.clone(),
                None => make_splits(&g, DEFAULT_RATIOS, derive_seed(seed, "splits"))?,
            };
            assemble_benchmark(g.clone(), splits, graphs, exp)
        }
        Scenario::AsIs => {
            let m = required(ood_mask.clone(), "ood_mask")?;
            gen_masked_ood(&g, &m, exposure_mask.as_deref(), seed)
        }
    }?;
    if let Some(s) = given_splits {
        if scenario != Scenario::Multigraph {
            bench.splits = restrict_splits(&s, &bench)?;
        }
    }
    bench.validate()?;
    save_benchmark(&bench, &out)?;
    write_json(
        &out.join("config.json"),
        &GenEcho {
            command: "gen",
            dataset: &dataset,
            scenario,
            seed,
            leave_out: leave_out.as_deref(),
            homophily,
            ood: ood.as_deref(),
            exposure: exposure.as_deref(),
            ood_mask: ood_mask.as_deref(),
            exposure_mask: exposure_mask.as_deref(),
        },
    )?;
    println!("{}", summary(&bench));
    Ok(())
}

/// Dataset-provided splits minus nodes that the scenario turned into OOD
/// or exposure nodes on the in-distribution graph.
fn restrict_splits(s: &Splits, b: &Benchmark) -> Result<Splits> {
    let g = &b.id_graph;
    let mut drop = vec![false; g.num_nodes()];
    for u in b.ood_test.iter().chain(b.ood_exposure.as_ref()) {
        if Arc::ptr_eq(&u.graph, g) {
            for &i in &u.mask {
                drop[i] = true;
            }
        }
    }
    let keep = |v: &[usize]| -> Vec<usize> { v.iter().copied().filter(|&i| i < drop.len() && !drop[i]).collect() };
    let out = Splits {
        train: keep(&s.train),
        valid: keep(&s.valid),
        test: keep(&s.test),
    };
    out.validate(g).map_err(|e| Error::config(format!("splits.json: {e}")))?;
    Ok(out)
}

fn summary(b: &Benchmark) -> String {
    let ood: Vec<String> = b.ood_test.iter().map(|u| u.mask.len().to_string()).collect();
    format!(
        "scenario={} id_nodes={} train={} valid={} test={} ood_units={} ood_nodes={} exposure_nodes={}",
        b.scenario,
        b.id_graph.num_nodes(),
        b.splits.train.len(),
        b.splits.valid.len(),
        b.splits.test.len(),
        b.ood_test.len(),
        ood.join("+"),
        b.ood_exposure.as_ref().map_or(0, |u| u.mask.len()),
    )
}

// -------------------------------------------------------------- train

fn resolve_encoder(flags: &EncoderFlags, file: &EncoderOptions, classes: usize) -> Result<EncoderConfig> {
    let kind = match flags.encoder {
        Some(KindArg::Gcn) => EncoderKind::Gcn,
        Some(KindArg::Mlp) => EncoderKind::Mlp,
        None => file.kind.unwrap_or(EncoderKind::Gcn),
    };
    let base = match kind {
        EncoderKind::Gcn => EncoderConfig::gcn(classes),
        EncoderKind::Mlp => EncoderConfig::mlp(classes),
    };
    let cfg = EncoderConfig {
        layers: flags.layers.or(file.layers).unwrap_or(base.layers),
        hidden: flags.hidden.or(file.hidden).unwrap_or(base.hidden),
        use_feature_norm: if flags.no_feature_norm {
            false
        } else {
            file.use_feature_norm.unwrap_or(base.use_feature_norm)
        },
        use_bias: if flags.no_bias { false } else { file.use_bias.unwrap_or(base.use_bias) },
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

struct PointFlags {
    lr: Option<f64>,
    lambda: Option<f64>,
    t_in: Option<f64>,
    t_out: Option<f64>,
}

fn resolve_train(flags: &TrainFlags, point: &PointFlags, file: &TrainOptions, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        lr: point.lr.or(file.lr).unwrap_or(d.lr),
        epochs: flags.epochs.or(file.epochs).unwrap_or(d.epochs),
        lambda: point.lambda.or(file.lambda).unwrap_or(d.lambda),
        t_in: point.t_in.or(file.t_in).unwrap_or(d.t_in),
        t_out: point.t_out.or(file.t_out).unwrap_or(d.t_out),
        alpha: flags.alpha.or(file.alpha).unwrap_or(d.alpha),
        k: flags.k.or(file.k).unwrap_or(d.k),
        weight_decay: flags.weight_decay.or(file.weight_decay).unwrap_or(d.weight_decay),
        seed,
        use_regularization: flags.regularize || file.use_regularization.unwrap_or(false),
        ..d
    }
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    command: &'static str,
    bench: &'a Path,
    seed: u64,
    encoder: &'a EncoderConfig,
    train: &'a TrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<&'a Grid>,
}

fn write_model(out: &Path, bench: &Benchmark, enc: &EncoderConfig, outcome: &TrainOutcome) -> Result<()> {
    let ckpt = Checkpoint {
        config: enc.clone(),
        in_dim: bench.id_graph.num_features(),
        seed: outcome.config.seed,
        class_remap: bench.class_remap.clone(),
        settings: serde_json::to_value(&outcome.config).expect("train config serializes"),
        params: outcome.params.clone(),
    };
    save_checkpoint(&ckpt, out)?;
    write_train_log(&outcome.history, &out.join("train_log.jsonl"))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let bench_dir = required(a.bench.or(file.bench), "bench")?;
    let out = required(a.common.out.or(file.out), "out")?;
    let seed = a.common.seed.or(file.seed).unwrap_or(0);
    let bench = load_benchmark(&bench_dir)?;
    let enc = resolve_encoder(&a.enc, &file.encoder, bench.id_graph.num_classes())?;
    let point = PointFlags { lr: a.lr, lambda: a.lambda, t_in: a.t_in, t_out: a.t_out };
    let tc = resolve_train(&a.train, &point, &file.train, seed);
    tc.validate()?;
    if tc.use_regularization && bench.ood_exposure.is_none() {
        return Err(Error::config("use_regularization: the benchmark has no exposure unit"));
    }
    let outcome = train(&bench, &enc, &tc)?;
    write_model(&out, &bench, &enc, &outcome)?;
    write_json(
        &out.join("config.json"),
        &TrainEcho { command: "train", bench: &bench_dir, seed, encoder: &enc, train: &tc, grid: None },
    )?;
    let best = outcome.history.best();
    println!(
        "best_epoch={} train_loss={} val_loss={} val_acc={}",
        outcome.history.best_epoch, best.train_loss, best.val_loss, best.val_acc
    );
    Ok(())
}

// --------------------------------------------------------------- eval

#[derive(Clone, Copy, Serialize)]
struct EvalEcho<'a> {
    command: &'static str,
    bench: &'a Path,
    model: &'a Path,
    model_seed: u64,
    settings: &'a EvalSettings,
}

#[derive(Serialize)]
struct Meta {
    version: &'static str,
    unix_time: u64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: EvalEcho<'a>,
    results: &'a crate::eval::DetectionReport,
    /// Run metadata; excluded from reproducibility comparisons.
    meta: Meta,
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let bench_dir = required(a.bench.or(file.bench), "bench")?;
    let model_dir = required(a.model.or(file.model), "model")?;
    let out = required(a.common.out.or(file.out), "out")?;
    let d = EvalSettings::default();
    let settings = EvalSettings {
        score: match a.score {
            Some(ScoreArg::Gnnsafe) => ScoreKind::Gnnsafe,
            Some(ScoreArg::Energy) => ScoreKind::Energy,
            Some(ScoreArg::Msp) => ScoreKind::Msp,
            None => file.eval.score.unwrap_or(d.score),
        },
        alpha: a.alpha.or(file.eval.alpha).unwrap_or(d.alpha),
        k: a.k.or(file.eval.k).unwrap_or(d.k),
    };
    if !(settings.alpha > 0.0 && settings.alpha <= 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1], got {}", settings.alpha)));
    }
    let ckpt = load_checkpoint(&model_dir)?;
    let bench = load_benchmark(&bench_dir)?;
    if ckpt.in_dim != bench.id_graph.num_features() {
        return Err(Error::config(format!(
            "feature dimension: model expects {}, benchmark has {}",
            ckpt.in_dim,
            bench.id_graph.num_features()
        )));
    }
    let ev = evaluate(&bench, &ckpt.params, &ckpt.config, &settings)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for (i, rows) in ev.scores.iter().enumerate() {
        write_score_csv(rows, &out.join(format!("scores_unit_{i}.csv")))?;
    }
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let echo = EvalEcho {
        command: "eval",
        bench: &bench_dir,
        model: &model_dir,
        model_seed: ckpt.seed,
        settings: &settings,
    };
    write_json(
        &out.join("report.json"),
        &ReportFile {
            config: echo,
            results: &ev.report,
            meta: Meta { version: env!("CARGO_PKG_VERSION"), unix_time },
        },
    )?;
    write_json(&out.join("config.json"), &echo)?;
    let m = &ev.report.mean;
    println!(
        "auroc={} aupr={} fpr95={} id_test_accuracy={}",
        m.auroc, m.aupr, m.fpr95, ev.report.id_test_accuracy
    );
    Ok(())
}

// -------------------------------------------------------------- sweep

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let bench_dir = required(a.bench.or(file.bench), "bench")?;
    let out = required(a.common.out.or(file.out), "out")?;
    let seed = a.common.seed.or(file.seed).unwrap_or(0);
    let bench = load_benchmark(&bench_dir)?;
    let enc = resolve_encoder(&a.enc, &file.encoder, bench.id_graph.num_classes())?;
    let none = PointFlags { lr: None, lambda: None, t_in: None, t_out: None };
    let base = resolve_train(&a.train, &none, &file.train, seed);
    if base.use_regularization && bench.ood_exposure.is_none() {
        return Err(Error::config("use_regularization: the benchmark has no exposure unit"));
    }

    // Without the regularizer only the learning rate is searched by default.
    let paper = Grid::default();
    let list = |flag: &Option<String>, from_file: &Option<Vec<f64>>, field: &str, fallback: Vec<f64>| -> Result<Vec<f64>> {
        match (flag, from_file) {
            (Some(s), _) => parse_list(s, field),
            (None, Some(v)) => Ok(v.clone()),
            (None, None) => Ok(fallback),
        }
    };
    let reg = base.use_regularization;
    let grid = Grid {
        lr: list(&a.lr, &file.grid.lr, "lr", paper.lr.clone())?,
        lambda: list(&a.lambda, &file.grid.lambda, "lambda", if reg { paper.lambda.clone() } else { vec![base.lambda] })?,
        t_in: list(&a.t_in, &file.grid.t_in, "t_in", if reg { paper.t_in.clone() } else { vec![base.t_in] })?,
        t_out: list(&a.t_out, &file.grid.t_out, "t_out", if reg { paper.t_out.clone() } else { vec![base.t_out] })?,
    };
    for (name, v) in [("lr", &grid.lr), ("lambda", &grid.lambda), ("t_in", &grid.t_in), ("t_out", &grid.t_out)] {
        if v.is_empty() {
            return Err(Error::config(format!("grid '{name}' is empty")));
        }
    }
    let outcome = grid_search(&bench, &enc, &base, &grid, threads()?)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_grid_csv(&outcome, &out.join("grid.csv"))?;
    write_model(&out, &bench, &enc, &outcome.best)?;
    write_json(
        &out.join("config.json"),
        &TrainEcho {
            command: "sweep",
            bench: &bench_dir,
            seed,
            encoder: &enc,
            train: &outcome.best.config,
            grid: Some(&grid),
        },
    )?;
    let w = &outcome.rows[outcome.best_index];
    println!(
        "points={} best_index={} lr={} lambda={} t_in={} t_out={} val_loss={}",
        outcome.rows.len(),
        w.index,
        w.config.lr,
        w.config.lambda,
        w.config.t_in,
        w.config.t_out,
        w.val_loss
    );
    Ok(())
}
