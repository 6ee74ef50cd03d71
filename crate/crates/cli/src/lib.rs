//! Command-line front end: argument parsing, config overrides and output.
//!
//! Precedence for every setting is: command-line flag, then config file,
//! then built-in default.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use selectdc::analysis::CostModel;
use selectdc::config::{ExperimentConfig, OutputFormat};
use selectdc::harness;
use selectdc::nn::{load_model, save_model, MaskMode, Network, ScaleMode};
use selectdc::results::{emit_results, ensure_parent, render, ResultRecord};
use selectdc::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "selectdc", version, about = "Select-DC Monte Carlo DropConnect experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a network and write the model file.
    Train(TrainArgs),
    /// Monte Carlo prediction on the test set at one (λ, p) setting.
    Predict(RunArgs),
    /// Prediction over every λ × drop-probability combination.
    Sweep(RunArgs),
    /// Entropy-based out-of-distribution detection.
    Ood(OodArgs),
    /// Analytic inference cost over λ.
    Flops(RunArgs),
    /// Predictive entropy under input rotation.
    Rotate(RotateArgs),
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Where to write the model (overrides output.model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr_peak: Option<f64>,
    #[arg(long)]
    pub drop_prob: Option<f64>,
    #[arg(long)]
    pub mode: Option<MaskMode>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file (overrides output.model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub passes: Option<usize>,
    /// Single λ (number of frozen weight layers).
    #[arg(long = "lambda", conflicts_with = "lambdas")]
    pub lambda: Option<usize>,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<usize>>,
    #[arg(long = "drop-prob", conflicts_with = "drop_probs")]
    pub drop_prob: Option<f64>,
    /// Comma-separated drop probabilities.
    #[arg(long, value_delimiter = ',')]
    pub drop_probs: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<MaskMode>,
    #[arg(long)]
    pub scale_mode: Option<ScaleMode>,
    #[arg(long)]
    pub cost_model: Option<CostModel>,
    /// Result file (overrides output.results; stdout when neither is set).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<OutputFormat>,
}

#[derive(Args, Debug, Default)]
pub struct OodArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Also write the ROC curves as CSV (lambda, threshold, tpr, fpr).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct RotateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated angles in degrees; must include 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    /// Use only the first N test images.
    #[arg(long)]
    pub limit: Option<usize>,
}

/// Parse `argv`, run the command and return the process exit code:
/// 0 on success, 1 for configuration errors, 2 for data and I/O errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let msg = e.render().to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "error[config]: {}", first.trim_start_matches("error: "));
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Train(a) => train(a, err),
        Command::Predict(a) => predict(a, false, out),
        Command::Sweep(a) => predict(a, true, out),
        Command::Ood(a) => ood(a, out),
        Command::Flops(a) => flops(a, out),
        Command::Rotate(a) => rotate(a, out),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn require_config(path: Option<&Path>, command: &str) -> Result<ExperimentConfig> {
    match path {
        Some(_) => load_config(path),
        None => Err(Error::Config(format!("`{command}` needs --config"))),
    }
}

/// Apply inference flags on top of the config file.
fn apply_overrides(cfg: &mut ExperimentConfig, a: &RunArgs) -> Result<()> {
    let inf = &mut cfg.inference;
    if let Some(k) = a.passes {
        inf.passes = k;
    }
    if let Some(l) = a.lambda {
        inf.lambdas = vec![l];
    }
    if let Some(ls) = &a.lambdas {
        inf.lambdas = ls.clone();
    }
    if let Some(p) = a.drop_prob {
        inf.drop_probs = vec![p];
    }
    if let Some(ps) = &a.drop_probs {
        inf.drop_probs = ps.clone();
    }
    if let Some(s) = a.seed {
        inf.seed = s;
    }
    if let Some(m) = a.mode {
        inf.mode = m;
    }
    if let Some(m) = a.scale_mode {
        inf.scale_mode = m;
    }
    if let Some(c) = a.cost_model {
        inf.cost_model = c;
    }
    if let Some(f) = a.format {
        cfg.output.format = f;
    }
    cfg.validate()
}

fn model_path(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    match (flag, &cfg.output.model) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) => Ok(cfg.resolve(p)),
        (None, None) => Err(Error::Config("no model path: pass --model or set output.model".into())),
    }
}

fn load_net(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<Network<f32>> {
    load_model(model_path(cfg, flag)?)
}

fn write_records(
    cfg: &ExperimentConfig,
    a: &RunArgs,
    records: &[ResultRecord],
    out: &mut dyn Write,
) -> Result<()> {
    let path = match (&a.out, &cfg.output.results) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(cfg.resolve(p)),
        (None, None) => None,
    };
    let format = match (&a.format, &path) {
        (None, Some(p)) if p.extension().is_some_and(|e| e == "csv") => OutputFormat::Csv,
        _ => cfg.output.format,
    };
    match path {
        Some(p) => emit_results(records, format, p)?,
        None => out.write_all(render(records, format)?.as_bytes())?,
    }
    Ok(())
}

fn train(a: TrainArgs, err: &mut dyn Write) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(lr) = a.lr_peak {
        cfg.train.lr_peak = lr;
        cfg.train.lr_floor = cfg.train.lr_floor.min(lr);
    }
    if let Some(p) = a.drop_prob {
        cfg.train.drop_prob = p;
    }
    if let Some(m) = a.mode {
        cfg.train.mode = m;
    }
    cfg.validate()?;
    let path = model_path(&cfg, a.model.as_deref())?;
    let train_set = cfg.train_set()?;
    let val = match cfg.data.test {
        Some(_) => Some(cfg.test_set()?),
        None => None,
    };
    let quiet = a.quiet;
    let (net, _) = harness::run_train(&cfg, &train_set, val.as_ref(), |m| {
        if !quiet {
            let val = m.val_accuracy.map_or(String::from("-"), |v| format!("{v:.4}"));
            let _ = writeln!(
                err,
                "epoch {:>3}  loss {:.4}  train_acc {:.4}  val_acc {val}  lr {:.5}",
                m.epoch, m.train_loss, m.train_accuracy, m.final_lr
            );
        }
    })?;
    save_model(&net, &path)
}

fn predict(a: RunArgs, sweep: bool, out: &mut dyn Write) -> Result<()> {
    let name = if sweep { "sweep" } else { "predict" };
    let mut cfg = require_config(a.config.as_deref(), name)?;
    apply_overrides(&mut cfg, &a)?;
    let net = load_net(&cfg, a.model.as_deref())?;
    let test = cfg.test_set()?;
    let records = if sweep {
        harness::run_sweep(&net, &test, &cfg.inference)?
    } else {
        let inf = &cfg.inference;
        let mc = inf.mc(inf.lambdas[0], inf.drop_probs[0], inf.seed);
        vec![harness::predict_record(&net, &test, &mc, inf.cost_model)?]
    };
    write_records(&cfg, &a, &records, out)
}

fn ood(a: OodArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = require_config(a.run.config.as_deref(), "ood")?;
    apply_overrides(&mut cfg, &a.run)?;
    let net = load_net(&cfg, a.run.model.as_deref())?;
    let (id, ood) = (cfg.test_set()?, cfg.ood_set()?);
    let inf = &cfg.inference;
    let mut records = vec![];
    let mut curve = String::from("lambda_frozen,threshold,tpr,fpr\r\n");
    for &lambda in &inf.lambdas {
        let mc = inf.mc(lambda, inf.drop_probs[0], inf.seed);
        let (r, report) = harness::ood_record(&net, &id, &ood, &mc, inf.cost_model)?;
        for p in &report.threshold_curve {
            curve.push_str(&format!(
                "{lambda},{},{},{}\r\n",
                selectdc::results::format_g9(p.threshold),
                selectdc::results::format_g9(p.tpr),
                selectdc::results::format_g9(p.fpr)
            ));
        }
        records.push(r);
    }
    if let Some(path) = &a.curve {
        ensure_parent(path)?;
        std::fs::write(path, curve)?;
    }
    write_records(&cfg, &a.run, &records, out)
}

fn flops(a: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    let explicit_lambdas = a.lambda.is_some() || a.lambdas.is_some();
    apply_overrides(&mut cfg, &a)?;
    let net = load_net(&cfg, a.model.as_deref())?;
    let lambdas: Vec<usize> = if explicit_lambdas || a.config.is_some() {
        cfg.inference.lambdas.clone()
    } else {
        (0..=net.n_weight_layers()).collect()
    };
    let records = harness::run_flops(&net, &lambdas, &cfg.inference)?;
    write_records(&cfg, &a, &records, out)
}

fn rotate(a: RotateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = require_config(a.run.config.as_deref(), "rotate")?;
    apply_overrides(&mut cfg, &a.run)?;
    if let Some(angles) = &a.angles {
        cfg.inference.angles = angles.clone();
    }
    let net = load_net(&cfg, a.run.model.as_deref())?;
    let mut test = cfg.test_set()?;
    if let Some(n) = a.limit {
        test = test.take(n);
    }
    let inf = &cfg.inference;
    let mc = inf.mc(inf.lambdas[0], inf.drop_probs[0], inf.seed);
    let (records, _) = harness::run_rotate(&net, &test, &inf.angles, &mc)?;
    write_records(&cfg, &a.run, &records, out)
}
