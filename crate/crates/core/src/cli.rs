//! Command-line front end behind the `ebm-bench` binary.
//!
//! Exit codes: 0 on success (a run that failed numerically is a recorded
//! result, not an error), 2 for usage and configuration errors, 1 for
//! anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::autodiff::Activation;
use crate::bench::{run_bench, BenchOptions, ExperimentSpec, ResultTable};
use crate::checks::selfcheck;
use crate::data::{Dataset, Dataset1Truth, RegressionSet};
use crate::error::{Error, Result};
use crate::evaluation::{grid_density_model, grid_density_truth, kl_grid, predict, GridSpec, PredictorConfig};
use crate::methods::MethodConfig;
use crate::model::{load_checkpoint, save_checkpoint, EbmModel, MlpSpec};
use crate::trainer::{train_observed, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "ebm-bench", version, about = "Train and benchmark conditional energy-based regression models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic regression dataset to CSV.
    GenData(GenDataArgs),
    /// Train one model and write its checkpoint and run record.
    Train(TrainArgs),
    /// Grid KL of a checkpoint against the true density.
    Eval(EvalArgs),
    /// Run an experiment sweep.
    Bench(BenchArgs),
    /// Write a density heatmap (PGM) or a sweep curve (CSV).
    Plot(PlotArgs),
    /// Refine a prediction by gradient ascent on f(x, ·).
    Predict(PredictArgs),
    /// Run the invariant suite.
    Selfcheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DatasetName {
    Ds1,
    Ds2,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetName,
    /// Dataset 1 component means for x < 0, as `a,b`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ds1_means: Option<Vec<f64>>,
    /// Dataset 1 component stds for x < 0, as `a,b`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ds1_stds: Option<Vec<f64>>,
}

impl DatasetArgs {
    pub fn resolve(&self) -> Result<Dataset> {
        match self.dataset {
            DatasetName::Ds2 => {
                if self.ds1_means.is_some() || self.ds1_stds.is_some() {
                    return Err(Error::Config("--ds1-means/--ds1-stds only apply to ds1".into()));
                }
                Ok(Dataset::ds2())
            }
            DatasetName::Ds1 => {
                let d = Dataset1Truth::default();
                let means = self.ds1_means.clone().unwrap_or_else(|| d.neg_x_mixture.means().to_vec());
                let stds = self.ds1_stds.clone().unwrap_or_else(|| d.neg_x_mixture.stds().to_vec());
                if means.len() != 2 || stds.len() != 2 {
                    return Err(Error::Config("--ds1-means and --ds1-stds take two comma-separated values".into()));
                }
                Ok(Dataset::Ds1(Dataset1Truth::with_components([means[0], means[1]], [stds[0], stds[1]])?))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(long, default_value_t = crate::data::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Softplus,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// ml-is, kld-is, ml-mcmc, nce, sm, dsm or nce+.
    #[arg(long)]
    pub method: String,
    /// Method config as JSON (overrides defaults; flags override the file).
    #[arg(long)]
    pub method_config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Training seed (shuffling and sampling).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameter initialization seed; defaults to `--seed`.
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long, default_value_t = 75)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_t: Option<f64>,
    #[arg(long)]
    pub self_normalize: bool,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    /// Output prefix: writes `<out>.ebm.json` and `<out>.run.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid cells per axis over [-3, 3].
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec { nx: self.grid, ny: self.grid, ..GridSpec::default() }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "self_test")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Compare the true density with itself instead of a checkpoint.
    #[arg(long)]
    pub self_test: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment spec JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub spec: Option<PathBuf>,
    /// compare, compare-full, samples, beta or smoke.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (defaults to the spec's `output_dir`, then `bench-<name>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; the EBM_BENCH_THREADS environment variable wins.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides runs per cell.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Overrides epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Write the resolved spec to stdout and exit.
    #[arg(long)]
    pub print_spec: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Density heatmap of a checkpoint or of the true density.
    Heatmap(HeatmapArgs),
    /// Best-k mean against M (or beta) per method, from a results.csv.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, conflicts_with = "truth")]
    pub checkpoint: Option<PathBuf>,
    /// Plot the true density of ds1 or ds2.
    #[arg(long, value_enum, required_unless_present = "checkpoint")]
    pub truth: Option<DatasetName>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 4)]
    pub downsample: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y_hat: f64,
    #[arg(long = "T", default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
}

fn usage(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let ds = a.dataset.resolve()?;
    let set = ds.generate(a.n, a.seed)?;
    let csv = set.to_csv();
    std::fs::write(&a.out, &csv)?;
    println!("wrote {} rows to {} (sha256 {})", set.len(), a.out.display(), sha256_hex(csv.as_bytes()));
    Ok(())
}

fn method_from_args(a: &TrainArgs) -> Result<MethodConfig> {
    let mut cfg = match &a.method_config {
        Some(p) => {
            let text = String::from_utf8_lossy(&read_input(p)?).into_owned();
            let cfg: MethodConfig =
                serde_json::from_str(&text).map_err(|e| usage(format!("method config {}: {e}", p.display())))?;
            if cfg.name() != a.method {
                return Err(usage(format!("method config is {}, but --method is {}", cfg.name(), a.method)));
            }
            cfg
        }
        None => MethodConfig::default_for(&a.method)?,
    };
    if let Some(m) = a.m {
        if cfg.num_samples().is_none() {
            return Err(usage("--M does not apply to sm"));
        }
        cfg = cfg.with_num_samples(m);
    }
    let reject = |flag: &str| Err(usage(format!("{flag} does not apply to {}", a.method)));
    match &mut cfg {
        MethodConfig::MlMcmc(c) => {
            if let Some(l) = a.steps {
                c.steps = l;
            }
            if let Some(al) = a.alpha {
                c.alpha = al;
            }
        }
        _ if a.steps.is_some() || a.alpha.is_some() => return reject("--L/--alpha"),
        _ => {}
    }
    match &mut cfg {
        MethodConfig::NcePlus(c) => {
            if let Some(b) = a.beta {
                c.beta = b;
            }
        }
        _ if a.beta.is_some() => return reject("--beta"),
        _ => {}
    }
    match &mut cfg {
        MethodConfig::Dsm(c) => {
            if let Some(s) = a.sigma {
                c.sigma = s;
            }
        }
        _ if a.sigma.is_some() => return reject("--sigma"),
        _ => {}
    }
    match &mut cfg {
        MethodConfig::KldIs(c) => {
            if let Some(s) = a.sigma_t {
                c.sigma_t = s;
            }
            c.self_normalize |= a.self_normalize;
        }
        _ if a.sigma_t.is_some() || a.self_normalize => return reject("--sigma-t/--self-normalize"),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let method = method_from_args(a)?;
    let data = RegressionSet::from_csv(&String::from_utf8_lossy(&read_input(&a.data)?))?;
    let cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch_size, lr: a.lr, seed: a.seed, ..Default::default() };
    cfg.validate()?;
    let act = match a.activation {
        ActivationArg::Relu => Activation::Relu,
        ActivationArg::Softplus => Activation::Softplus,
    };
    let model = EbmModel::init(MlpSpec::default().with_activation(act), a.init_seed.unwrap_or(a.seed))?;
    let quiet = a.quiet;
    let out = train_observed(model, &data, &method, &cfg, &mut |e, loss, secs| {
        if !quiet {
            eprintln!("epoch {:>3}  loss {loss:.6}  {secs:.2}s", e + 1);
        }
    })?;
    let ckpt = with_suffix(&a.out, ".ebm.json");
    let run = with_suffix(&a.out, ".run.json");
    std::fs::write(&ckpt, save_checkpoint(&out.model))?;
    let mut record = out.record;
    record.checkpoint = Some(ckpt.display().to_string());
    std::fs::write(&run, serde_json::to_string_pretty(&record)?)?;
    match &record.failure {
        Some(f) => println!(
            "run failed at epoch {} batch {}: {} (recorded in {})",
            f.epoch + 1,
            f.batch,
            f.message,
            run.display()
        ),
        None => println!(
            "trained {} for {} epochs, final loss {:.6}, {:.3}s/epoch; wrote {}",
            method.label(),
            record.loss_curve.len(),
            record.loss_curve.last().copied().unwrap_or(f64::NAN),
            record.wall_seconds_per_epoch,
            ckpt.display()
        ),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<EbmModel> {
    load_checkpoint(&read_input(path)?)
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let ds = a.dataset.resolve()?;
    let grid = a.grid.spec();
    grid.validate()?;
    let truth = grid_density_truth(&ds, grid)?;
    let (kl, source) = if a.self_test {
        (kl_grid(&truth, &truth)?, "truth".to_string())
    } else {
        let path = a.checkpoint.as_ref().expect("clap enforces");
        let model = load_model(path)?;
        (kl_grid(&truth, &grid_density_model(&model, grid)?)?, path.display().to_string())
    };
    println!("D_KL = {:.6}", kl.value);
    if let Some(out) = &a.out {
        let v = json!({
            "dataset": ds,
            "source": source,
            "grid": grid,
            "kl": if kl.value.is_finite() { json!(kl.value) } else { json!("inf") },
            "offending_cells": kl.offending_cells,
        });
        std::fs::write(out, serde_json::to_string_pretty(&v)?)?;
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let mut spec = match (&a.spec, &a.preset) {
        (Some(p), _) => ExperimentSpec::from_json(&String::from_utf8_lossy(&read_input(p)?))?,
        (None, Some(name)) => ExperimentSpec::preset(name)?,
        (None, None) => return Err(usage("give --spec or --preset")),
    };
    if let Some(r) = a.runs {
        spec.runs_per_cell = r;
        spec.best_k = spec.best_k.min(r);
    }
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    spec.validate()?;
    if a.print_spec {
        println!("{}", spec.to_json());
        return Ok(());
    }
    let out_dir = a
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("bench-{}", spec.name)));
    let table = run_bench(&spec, &BenchOptions { out_dir: out_dir.clone(), threads: a.threads, quiet: a.quiet })?;
    print!("{}", table.summary_markdown(&spec.name));
    println!("\nresults in {}", out_dir.display());
    Ok(())
}

fn plot_cmd(a: &PlotArgs) -> Result<()> {
    match &a.kind {
        PlotKind::Heatmap(h) => {
            let grid = h.grid.spec();
            let d = match (&h.checkpoint, h.truth) {
                (Some(p), _) => grid_density_model(&load_model(p)?, grid)?,
                (None, Some(name)) => {
                    let ds = match name {
                        DatasetName::Ds1 => Dataset::ds1(),
                        DatasetName::Ds2 => Dataset::ds2(),
                    };
                    grid_density_truth(&ds, grid)?
                }
                (None, None) => return Err(usage("give --checkpoint or --truth")),
            };
            let img = d.to_pgm(h.downsample)?;
            std::fs::write(&h.out, img)?;
            println!("wrote {}", h.out.display());
        }
        PlotKind::Curve(c) => {
            let table = ResultTable::from_csv(&String::from_utf8_lossy(&read_input(&c.results)?))?;
            let mut s = String::from("method,M,beta,best_k_mean,failures\n");
            for r in &table.rows {
                let m = r.m.map(|v| v.to_string()).unwrap_or_default();
                let b = r.beta.map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{m},{b},{},{}\n", r.method, r.best_k_mean, r.failures));
            }
            std::fs::write(&c.out, s)?;
            println!("wrote {}", c.out.display());
        }
    }
    Ok(())
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let cfg = PredictorConfig { iterations: a.iterations, lambda: a.lambda, eta: a.eta };
    let y = predict(&model, a.x, a.y_hat, &cfg)?;
    println!("{y}");
    Ok(())
}

fn selfcheck_cmd() -> Result<bool> {
    let mut ok = true;
    for c in selfcheck()? {
        println!("{}", c.line());
        ok &= c.passed;
    }
    Ok(ok)
}

/// Executes a parsed command.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenData(a) => gen_data(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Eval(a) => eval_cmd(a)?,
        Command::Bench(a) => bench_cmd(a)?,
        Command::Plot(a) => plot_cmd(a)?,
        Command::Predict(a) => predict_cmd(a)?,
        Command::Selfcheck => return selfcheck_cmd(),
    }
    Ok(true)
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Checkpoint { .. } | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Parses `std::env::args`, runs, and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn train_flags_map_to_method_config() {
        let cli = Cli::try_parse_from([
            "ebm-bench",
            "train",
            "--method",
            "ml-mcmc",
            "--L",
            "256",
            "--alpha",
            "0.05",
            "--data",
            "d.csv",
            "--out",
            "m",
        ])
        .unwrap();
        let Command::Train(a) = &cli.command else { panic!() };
        match method_from_args(a).unwrap() {
            MethodConfig::MlMcmc(c) => assert_eq!((c.steps, c.m), (256, 1024)),
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from([
            "ebm-bench",
            "train",
            "--method",
            "nce",
            "--beta",
            "0.1",
            "--data",
            "d",
            "--out",
            "m",
        ])
        .unwrap();
        let Command::Train(a) = &cli.command else { panic!() };
        assert!(matches!(method_from_args(a), Err(Error::Config(_))));
    }

    #[test]
    fn usage_errors_map_to_two() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Protocol("x".into())), 1);
        assert!(Cli::try_parse_from(["ebm-bench", "gen-data", "--dataset", "ds3", "--out", "x"]).is_err());
    }
}
