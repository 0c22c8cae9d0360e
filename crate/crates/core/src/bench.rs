//! Benchmark sweeps: cells of (method, M, β), each trained and evaluated
//! over a fixed number of seeded runs, with resumable on-disk records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, RegressionSet, DEFAULT_N};
use crate::error::{Error, Result};
use crate::evaluation::{
    best_k_mean, grid_density_model, grid_density_truth, kl_grid, run_seed, GridDensity, GridSpec,
};
use crate::methods::{MethodConfig, NceConfig};
use crate::model::{save_checkpoint, EbmModel, MlpSpec};
use crate::rng::derive;
use crate::trainer::{median, train, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "EBM_BENCH_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub dataset: Dataset,
    #[serde(default = "default_n")]
    pub n_train: usize,
    #[serde(default)]
    pub data_seed: u64,
    pub methods: Vec<MethodConfig>,
    /// Overrides `M` of every sampling method; one cell per value.
    #[serde(default)]
    pub m_sweep: Vec<usize>,
    /// Overrides `β` of every NCE+ method; `β = 0` runs plain NCE.
    #[serde(default)]
    pub beta_sweep: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    #[serde(default = "default_best_k")]
    pub best_k: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: MlpSpec,
    #[serde(default)]
    pub grid: GridSpec,
    /// Used when no output directory is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_runs() -> usize {
    20
}

fn default_best_k() -> usize {
    5
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub label: String,
    pub method: MethodConfig,
    pub m: Option<usize>,
    pub beta: Option<f64>,
}

fn mcmc(steps: usize) -> MethodConfig {
    match MethodConfig::default_for("ml-mcmc").expect("known method") {
        MethodConfig::MlMcmc(mut c) => {
            c.steps = steps;
            MethodConfig::MlMcmc(c)
        }
        _ => unreachable!(),
    }
}

fn defaults(names: &[&str]) -> Vec<MethodConfig> {
    names.iter().map(|n| MethodConfig::default_for(n).expect("known method")).collect()
}

impl ExperimentSpec {
    fn base(name: &str, methods: Vec<MethodConfig>) -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            dataset: Dataset::ds2(),
            n_train: DEFAULT_N,
            data_seed: 0,
            methods,
            m_sweep: Vec::new(),
            beta_sweep: Vec::new(),
            runs_per_cell: 20,
            best_k: 5,
            base_seed: 0,
            train: TrainConfig::default(),
            model: MlpSpec::default(),
            grid: GridSpec::default(),
            output_dir: None,
        }
    }

    /// All seven methods at `M = 1024`, with ML-MCMC at `L ∈ {1, 16, 64}`
    /// (`256` instead of `64` when `full`).
    pub fn compare(full: bool) -> Self {
        let mut methods = defaults(&["ml-is", "kld-is", "nce", "nce+", "sm", "dsm"]);
        methods.extend([mcmc(1), mcmc(16), mcmc(if full { 256 } else { 64 })]);
        Self::base(if full { "compare-full" } else { "compare" }, methods)
    }

    /// Sample-count sweep of the four sampling-based methods.
    pub fn samples() -> Self {
        let mut s = Self::base("samples", defaults(&["ml-is", "kld-is", "nce", "nce+"]));
        s.m_sweep = vec![1, 4, 16, 64, 256, 1024];
        s
    }

    /// `β` sweep of NCE+.
    pub fn beta() -> Self {
        let mut s = Self::base("beta", defaults(&["nce+"]));
        s.beta_sweep = vec![0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.4, 0.8];
        s
    }

    /// A seconds-long configuration touching every method.
    pub fn smoke() -> Self {
        let mut methods = defaults(&["ml-is", "kld-is", "nce", "nce+", "sm", "dsm"]);
        methods.push(mcmc(2));
        let mut s = Self::base("smoke", methods.into_iter().map(|m| m.with_num_samples(8)).collect());
        s.n_train = 64;
        s.runs_per_cell = 3;
        s.best_k = 2;
        s.train.epochs = 2;
        s.grid = GridSpec { nx: 64, ny: 64, ..GridSpec::default() };
        s
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "compare" => Ok(Self::compare(false)),
            "compare-full" => Ok(Self::compare(true)),
            "samples" => Ok(Self::samples()),
            "beta" => Ok(Self::beta()),
            "smoke" => Ok(Self::smoke()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected compare, compare-full, samples, beta or smoke)"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read experiment spec {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("experiment lists no methods".into()));
        }
        if self.n_train == 0 {
            return Err(Error::Config("n_train must be at least 1".into()));
        }
        if self.runs_per_cell == 0 || self.best_k == 0 || self.best_k > self.runs_per_cell {
            return Err(Error::Config(format!(
                "need 1 ≤ best_k ≤ runs_per_cell, got best_k {} of {}",
                self.best_k, self.runs_per_cell
            )));
        }
        if self.m_sweep.contains(&0) {
            return Err(Error::Config("m_sweep entries must be at least 1".into()));
        }
        if self.beta_sweep.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::Config("beta_sweep entries must be finite and nonnegative".into()));
        }
        self.train.validate()?;
        self.model.validate()?;
        self.grid.validate()?;
        for cell in self.cells() {
            cell.method.validate()?;
        }
        Ok(())
    }

    /// Expands methods × sweeps into cells, in spec order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for method in &self.methods {
            let ms: Vec<Option<usize>> = match method.num_samples() {
                Some(_) if !self.m_sweep.is_empty() => self.m_sweep.iter().map(|&m| Some(m)).collect(),
                _ => vec![None],
            };
            let betas: Vec<Option<f64>> = match method {
                MethodConfig::NcePlus(_) if !self.beta_sweep.is_empty() => {
                    self.beta_sweep.iter().map(|&b| Some(b)).collect()
                }
                _ => vec![None],
            };
            for &m in &ms {
                for &beta in &betas {
                    let mut cfg = match m {
                        Some(m) => method.clone().with_num_samples(m),
                        None => method.clone(),
                    };
                    if let (Some(b), MethodConfig::NcePlus(c)) = (beta, &mut cfg) {
                        if b == 0.0 {
                            cfg = MethodConfig::Nce(NceConfig { m: c.m, noise: c.noise.clone() });
                        } else {
                            c.beta = b;
                        }
                    }
                    let mut label = cfg.label();
                    if !self.m_sweep.is_empty() && cfg.num_samples().is_some() {
                        let _ = write!(label, " M={}", cfg.num_samples().unwrap_or(0));
                    }
                    if let Some(b) = beta {
                        let _ = write!(label, " beta={b}");
                    }
                    let id = cell_id(&label);
                    cells.push(Cell { id, label, m: cfg.num_samples(), beta, method: cfg });
                }
            }
        }
        cells
    }
}

fn cell_id(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            'a'..='z' | '0'..='9' | '.' | '-' => c,
            'A'..='Z' => c.to_ascii_lowercase(),
            '+' => 'p',
            _ => '_',
        })
        .collect()
}

/// One training run plus its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub cell: String,
    pub run: usize,
    pub seed: u64,
    /// Digest of everything that determines this run's outcome.
    pub fingerprint: String,
    /// `None` when training failed.
    pub kl: Option<f64>,
    pub failure: Option<String>,
    pub loss_curve: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub wall_seconds_per_epoch: f64,
}

/// Trains one model from `(init_seed, train.seed)` and scores it against
/// `truth`.
pub fn train_and_evaluate(
    data: &RegressionSet,
    truth: &GridDensity,
    method: &MethodConfig,
    model_spec: &MlpSpec,
    train_cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(EbmModel, RunResultCore)> {
    let model = EbmModel::init(model_spec.clone(), init_seed)?;
    let out = train(model, data, method, train_cfg)?;
    let r = out.record;
    let (kl, failure) = match &r.failure {
        Some(f) => (None, Some(format!("epoch {} batch {}: {}", f.epoch, f.batch, f.message))),
        None => match grid_density_model(&out.model, *truth.grid()) {
            Ok(d) => {
                let v = kl_grid(truth, &d)?.value;
                if v.is_finite() {
                    (Some(v), None)
                } else {
                    (None, Some("non-finite KL".into()))
                }
            }
            Err(e) if e.is_numerical() => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        },
    };
    Ok((
        out.model,
        RunResultCore {
            kl,
            failure,
            loss_curve: r.loss_curve,
            epoch_seconds: r.epoch_seconds,
            wall_seconds_per_epoch: r.wall_seconds_per_epoch,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResultCore {
    pub kl: Option<f64>,
    pub failure: Option<String>,
    pub loss_curve: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub wall_seconds_per_epoch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub label: String,
    pub method: String,
    pub m: Option<usize>,
    pub beta: Option<f64>,
    pub dataset: String,
    pub runs: usize,
    pub best_k: usize,
    /// `+∞` when fewer than `best_k` runs succeeded.
    pub best_k_mean: f64,
    pub failures: usize,
    /// Per-run KL in run order, `inf` for failures.
    pub values: Vec<f64>,
    pub seconds_per_epoch: f64,
}

impl ResultRow {
    pub fn protocol_ok(&self) -> bool {
        self.best_k_mean.is_finite()
    }
}

const RESULTS_HEADER: &str = "label,method,M,beta,dataset,runs,best_k,best_k_mean,failures,status,values";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn row(&self, label: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Deterministic columns only; floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RESULTS_HEADER);
        s.push('\n');
        for r in &self.rows {
            let values: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.label,
                r.method,
                opt(&r.m),
                opt(&r.beta),
                r.dataset,
                r.runs,
                r.best_k,
                r.best_k_mean,
                r.failures,
                if r.protocol_ok() { "ok" } else { "protocol_error" },
                values.join(";")
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(RESULTS_HEADER) {
            return Err(Error::Parse("results.csv: unexpected header".into()));
        }
        let num = |t: &str, what: &str| -> Result<f64> {
            t.parse::<f64>().map_err(|e| Error::Parse(format!("results.csv {what} `{t}`: {e}")))
        };
        let int = |t: &str, what: &str| -> Result<usize> {
            t.parse::<usize>().map_err(|e| Error::Parse(format!("results.csv {what} `{t}`: {e}")))
        };
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(Error::Parse(format!("results.csv: expected 11 columns in `{line}`")));
            }
            rows.push(ResultRow {
                label: f[0].into(),
                method: f[1].into(),
                m: if f[2].is_empty() { None } else { Some(int(f[2], "M")?) },
                beta: if f[3].is_empty() { None } else { Some(num(f[3], "beta")?) },
                dataset: f[4].into(),
                runs: int(f[5], "runs")?,
                best_k: int(f[6], "best_k")?,
                best_k_mean: num(f[7], "best_k_mean")?,
                failures: int(f[8], "failures")?,
                values: if f[10].is_empty() {
                    Vec::new()
                } else {
                    f[10].split(';').map(|v| num(v, "value")).collect::<Result<_>>()?
                },
                seconds_per_epoch: 0.0,
            });
        }
        Ok(ResultTable { rows })
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("label,seconds_per_epoch\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6}", r.label, r.seconds_per_epoch);
        }
        s
    }

    /// Rows ranked by best-k mean.
    pub fn summary_markdown(&self, title: &str) -> String {
        let mut rows: Vec<&ResultRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.best_k_mean.total_cmp(&b.best_k_mean));
        let mut s = format!(
            "# {title}\n\n| rank | method | D_KL (best {} of {}) | failures | s/epoch |\n|---|---|---|---|---|\n",
            rows.first().map_or(0, |r| r.best_k),
            rows.first().map_or(0, |r| r.runs)
        );
        for (i, r) in rows.iter().enumerate() {
            let kl = if r.protocol_ok() { format!("{:.4}", r.best_k_mean) } else { "protocol error".into() };
            let _ = writeln!(s, "| {} | {} | {} | {} | {:.3} |", i + 1, r.label, kl, r.failures, r.seconds_per_epoch);
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub out_dir: PathBuf,
    /// Worker count; `EBM_BENCH_THREADS` takes precedence, then this, then
    /// the number of available cores.
    pub threads: Option<usize>,
    pub quiet: bool,
}

pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        };
    }
    Ok(requested.filter(|n| *n > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Output file layout under the bench directory.
pub struct BenchPaths {
    pub root: PathBuf,
}

impl BenchPaths {
    pub fn run_record(&self, cell: &str, run: usize) -> PathBuf {
        self.root.join("runs").join(cell).join(format!("run_{run:02}.json"))
    }

    pub fn checkpoint(&self, cell: &str, run: usize) -> PathBuf {
        self.root.join("runs").join(cell).join(format!("run_{run:02}.ebm.json"))
    }

    pub fn results_csv(&self) -> PathBuf {
        self.root.join("results.csv")
    }

    pub fn timing_csv(&self) -> PathBuf {
        self.root.join("timing.csv")
    }

    pub fn summary_md(&self) -> PathBuf {
        self.root.join("summary.md")
    }
}

fn fingerprint(spec: &ExperimentSpec, cell: &Cell, seed: u64) -> String {
    let key = serde_json::json!({
        "dataset": spec.dataset,
        "n_train": spec.n_train,
        "data_seed": spec.data_seed,
        "method": cell.method,
        "train": spec.train,
        "model": spec.model,
        "grid": spec.grid,
        "seed": seed,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_record(path: &Path, fp: &str) -> Option<RunResult> {
    let text = std::fs::read_to_string(path).ok()?;
    let rec: RunResult = serde_json::from_str(&text).ok()?;
    (rec.fingerprint == fp).then_some(rec)
}

/// Runs every missing (cell, run) pair, then aggregates all records into
/// `results.csv`, `timing.csv` and `summary.md` under `opts.out_dir`.
pub fn run_bench(spec: &ExperimentSpec, opts: &BenchOptions) -> Result<ResultTable> {
    spec.validate()?;
    let paths = BenchPaths { root: opts.out_dir.clone() };
    std::fs::create_dir_all(&paths.root)?;
    std::fs::write(paths.root.join("experiment.json"), spec.to_json())?;
    let cells = spec.cells();
    let data = spec.dataset.generate(spec.n_train, spec.data_seed)?;

    let mut jobs = Vec::new();
    for run in 0..spec.runs_per_cell {
        let seed = run_seed(spec.base_seed, run);
        for (ci, cell) in cells.iter().enumerate() {
            let fp = fingerprint(spec, cell, seed);
            if load_record(&paths.run_record(&cell.id, run), &fp).is_none() {
                jobs.push((ci, run, seed, fp));
            }
        }
    }

    if !jobs.is_empty() {
        let truth = grid_density_truth(&spec.dataset, spec.grid)?;
        let workers = worker_count(opts.threads)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let done = AtomicUsize::new(0);
        let total = jobs.len();
        if !opts.quiet {
            eprintln!("{}: {total} runs to do on {workers} workers", spec.name);
        }
        pool.install(|| {
            jobs.par_iter().try_for_each(|(ci, run, seed, fp)| -> Result<()> {
                let cell = &cells[*ci];
                let train_cfg = TrainConfig { seed: derive(&[*seed, 2]), ..spec.train.clone() };
                let (model, core) =
                    train_and_evaluate(&data, &truth, &cell.method, &spec.model, &train_cfg, derive(&[*seed, 1]))?;
                let rec = RunResult {
                    cell: cell.id.clone(),
                    run: *run,
                    seed: *seed,
                    fingerprint: fp.clone(),
                    kl: core.kl,
                    failure: core.failure,
                    loss_curve: core.loss_curve,
                    epoch_seconds: core.epoch_seconds,
                    wall_seconds_per_epoch: core.wall_seconds_per_epoch,
                };
                let path = paths.run_record(&cell.id, *run);
                std::fs::create_dir_all(path.parent().expect("record has a parent"))?;
                std::fs::write(paths.checkpoint(&cell.id, *run), save_checkpoint(&model))?;
                // write-then-rename so an interrupted run never leaves a half record
                let tmp = path.with_extension("json.tmp");
                std::fs::write(&tmp, serde_json::to_string_pretty(&rec)?)?;
                std::fs::rename(&tmp, &path)?;
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if !opts.quiet {
                    let kl = rec.kl.map_or_else(|| "failed".to_string(), |v| format!("{v:.4}"));
                    eprintln!(
                        "[{n}/{total}] {} run {} KL {kl} ({:.2}s/epoch)",
                        cell.label, run, rec.wall_seconds_per_epoch
                    );
                }
                Ok(())
            })
        })?;
    }

    let mut table = ResultTable::default();
    for cell in &cells {
        let mut values = Vec::with_capacity(spec.runs_per_cell);
        let mut secs = Vec::new();
        for run in 0..spec.runs_per_cell {
            let seed = run_seed(spec.base_seed, run);
            let rec = load_record(&paths.run_record(&cell.id, run), &fingerprint(spec, cell, seed))
                .ok_or_else(|| Error::Protocol(format!("missing record for {} run {run}", cell.label)))?;
            values.push(rec.kl.unwrap_or(f64::INFINITY));
            if rec.wall_seconds_per_epoch > 0.0 {
                secs.push(rec.wall_seconds_per_epoch);
            }
        }
        let (best, failures) = match best_k_mean(&values, spec.best_k) {
            Ok(s) => (s.best_k_mean, s.failures),
            Err(Error::Protocol(_)) => (f64::INFINITY, values.iter().filter(|v| !v.is_finite()).count()),
            Err(e) => return Err(e),
        };
        table.rows.push(ResultRow {
            label: cell.label.clone(),
            method: cell.method.name().into(),
            m: cell.m,
            beta: cell.beta,
            dataset: spec.dataset.name().into(),
            runs: spec.runs_per_cell,
            best_k: spec.best_k,
            best_k_mean: best,
            failures,
            values,
            seconds_per_epoch: median(&secs),
        });
    }
    std::fs::write(paths.results_csv(), table.to_csv())?;
    std::fs::write(paths.timing_csv(), table.timing_csv())?;
    std::fs::write(paths.summary_md(), table.summary_markdown(&spec.name))?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_expand() {
        let t = ExperimentSpec::compare(false);
        t.validate().unwrap();
        let labels: Vec<String> = t.cells().into_iter().map(|c| c.label).collect();
        assert_eq!(labels, ["ML-IS", "KLD-IS", "NCE", "NCE+", "SM", "DSM", "ML-MCMC-1", "ML-MCMC-16", "ML-MCMC-64"]);
        assert_eq!(ExperimentSpec::compare(true).cells()[8].label, "ML-MCMC-256");
        assert_eq!(ExperimentSpec::samples().cells().len(), 24);
        let f5 = ExperimentSpec::beta().cells();
        assert_eq!(f5.len(), 8);
        assert_eq!(f5[0].method.name(), "nce");
        assert!(matches!(&f5[3].method, MethodConfig::NcePlus(c) if c.beta == 0.1));
    }

    #[test]
    fn spec_json_round_trip_and_errors() {
        let s = ExperimentSpec::samples();
        assert_eq!(ExperimentSpec::from_json(&s.to_json()).unwrap(), s);
        let mut bad = s.clone();
        bad.schema_version = 9;
        assert!(ExperimentSpec::from_json(&bad.to_json()).is_err());
        let mut bad = s;
        bad.best_k = 30;
        assert!(bad.validate().is_err());
        assert!(ExperimentSpec::from_json("{}").is_err());
    }

    #[test]
    fn minimal_spec_uses_defaults() {
        let s = ExperimentSpec::from_json(
            r#"{"schema_version": 1, "name": "x", "dataset": {"name": "ds2"}, "methods": [{"method": "nce"}, {"method": "sm"}]}"#,
        )
        .unwrap();
        assert_eq!(s.runs_per_cell, 20);
        assert_eq!(s.train.epochs, 75);
        assert_eq!(s.methods[0], MethodConfig::default_for("nce").unwrap());
    }

    #[test]
    fn results_csv_round_trips() {
        let t = ResultTable {
            rows: vec![ResultRow {
                label: "NCE+ beta=0.1".into(),
                method: "nce+".into(),
                m: Some(1024),
                beta: Some(0.1),
                dataset: "ds2".into(),
                runs: 3,
                best_k: 2,
                best_k_mean: 0.1 + 0.2,
                failures: 1,
                values: vec![0.1, f64::INFINITY, 0.2],
                seconds_per_epoch: 0.0,
            }],
        };
        assert_eq!(ResultTable::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn cell_ids_are_path_safe() {
        assert_eq!(cell_id("NCE+ M=16 beta=0.05"), "ncep_m_16_beta_0.05");
    }
}
