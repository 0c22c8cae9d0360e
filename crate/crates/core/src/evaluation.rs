//! Grid densities, discrete KL, the best-k-of-n protocol and the
//! gradient-ascent predictor.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{logsumexp, Jet2};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Energy, Order};
use crate::rng::derive;

/// A uniform grid of cell centers over `[lo, hi]` in both `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 2048, ny: 2048, lo: -3.0, hi: 3.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.hi.is_nan() || self.lo.is_nan() || self.hi <= self.lo {
            return Err(Error::Config(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.hi - self.lo) / self.ny as f64
    }

    /// `lo + (j + ½)·Δx`.
    pub fn x(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|k| self.y(k)).collect()
    }
}

/// Per-column normalized log densities: `Σ_k exp(logp[j][k])·Δy = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: GridSpec,
    /// Column-major, `ny` entries per `x` column.
    logp: Vec<f64>,
}

impl GridDensity {
    /// Builds a density from unnormalized log values, one column at a time.
    pub fn from_columns<F>(grid: GridSpec, column: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]) + Sync,
    {
        grid.validate()?;
        let ys = grid.ys();
        let ln_dy = grid.dy().ln();
        let mut logp = vec![0.0; grid.nx * grid.ny];
        logp.par_chunks_mut(grid.ny).enumerate().for_each(|(j, col)| {
            column(grid.x(j), &ys, col);
            let z = logsumexp(col) + ln_dy;
            for v in col.iter_mut() {
                *v -= z;
            }
        });
        if let Some(i) = logp.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFiniteNode { node: i });
        }
        Ok(GridDensity { grid, logp })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.logp[j * self.grid.ny..(j + 1) * self.grid.ny]
    }

    pub fn logp(&self, j: usize, k: usize) -> f64 {
        self.logp[j * self.grid.ny + k]
    }

    /// Discrete cell probability `exp(logp)·Δy`.
    pub fn prob(&self, j: usize, k: usize) -> f64 {
        self.logp(j, k).exp() * self.grid.dy()
    }

    pub fn column_mass(&self, j: usize) -> f64 {
        let dy = self.grid.dy();
        self.column(j).iter().map(|v| v.exp() * dy).sum()
    }

    /// Index of the most probable `y` cell in column `j` (first on ties).
    pub fn column_argmax(&self, j: usize) -> usize {
        let col = self.column(j);
        let mut best = 0;
        for (k, &v) in col.iter().enumerate() {
            if v > col[best] {
                best = k;
            }
        }
        best
    }

    /// `x_index,y_index,probability` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.logp.len() * 32);
        s.push_str("x_index,y_index,probability\n");
        for j in 0..self.grid.nx {
            for k in 0..self.grid.ny {
                let _ = writeln!(s, "{j},{k},{:.10e}", self.prob(j, k));
            }
        }
        s
    }

    /// Binary 8-bit PGM; `x` runs left to right, `y` bottom to top. Cell
    /// probabilities are averaged over `factor × factor` blocks and mapped
    /// linearly so that the largest is white. A constant image is mid-grey.
    pub fn to_pgm(&self, factor: usize) -> Result<Vec<u8>> {
        let f = factor.max(1);
        if !self.grid.nx.is_multiple_of(f) || !self.grid.ny.is_multiple_of(f) {
            return Err(Error::Config(format!("downsample factor {f} does not divide the grid")));
        }
        let (w, h) = (self.grid.nx / f, self.grid.ny / f);
        let mut cells = vec![0.0; w * h];
        for bj in 0..w {
            for bk in 0..h {
                let mut acc = 0.0;
                for j in bj * f..(bj + 1) * f {
                    for k in bk * f..(bk + 1) * f {
                        acc += self.prob(j, k);
                    }
                }
                cells[bk * w + bj] = acc / (f * f) as f64;
            }
        }
        let max = cells.iter().copied().fold(0.0, f64::max);
        let min = cells.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for row in (0..h).rev() {
            for col in 0..w {
                let v = cells[row * w + col];
                let px = if max > min { (255.0 * v / max).round() } else { 128.0 };
                out.push(px.clamp(0.0, 255.0) as u8);
            }
        }
        Ok(out)
    }
}

/// `f(x, y)` of `energy` on every grid cell, normalized per column.
pub fn grid_density_model(energy: &dyn Energy, grid: GridSpec) -> Result<GridDensity> {
    if let Some(index) = energy.params().iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFiniteParam { index });
    }
    GridDensity::from_columns(grid, |x, ys, col| {
        let mut out = vec![Jet2::ZERO; ys.len()];
        energy.eval_group(x, ys, Order::Value, &mut out);
        for (c, o) in col.iter_mut().zip(&out) {
            *c = o.v;
        }
    })
}

/// The true conditional density on the grid; cells outside the support
/// carry zero probability.
pub fn grid_density_truth(ds: &Dataset, grid: GridSpec) -> Result<GridDensity> {
    GridDensity::from_columns(grid, |x, ys, col| {
        for (c, &y) in col.iter_mut().zip(ys) {
            *c = ds.true_logpdf(x, y);
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlResult {
    /// Mean over columns of the discrete KL; `+∞` if any column has truth
    /// mass where the model has none.
    pub value: f64,
    pub offending_cells: usize,
}

/// `mean_j Σ_k q₁ log(q₁/q₂)` with `0·log 0 = 0`.
pub fn kl_grid(truth: &GridDensity, model: &GridDensity) -> Result<KlResult> {
    if truth.grid != model.grid {
        return Err(Error::Config("KL between densities on different grids".into()));
    }
    let g = truth.grid;
    let dy = g.dy();
    let cols: Vec<(f64, usize)> = (0..g.nx)
        .into_par_iter()
        .map(|j| {
            let (p, q) = (truth.column(j), model.column(j));
            let mut acc = 0.0;
            let mut bad = 0;
            for (&lp, &lq) in p.iter().zip(q) {
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                if lq == f64::NEG_INFINITY {
                    bad += 1;
                    continue;
                }
                acc += lp.exp() * dy * (lp - lq);
            }
            (acc, bad)
        })
        .collect();
    let offending_cells: usize = cols.iter().map(|c| c.1).sum();
    let value = if offending_cells > 0 { f64::INFINITY } else { cols.iter().map(|c| c.0).sum::<f64>() / g.nx as f64 };
    Ok(KlResult { value, offending_cells })
}

/// Outcome of a best-k-of-n protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    /// Mean of the `k` smallest values.
    pub best_k_mean: f64,
    pub k: usize,
    /// All values in run order; failed runs are `+∞`.
    pub values: Vec<f64>,
    pub failures: usize,
}

/// Mean of the `k` smallest finite values. Non-finite values count as
/// failures; fewer than `k` successes is a protocol error.
pub fn best_k_mean(values: &[f64], k: usize) -> Result<ProtocolSummary> {
    if k == 0 {
        return Err(Error::Config("best-k needs k ≥ 1".into()));
    }
    let values: Vec<f64> = values.iter().map(|v| if v.is_nan() { f64::INFINITY } else { *v }).collect();
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let failures = values.len() - finite.len();
    if finite.len() < k {
        return Err(Error::Protocol(format!(
            "{failures} of {} runs failed; need at least {k} finite values",
            values.len()
        )));
    }
    finite.sort_by(f64::total_cmp);
    let best_k_mean = finite[..k].iter().sum::<f64>() / k as f64;
    Ok(ProtocolSummary { best_k_mean, k, values, failures })
}

/// Seed of run `i` under `base_seed`.
pub fn run_seed(base_seed: u64, i: usize) -> u64 {
    derive(&[base_seed, i as u64])
}

/// Runs `runs` independent evaluations (in parallel) with seeds derived from
/// `base_seed`; errors from `run` count as failures only when numerical.
pub fn run_protocol<F>(runs: usize, k: usize, base_seed: u64, run: F) -> Result<ProtocolSummary>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let values: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|i| match run(run_seed(base_seed, i)) {
            Ok(v) => Ok(v),
            Err(e) if e.is_numerical() => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    best_k_mean(&values, k)
}

/// Best 5 of 20 runs.
pub fn protocol_best5of20<F>(base_seed: u64, run: F) -> Result<ProtocolSummary>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    run_protocol(20, 5, base_seed, run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    #[serde(rename = "T")]
    pub iterations: usize,
    pub lambda: f64,
    pub eta: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { iterations: 10, lambda: 0.1, eta: 0.5 }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("predictor needs T ≥ 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("predictor step length must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config("predictor decay must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictTrace {
    pub y: f64,
    /// `f` at the start and after every accepted step.
    pub accepted_values: Vec<f64>,
}

/// Gradient ascent on `f(x*, ·)` from `y_hat`: a step is kept only if it
/// increases `f`; otherwise the step length shrinks by `eta`.
pub fn predict_trace(energy: &dyn Energy, x: f64, y_hat: f64, cfg: &PredictorConfig) -> Result<PredictTrace> {
    cfg.validate()?;
    let mut y = y_hat;
    let mut lambda = cfg.lambda;
    let mut cur = energy.jet(x, y);
    let mut accepted_values = vec![cur.v];
    for iteration in 0..cfg.iterations {
        if !cur.v.is_finite() || !cur.d1.is_finite() {
            return Err(Error::PredictorDiverged { iteration });
        }
        let cand_y = y + lambda * cur.d1;
        let cand = energy.jet(x, cand_y);
        if cand.v > cur.v {
            y = cand_y;
            cur = cand;
            accepted_values.push(cur.v);
        } else {
            lambda *= cfg.eta;
        }
    }
    Ok(PredictTrace { y, accepted_values })
}

pub fn predict(energy: &dyn Energy, x: f64, y_hat: f64, cfg: &PredictorConfig) -> Result<f64> {
    predict_trace(energy, x, y_hat, cfg).map(|t| t.y)
}
