use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::autodiff::logsumexp;
use crate::error::{Error, Result};
use crate::rng::{normal, Rng};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `N(mean, std²)` at `y`.
#[inline]
pub fn normal_logpdf(y: f64, mean: f64, std: f64) -> f64 {
    let z = (y - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// A 1D Gaussian mixture whose component means are offsets from a center
/// supplied at evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture1D {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl GaussianMixture1D {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        let m = GaussianMixture1D { weights, means, stds };
        m.validate()?;
        Ok(m)
    }

    /// Equal weights, zero offsets.
    pub fn centered(stds: &[f64]) -> Result<Self> {
        let k = stds.len();
        Self::new(vec![1.0 / k as f64; k], vec![0.0; k], stds.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.stds.len() != k {
            return Err(Error::Config("mixture needs equal, nonzero numbers of weights, means and stds".into()));
        }
        if self.weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::Config("mixture weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        if self.stds.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Config("mixture stds must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    /// Same weights and means with every variance multiplied by `factor`.
    pub fn scale_variance(&self, factor: f64) -> Result<Self> {
        let s = factor.sqrt();
        Self::new(self.weights.clone(), self.means.clone(), self.stds.iter().map(|v| v * s).collect())
    }

    pub fn logpdf(&self, y: f64, center: f64) -> f64 {
        let term = |k: usize| self.weights[k].ln() + normal_logpdf(y, center + self.means[k], self.stds[k]);
        match self.weights.len() {
            1 => term(0),
            2 => {
                let (a, b) = (term(0), term(1));
                let m = a.max(b);
                if !m.is_finite() {
                    m
                } else {
                    m + ((a - m).exp() + (b - m).exp()).ln()
                }
            }
            k => logsumexp(&(0..k).map(term).collect::<Vec<_>>()),
        }
    }

    pub fn cdf(&self, y: f64, center: f64) -> f64 {
        (0..self.weights.len()).map(|k| self.weights[k] * normal_cdf((y - center - self.means[k]) / self.stds[k])).sum()
    }

    /// Picks a component by weight, then draws from it.
    pub fn sample_one(&self, center: f64, rng: &mut Rng) -> f64 {
        let k = self.pick(rng);
        center + self.means[k] + self.stds[k] * normal(rng)
    }

    pub fn sample(&self, center: f64, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(center, rng)).collect()
    }

    fn pick(&self, rng: &mut Rng) -> usize {
        if self.weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }
}
