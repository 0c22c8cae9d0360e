//! Synthetic 1D regression datasets with exact ground-truth densities.

mod mixture;

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use mixture::{normal_cdf, normal_logpdf, GaussianMixture1D, LN_SQRT_2PI};

use crate::error::{Error, Result};
use crate::rng::{normal, stream, Rng};

pub const X_MIN: f64 = -3.0;
pub const X_MAX: f64 = 3.0;
pub const DEFAULT_N: usize = 2000;

/// Mixture of two Gaussians for `x < 0`, log-normal for `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset1Truth {
    pub neg_x_mixture: GaussianMixture1D,
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
}

impl Default for Dataset1Truth {
    fn default() -> Self {
        Dataset1Truth {
            neg_x_mixture: GaussianMixture1D::new(vec![0.2, 0.8], vec![-1.0, 1.0], vec![0.3, 0.3])
                .expect("default mixture is valid"),
            lognormal_mu: 0.0,
            lognormal_sigma: 0.25,
        }
    }
}

impl Dataset1Truth {
    /// Overrides the component means and stds; the weights stay (0.2, 0.8).
    pub fn with_components(means: [f64; 2], stds: [f64; 2]) -> Result<Self> {
        Ok(Dataset1Truth {
            neg_x_mixture: GaussianMixture1D::new(vec![0.2, 0.8], means.to_vec(), stds.to_vec())?,
            ..Default::default()
        })
    }
}

/// `y | x ~ N(sin x, σ(x)²)`, `σ(x) = 0.15 / (1 + e^{-x})`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset2Truth;

impl Dataset2Truth {
    pub fn mean(x: f64) -> f64 {
        x.sin()
    }

    pub fn std(x: f64) -> f64 {
        0.15 / (1.0 + (-x).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Dataset {
    Ds1(Dataset1Truth),
    Ds2(Dataset2Truth),
}

impl Dataset {
    pub fn ds1() -> Self {
        Dataset::Ds1(Dataset1Truth::default())
    }

    pub fn ds2() -> Self {
        Dataset::Ds2(Dataset2Truth)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Ds1(_) => "ds1",
            Dataset::Ds2(_) => "ds2",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ds1" => Ok(Self::ds1()),
            "ds2" => Ok(Self::ds2()),
            other => Err(Error::Config(format!("unknown dataset `{other}` (expected ds1 or ds2)"))),
        }
    }

    /// Exact `log p(y | x)`; `-inf` outside the support.
    pub fn true_logpdf(&self, x: f64, y: f64) -> f64 {
        match self {
            Dataset::Ds1(d) => {
                if x < 0.0 {
                    d.neg_x_mixture.logpdf(y, 0.0)
                } else if y <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let ly = y.ln();
                    normal_logpdf(ly, d.lognormal_mu, d.lognormal_sigma) - ly
                }
            }
            Dataset::Ds2(_) => normal_logpdf(y, Dataset2Truth::mean(x), Dataset2Truth::std(x)),
        }
    }

    pub fn sample_y(&self, x: f64, rng: &mut Rng) -> f64 {
        match self {
            Dataset::Ds1(d) => {
                if x < 0.0 {
                    d.neg_x_mixture.sample_one(0.0, rng)
                } else {
                    (d.lognormal_mu + d.lognormal_sigma * normal(rng)).exp()
                }
            }
            Dataset::Ds2(_) => Dataset2Truth::mean(x) + Dataset2Truth::std(x) * normal(rng),
        }
    }

    /// `n` pairs with `x ~ U[-3, 3)` and `y ~ p(y | x)`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<RegressionSet> {
        if n == 0 {
            return Err(Error::Config("dataset size must be at least 1".into()));
        }
        let mut rng = stream(&[seed, 0xda7a]);
        let pairs = (0..n)
            .map(|_| {
                let x = rng.random_range(X_MIN..X_MAX);
                let y = self.sample_y(x, &mut rng);
                (x, y)
            })
            .collect();
        Ok(RegressionSet { pairs, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSet {
    pub pairs: Vec<(f64, f64)>,
    pub seed: u64,
}

impl RegressionSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `x,y` header, one pair per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * self.pairs.len() + 4);
        s.push_str("x,y\n");
        for (x, y) in &self.pairs {
            let _ = writeln!(s, "{x:.16e},{y:.16e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,y") => {}
            other => return Err(Error::Parse(format!("expected header `x,y`, found {other:?}"))),
        }
        let mut pairs = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) =
                line.split_once(',').ok_or_else(|| Error::Parse(format!("line {}: expected two columns", i + 2)))?;
            let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)));
            pairs.push((num(a)?, num(b)?));
        }
        if pairs.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        Ok(RegressionSet { pairs, seed: 0 })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
