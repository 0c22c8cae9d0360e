use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::GaussianMixture1D;
use crate::error::{Error, Result};

pub const DEFAULT_M: usize = 1024;

fn default_m() -> usize {
    DEFAULT_M
}

fn ml_is_proposal() -> GaussianMixture1D {
    GaussianMixture1D::centered(&[0.2, 1.6]).expect("valid")
}

fn nce_noise() -> GaussianMixture1D {
    GaussianMixture1D::centered(&[0.1, 0.8]).expect("valid")
}

fn default_sigma_t() -> f64 {
    0.025
}

fn default_alpha() -> f64 {
    0.05
}

fn default_steps() -> usize {
    16
}

fn default_dsm_sigma() -> f64 {
    0.2
}

fn default_beta() -> f64 {
    0.025
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlIsConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "ml_is_proposal")]
    pub proposal: GaussianMixture1D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KldIsConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "ml_is_proposal")]
    pub proposal: GaussianMixture1D,
    /// Std of the assumed label-noise density `N(y; y_i, σ_t²)`.
    #[serde(default = "default_sigma_t")]
    pub sigma_t: f64,
    /// Divide the importance weights by their sum instead of by `M`.
    #[serde(default)]
    pub self_normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlMcmcConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(rename = "L", default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NceConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "nce_noise")]
    pub noise: GaussianMixture1D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "default_dsm_sigma")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcePlusConfig {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "nce_noise")]
    pub noise: GaussianMixture1D,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum MethodConfig {
    #[serde(rename = "ml-is")]
    MlIs(MlIsConfig),
    #[serde(rename = "kld-is")]
    KldIs(KldIsConfig),
    #[serde(rename = "ml-mcmc")]
    MlMcmc(MlMcmcConfig),
    #[serde(rename = "nce")]
    Nce(NceConfig),
    #[serde(rename = "sm")]
    Sm,
    #[serde(rename = "dsm")]
    Dsm(DsmConfig),
    #[serde(rename = "nce+")]
    NcePlus(NcePlusConfig),
}

impl MethodConfig {
    pub const NAMES: [&'static str; 7] = ["ml-is", "kld-is", "ml-mcmc", "nce", "sm", "dsm", "nce+"];

    /// Default hyperparameters for a method name.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "ml-is" => MethodConfig::MlIs(MlIsConfig { m: DEFAULT_M, proposal: ml_is_proposal() }),
            "kld-is" => MethodConfig::KldIs(KldIsConfig {
                m: DEFAULT_M,
                proposal: ml_is_proposal(),
                sigma_t: default_sigma_t(),
                self_normalize: false,
            }),
            "ml-mcmc" => {
                MethodConfig::MlMcmc(MlMcmcConfig { m: DEFAULT_M, steps: default_steps(), alpha: default_alpha() })
            }
            "nce" => MethodConfig::Nce(NceConfig { m: DEFAULT_M, noise: nce_noise() }),
            "sm" => MethodConfig::Sm,
            "dsm" => MethodConfig::Dsm(DsmConfig { m: DEFAULT_M, sigma: default_dsm_sigma() }),
            "nce+" => MethodConfig::NcePlus(NcePlusConfig { m: DEFAULT_M, noise: nce_noise(), beta: default_beta() }),
            other => {
                return Err(Error::Config(format!(
                    "unknown method `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::MlIs(_) => "ml-is",
            MethodConfig::KldIs(_) => "kld-is",
            MethodConfig::MlMcmc(_) => "ml-mcmc",
            MethodConfig::Nce(_) => "nce",
            MethodConfig::Sm => "sm",
            MethodConfig::Dsm(_) => "dsm",
            MethodConfig::NcePlus(_) => "nce+",
        }
    }

    /// Display label, e.g. `ML-MCMC-16`.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::MlIs(_) => "ML-IS".into(),
            MethodConfig::KldIs(_) => "KLD-IS".into(),
            MethodConfig::MlMcmc(c) => format!("ML-MCMC-{}", c.steps),
            MethodConfig::Nce(_) => "NCE".into(),
            MethodConfig::Sm => "SM".into(),
            MethodConfig::Dsm(_) => "DSM".into(),
            MethodConfig::NcePlus(_) => "NCE+".into(),
        }
    }

    pub fn num_samples(&self) -> Option<usize> {
        match self {
            MethodConfig::MlIs(c) => Some(c.m),
            MethodConfig::KldIs(c) => Some(c.m),
            MethodConfig::MlMcmc(c) => Some(c.m),
            MethodConfig::Nce(c) => Some(c.m),
            MethodConfig::Sm => None,
            MethodConfig::Dsm(c) => Some(c.m),
            MethodConfig::NcePlus(c) => Some(c.m),
        }
    }

    pub fn with_num_samples(mut self, m: usize) -> Self {
        match &mut self {
            MethodConfig::MlIs(c) => c.m = m,
            MethodConfig::KldIs(c) => c.m = m,
            MethodConfig::MlMcmc(c) => c.m = m,
            MethodConfig::Nce(c) => c.m = m,
            MethodConfig::Sm => {}
            MethodConfig::Dsm(c) => c.m = m,
            MethodConfig::NcePlus(c) => c.m = m,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let need_m = |m: usize| {
            if m == 0 {
                Err(Error::Config(format!("{}: M must be at least 1", self.name())))
            } else {
                Ok(())
            }
        };
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{}: {what} must be positive, got {v}", self.name())))
            }
        };
        match self {
            MethodConfig::MlIs(c) => {
                need_m(c.m)?;
                c.proposal.validate()
            }
            MethodConfig::KldIs(c) => {
                need_m(c.m)?;
                positive("sigma_t", c.sigma_t)?;
                c.proposal.validate()
            }
            MethodConfig::MlMcmc(c) => {
                need_m(c.m)?;
                positive("alpha", c.alpha)?;
                if c.steps == 0 {
                    return Err(Error::Config("ml-mcmc: L must be at least 1".into()));
                }
                Ok(())
            }
            MethodConfig::Nce(c) => {
                need_m(c.m)?;
                c.noise.validate()
            }
            MethodConfig::Sm => Ok(()),
            MethodConfig::Dsm(c) => {
                need_m(c.m)?;
                positive("sigma", c.sigma)
            }
            MethodConfig::NcePlus(c) => {
                need_m(c.m)?;
                positive("beta", c.beta)?;
                c.noise.validate()
            }
        }
    }

    /// Flat numeric hyperparameters, as stored in checkpoints.
    pub fn hyperparameters(&self) -> BTreeMap<String, f64> {
        let mut h = BTreeMap::new();
        let stds = |h: &mut BTreeMap<String, f64>, m: &GaussianMixture1D| {
            for (k, s) in m.stds().iter().enumerate() {
                h.insert(format!("sigma{}", k + 1), *s);
            }
        };
        if let Some(m) = self.num_samples() {
            h.insert("M".into(), m as f64);
        }
        match self {
            MethodConfig::MlIs(c) => stds(&mut h, &c.proposal),
            MethodConfig::KldIs(c) => {
                stds(&mut h, &c.proposal);
                h.insert("sigma_t".into(), c.sigma_t);
                h.insert("self_normalize".into(), if c.self_normalize { 1.0 } else { 0.0 });
            }
            MethodConfig::MlMcmc(c) => {
                h.insert("L".into(), c.steps as f64);
                h.insert("alpha".into(), c.alpha);
            }
            MethodConfig::Nce(c) => stds(&mut h, &c.noise),
            MethodConfig::Sm => {}
            MethodConfig::Dsm(c) => {
                h.insert("sigma".into(), c.sigma);
            }
            MethodConfig::NcePlus(c) => {
                stds(&mut h, &c.noise);
                h.insert("beta".into(), c.beta);
            }
        }
        h
    }
}
