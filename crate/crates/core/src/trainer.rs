//! Mini-batch training with Adam.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::RegressionSet;
use crate::error::{Error, Result};
use crate::methods::{loss_and_grad, MethodConfig};
use crate::model::{EbmModel, TrainingMeta};
use crate::rng::stream;

const SHUFFLE_TAG: u64 = 0x5_4f1e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 75,
            batch_size: 32,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any state.
pub fn adam_step(theta: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    assert_eq!(theta.len(), grad.len());
    assert_eq!(state.m.len(), grad.len());
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    for p in 0..theta.len() {
        let g = grad[p];
        state.m[p] = b1 * state.m[p] + (1.0 - b1) * g;
        state.v[p] = b2 * state.v[p] + (1.0 - b2) * g * g;
        let mh = state.m[p] / c1;
        let vh = state.v[p] / c2;
        theta[p] -= cfg.lr * mh / (vh.sqrt() + cfg.adam_eps);
    }
    if let Some(index) = theta.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFiniteParam { index });
    }
    Ok(())
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainFailure {
    pub epoch: usize,
    pub batch: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: MethodConfig,
    pub train: TrainConfig,
    pub init_seed: u64,
    /// Mean batch loss of every completed epoch.
    pub loss_curve: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// Median of `epoch_seconds`.
    pub wall_seconds_per_epoch: f64,
    pub failure: Option<TrainFailure>,
    /// Path of the saved checkpoint, when one was written.
    pub checkpoint: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

pub struct TrainOutcome {
    pub model: EbmModel,
    pub record: RunRecord,
}

/// Per-epoch progress: `(epoch, mean loss, seconds)`.
pub type EpochHook<'a> = &'a mut dyn FnMut(usize, f64, f64);

pub fn train(model: EbmModel, data: &RegressionSet, method: &MethodConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(model, data, method, cfg, &mut |_, _, _| {})
}

/// Trains `model` in place. Numerical breakdown ends the run early and is
/// reported in [`RunRecord::failure`]; only invalid inputs return `Err`.
pub fn train_observed(
    mut model: EbmModel,
    data: &RegressionSet,
    method: &MethodConfig,
    cfg: &TrainConfig,
    hook: EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    method.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = AdamState::new(model.theta().len());
    let mut record = RunRecord {
        method: method.clone(),
        train: cfg.clone(),
        init_seed: model.seed(),
        loss_curve: Vec::with_capacity(cfg.epochs),
        epoch_seconds: Vec::with_capacity(cfg.epochs),
        wall_seconds_per_epoch: 0.0,
        failure: None,
        checkpoint: None,
    };
    let mut batch = Vec::with_capacity(cfg.batch_size);
    'epochs: for epoch in 0..cfg.epochs {
        let start = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut stream(&[cfg.seed, epoch as u64, SHUFFLE_TAG]));
        }
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(idx.iter().map(|&i| data.pairs[i]));
            let mut rng = stream(&[cfg.seed, epoch as u64, b as u64]);
            let step = loss_and_grad(&model, &batch, method, &mut rng).and_then(|(loss, grad)| {
                adam_step(model.theta_mut(), &grad, &mut adam, cfg)?;
                Ok(loss.total)
            });
            match step {
                Ok(loss) => {
                    total += loss;
                    batches += 1;
                }
                Err(e) if e.is_numerical() => {
                    record.failure = Some(TrainFailure { epoch, batch: b, message: e.to_string() });
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let mean = total / batches as f64;
        record.loss_curve.push(mean);
        record.epoch_seconds.push(secs);
        hook(epoch, mean, secs);
    }
    record.wall_seconds_per_epoch = median(&record.epoch_seconds);
    model.meta = Some(TrainingMeta {
        method: method.name().to_string(),
        hyperparameters: method.hyperparameters(),
        epochs: record.loss_curve.len(),
    });
    Ok(TrainOutcome { model, record })
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::model::MlpSpec;

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = TrainConfig::default();
        let mut theta = vec![1.0, -2.0, 0.5];
        let mut st = AdamState::new(3);
        adam_step(&mut theta, &[3.0, -0.01, 0.0], &mut st, &cfg).unwrap();
        assert!((theta[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((theta[1] - (-2.0 + 1e-3)).abs() < 1e-8);
        assert_eq!(theta[2], 0.5);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_keeps_theta_and_decays_moments() {
        let cfg = TrainConfig::default();
        let mut theta = vec![1.0];
        let mut st = AdamState { m: vec![0.5], v: vec![0.25], t: 3 };
        adam_step(&mut theta, &[0.0], &mut st, &cfg).unwrap();
        assert!((st.m[0] - 0.45).abs() < 1e-15);
        assert!((st.v[0] - 0.24975).abs() < 1e-15);
        assert!(theta[0] < 1.0);
        let mut zero = AdamState::new(1);
        let mut t2 = vec![1.0];
        adam_step(&mut t2, &[0.0], &mut zero, &cfg).unwrap();
        assert_eq!(t2[0], 1.0);
    }

    #[test]
    fn quadratic_converges() {
        let cfg = TrainConfig { lr: 0.1, ..Default::default() };
        let mut theta = vec![1.0];
        let mut st = AdamState::new(1);
        for _ in 0..500 {
            let g = [theta[0]];
            adam_step(&mut theta, &g, &mut st, &cfg).unwrap();
        }
        assert!(theta[0].abs() < 1e-3, "{}", theta[0]);
    }

    #[test]
    fn non_finite_gradient_names_index() {
        let mut st = AdamState::new(3);
        let mut theta = vec![0.0; 3];
        match adam_step(&mut theta, &[0.0, 1.0, f64::NAN], &mut st, &TrainConfig::default()) {
            Err(Error::NonFiniteGradient { index: 2 }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(st.t, 0);
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let data = Dataset::ds2().generate(10, 0).unwrap();
        let model = EbmModel::init(MlpSpec::default(), 0).unwrap();
        let m = MethodConfig::default_for("nce").unwrap();
        assert!(train(model, &data, &m, &cfg).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = Dataset::ds2().generate(80, 1).unwrap();
        let cfg = TrainConfig { epochs: 2, seed: 5, ..Default::default() };
        let m = MethodConfig::default_for("ml-mcmc").unwrap().with_num_samples(4);
        let run = || {
            let model = EbmModel::init(MlpSpec::default(), 3).unwrap();
            train(model, &data, &m, &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.model.theta(), b.model.theta());
        assert_eq!(a.record.loss_curve, b.record.loss_curve);
        assert_eq!(a.record.loss_curve.len(), 2);
        assert_eq!(a.model.meta.as_ref().unwrap().method, "ml-mcmc");
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
