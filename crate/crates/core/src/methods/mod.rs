//! Training objectives. Each method maps a mini-batch to a scalar loss on a
//! [`Tape`], drawing whatever Monte Carlo samples it needs first.
//!
//! Sampling and loss construction are split: [`draw_samples`] fixes every
//! random quantity, and [`build_loss`] is then a deterministic function of
//! the parameters. Samples are treated as constants, so no gradient flows
//! through proposal draws or Langevin chains.

mod config;
mod langevin;

pub use config::{DsmConfig, KldIsConfig, MethodConfig, MlIsConfig, MlMcmcConfig, NceConfig, NcePlusConfig, DEFAULT_M};
pub use langevin::{langevin_chain, langevin_chains, langevin_trajectory};

use crate::autodiff::{GradVector, Gradients, Jet2, NodeId, Tape};
use crate::data::{normal_logpdf, GaussianMixture1D};
use crate::error::{Error, Result};
use crate::model::{Energy, Order};
use crate::rng::{normal, Rng};

/// One `(x_i, y_i)` pair per entry.
pub type Batch<'a> = &'a [(f64, f64)];

/// Random draws for one example.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExampleDraw {
    /// Proposal, noise, Langevin or perturbed targets (`M` entries).
    pub ys: Vec<f64>,
    /// NCE+ label perturbation `ν_i`; zero for other methods.
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub examples: Vec<ExampleDraw>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_example: Vec<f64>,
    pub samples: Option<Samples>,
}

/// Loss nodes on a tape.
#[derive(Debug, Clone)]
pub struct LossNodes {
    pub total: NodeId,
    pub per_example: Vec<NodeId>,
}

struct Group {
    x: f64,
    ys: Vec<f64>,
    order: Order,
    first_slot: usize,
}

/// Puts grouped energy evaluations on a tape as external nodes and routes
/// their adjoints back through [`Energy::backprop_group`].
#[derive(Default)]
pub struct Recorder {
    groups: Vec<Group>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn eval(
        &mut self,
        energy: &dyn Energy,
        tape: &mut Tape<'_>,
        x: f64,
        ys: Vec<f64>,
        order: Order,
    ) -> Vec<NodeId> {
        let mut out = vec![Jet2::ZERO; ys.len()];
        energy.eval_group(x, &ys, order, &mut out);
        let mut first_slot = usize::MAX;
        let nodes = out
            .iter()
            .map(|&v| {
                let (id, slot) = tape.external(v);
                first_slot = first_slot.min(slot);
                id
            })
            .collect();
        self.groups.push(Group { x, ys, order, first_slot });
        nodes
    }

    /// Parameter gradient: tape-level parameter adjoints plus the
    /// contribution of every recorded group.
    pub fn param_grad(&self, energy: &dyn Energy, grads: &Gradients) -> GradVector {
        let mut g = grads.params.clone();
        if g.len() < energy.num_params() {
            g = GradVector::zeros(energy.num_params());
        }
        for grp in &self.groups {
            let adj = &grads.externs[grp.first_slot..grp.first_slot + grp.ys.len()];
            if adj.iter().all(|a| *a == Jet2::ZERO) {
                continue;
            }
            energy.backprop_group(grp.x, &grp.ys, grp.order, adj, &mut g);
        }
        g
    }
}

/// Draws every random quantity the method needs for `batch`.
///
/// ML-MCMC runs its Langevin chains under the current `energy`.
pub fn draw_samples(energy: &dyn Energy, batch: Batch<'_>, cfg: &MethodConfig, rng: &mut Rng) -> Result<Samples> {
    cfg.validate()?;
    let mixture_draws = |mix: &GaussianMixture1D, m: usize, rng: &mut Rng| -> Vec<ExampleDraw> {
        batch.iter().map(|&(_, yi)| ExampleDraw { ys: mix.sample(yi, m, rng), nu: 0.0 }).collect()
    };
    let examples = match cfg {
        MethodConfig::MlIs(c) => mixture_draws(&c.proposal, c.m, rng),
        MethodConfig::KldIs(c) => mixture_draws(&c.proposal, c.m, rng),
        MethodConfig::Nce(c) => mixture_draws(&c.noise, c.m, rng),
        MethodConfig::NcePlus(c) => {
            // noise first, in the same order as plain NCE, then perturbations
            let mut ex = mixture_draws(&c.noise, c.m, rng);
            let perturb = c.noise.scale_variance(c.beta)?;
            for e in &mut ex {
                e.nu = perturb.sample_one(0.0, rng);
            }
            ex
        }
        MethodConfig::MlMcmc(c) => batch
            .iter()
            .map(|&(xi, yi)| {
                let mut ys = vec![yi; c.m];
                langevin_chains(energy, xi, &mut ys, c.steps, c.alpha, rng)?;
                Ok(ExampleDraw { ys, nu: 0.0 })
            })
            .collect::<Result<Vec<_>>>()?,
        MethodConfig::Sm => vec![ExampleDraw::default(); batch.len()],
        MethodConfig::Dsm(c) => batch
            .iter()
            .map(|&(_, yi)| ExampleDraw { ys: (0..c.m).map(|_| yi + c.sigma * normal(rng)).collect(), nu: 0.0 })
            .collect(),
    };
    Ok(Samples { examples })
}

/// Builds the loss for `batch` on `tape` from previously drawn samples.
pub fn build_loss(
    energy: &dyn Energy,
    batch: Batch<'_>,
    cfg: &MethodConfig,
    samples: &Samples,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
) -> Result<LossNodes> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if samples.examples.len() != batch.len() {
        return Err(Error::Config("samples do not match the batch".into()));
    }
    let mut per = Vec::with_capacity(batch.len());
    for (&(xi, yi), draw) in batch.iter().zip(&samples.examples) {
        let node = match cfg {
            MethodConfig::MlIs(c) => ml_is_term(energy, tape, rec, xi, yi, draw, &c.proposal)?,
            MethodConfig::KldIs(c) => kld_is_term(energy, tape, rec, xi, yi, draw, c)?,
            MethodConfig::MlMcmc(_) => ml_mcmc_term(energy, tape, rec, xi, yi, draw),
            MethodConfig::Nce(c) => nce_term(energy, tape, rec, xi, yi, draw, &c.noise)?,
            MethodConfig::NcePlus(c) => nce_term(energy, tape, rec, xi, yi, draw, &c.noise)?,
            MethodConfig::Sm => sm_term(energy, tape, rec, xi, yi),
            MethodConfig::Dsm(c) => dsm_term(energy, tape, rec, xi, yi, draw, c.sigma),
        };
        per.push(node);
    }
    let total = tape.mean(&per);
    Ok(LossNodes { total, per_example: per })
}

/// `log (1/M) Σ_m exp(f(x, y_m) − log q(y_m | y_i))` given `log_q[m] = log q(y_m | y_i)`.
fn log_is_estimate(tape: &mut Tape<'_>, fs: &[NodeId], log_q: &[f64]) -> Result<NodeId> {
    let terms: Vec<NodeId> = fs.iter().zip(log_q).map(|(&f, &lq)| tape.shift(f, -lq)).collect();
    let lse = tape.logsumexp(&terms)?;
    Ok(tape.shift(lse, -(log_q.len() as f64).ln()))
}

fn proposal_logpdfs(proposal: &GaussianMixture1D, ys: &[f64], yi: f64) -> Vec<f64> {
    ys.iter().map(|&y| proposal.logpdf(y, yi)).collect()
}

fn ml_is_term(
    energy: &dyn Energy,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
    xi: f64,
    yi: f64,
    draw: &ExampleDraw,
    proposal: &GaussianMixture1D,
) -> Result<NodeId> {
    let mut ys = Vec::with_capacity(draw.ys.len() + 1);
    ys.push(yi);
    ys.extend_from_slice(&draw.ys);
    let fs = rec.eval(energy, tape, xi, ys, Order::Value);
    let est = log_is_estimate(tape, &fs[1..], &proposal_logpdfs(proposal, &draw.ys, yi))?;
    Ok(tape.sub(est, fs[0]))
}

fn kld_is_term(
    energy: &dyn Energy,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
    xi: f64,
    yi: f64,
    draw: &ExampleDraw,
    cfg: &KldIsConfig,
) -> Result<NodeId> {
    let fs = rec.eval(energy, tape, xi, draw.ys.clone(), Order::Value);
    let log_q = proposal_logpdfs(&cfg.proposal, &draw.ys, yi);
    let est = log_is_estimate(tape, &fs, &log_q)?;
    let ratios: Vec<f64> =
        draw.ys.iter().zip(&log_q).map(|(&y, &lq)| (normal_logpdf(y, yi, cfg.sigma_t) - lq).exp()).collect();
    let norm = if cfg.self_normalize { ratios.iter().sum::<f64>() } else { ratios.len() as f64 };
    let weighted: Vec<NodeId> = fs.iter().zip(&ratios).map(|(&f, &r)| tape.scale(f, r / norm)).collect();
    let expect = tape.sum(&weighted);
    Ok(tape.sub(est, expect))
}

fn ml_mcmc_term(
    energy: &dyn Energy,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
    xi: f64,
    yi: f64,
    draw: &ExampleDraw,
) -> NodeId {
    let mut ys = Vec::with_capacity(draw.ys.len() + 1);
    ys.push(yi);
    ys.extend_from_slice(&draw.ys);
    let fs = rec.eval(energy, tape, xi, ys, Order::Value);
    let model_mean = tape.mean(&fs[1..]);
    tape.sub(model_mean, fs[0])
}

/// Ranking NCE with `y^(0) = y_i + ν_i` (ν = 0 for plain NCE).
fn nce_term(
    energy: &dyn Energy,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
    xi: f64,
    yi: f64,
    draw: &ExampleDraw,
    noise: &GaussianMixture1D,
) -> Result<NodeId> {
    let mut ys = Vec::with_capacity(draw.ys.len() + 1);
    ys.push(yi + draw.nu);
    ys.extend_from_slice(&draw.ys);
    let logn: Vec<f64> = ys.iter().map(|&y| noise.logpdf(y, yi)).collect();
    let fs = rec.eval(energy, tape, xi, ys, Order::Value);
    let logits: Vec<NodeId> = fs.iter().zip(&logn).map(|(&f, &l)| tape.shift(f, -l)).collect();
    let lse = tape.logsumexp(&logits)?;
    Ok(tape.sub(lse, logits[0]))
}

fn sm_term(energy: &dyn Energy, tape: &mut Tape<'_>, rec: &mut Recorder, xi: f64, yi: f64) -> NodeId {
    let f = rec.eval(energy, tape, xi, vec![yi], Order::Second)[0];
    let curv = tape.d2(f);
    let score = tape.d1(f);
    let sq = tape.square(score);
    let half = tape.scale(sq, 0.5);
    tape.add(curv, half)
}

fn dsm_term(
    energy: &dyn Energy,
    tape: &mut Tape<'_>,
    rec: &mut Recorder,
    xi: f64,
    yi: f64,
    draw: &ExampleDraw,
    sigma: f64,
) -> NodeId {
    let fs = rec.eval(energy, tape, xi, draw.ys.clone(), Order::First);
    let inv_var = 1.0 / (sigma * sigma);
    let terms: Vec<NodeId> = fs
        .iter()
        .zip(&draw.ys)
        .map(|(&f, &y)| {
            let score = tape.d1(f);
            let resid = tape.shift(score, (y - yi) * inv_var);
            tape.square(resid)
        })
        .collect();
    tape.mean(&terms)
}

/// Loss value and parameter gradient for fixed samples.
pub fn loss_and_grad_with(
    energy: &dyn Energy,
    batch: Batch<'_>,
    cfg: &MethodConfig,
    samples: &Samples,
) -> Result<(LossBreakdown, GradVector)> {
    let theta = energy.params();
    let mut tape = Tape::new(theta);
    let mut rec = Recorder::new();
    let nodes = build_loss(energy, batch, cfg, samples, &mut tape, &mut rec)?;
    let breakdown = breakdown(&tape, &nodes);
    let grads = tape.backward(nodes.total)?;
    let g = rec.param_grad(energy, &grads);
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok((breakdown, g))
}

/// Loss value only, for fixed samples.
pub fn loss_value_with(
    energy: &dyn Energy,
    batch: Batch<'_>,
    cfg: &MethodConfig,
    samples: &Samples,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new(energy.params());
    let mut rec = Recorder::new();
    let nodes = build_loss(energy, batch, cfg, samples, &mut tape, &mut rec)?;
    Ok(breakdown(&tape, &nodes))
}

fn breakdown(tape: &Tape<'_>, nodes: &LossNodes) -> LossBreakdown {
    LossBreakdown {
        total: tape.value(nodes.total).v,
        per_example: nodes.per_example.iter().map(|&n| tape.value(n).v).collect(),
        samples: None,
    }
}

/// Draws samples, then evaluates loss and gradient.
pub fn loss_and_grad(
    energy: &dyn Energy,
    batch: Batch<'_>,
    cfg: &MethodConfig,
    rng: &mut Rng,
) -> Result<(LossBreakdown, GradVector)> {
    let samples = draw_samples(energy, batch, cfg, rng)?;
    loss_and_grad_with(energy, batch, cfg, &samples)
}

macro_rules! method_entry {
    ($(#[$doc:meta])* $name:ident, $variant:ident, $cfg:ty) => {
        $(#[$doc])*
        pub fn $name(
            energy: &dyn Energy,
            batch: Batch<'_>,
            cfg: &$cfg,
            rng: &mut Rng,
        ) -> Result<(LossBreakdown, GradVector)> {
            loss_and_grad(energy, batch, &MethodConfig::$variant(cfg.clone()), rng)
        }
    };
}

method_entry!(
    /// Maximum likelihood with an importance-sampled partition function.
    loss_ml_is, MlIs, MlIsConfig
);
method_entry!(
    /// KL divergence to a Gaussian label-noise density, importance sampled.
    loss_kld_is, KldIs, KldIsConfig
);
method_entry!(
    /// Maximum likelihood with Langevin samples started at the label.
    loss_ml_mcmc, MlMcmc, MlMcmcConfig
);
method_entry!(
    /// Ranking noise contrastive estimation.
    loss_nce, Nce, NceConfig
);
method_entry!(
    /// Denoising score matching with Gaussian corruption.
    loss_dsm, Dsm, DsmConfig
);
method_entry!(
    /// Ranking NCE whose true slot is perturbed by `ν ~ p_β`.
    loss_nce_plus, NcePlus, NcePlusConfig
);

/// Score matching with the exact second derivative.
pub fn loss_sm(energy: &dyn Energy, batch: Batch<'_>) -> Result<(LossBreakdown, GradVector)> {
    loss_and_grad_with(
        energy,
        batch,
        &MethodConfig::Sm,
        &Samples { examples: vec![ExampleDraw::default(); batch.len()] },
    )
}
