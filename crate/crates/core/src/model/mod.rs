//! The network `f_θ(x, y)`, interpreted as a negative energy.

mod checkpoint;
mod kernel;
mod spec;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use kernel::Order;
pub use spec::{LayerDims, LayerSlot, MlpSpec};

use crate::autodiff::{Jet2, NodeId, Tape};
use crate::error::{Error, Result};
use kernel::Layout;

/// Anything that can play the role of `f(x, y)` inside a loss.
///
/// Evaluation is grouped: all targets in one call share the same `x`.
pub trait Energy: Sync {
    fn num_params(&self) -> usize;

    fn params(&self) -> &[f64];

    /// Writes `f(x, ys[s])` with `order` y-derivatives into `out[s]`;
    /// derivative slots beyond `order` are zero.
    fn eval_group(&self, x: f64, ys: &[f64], order: Order, out: &mut [Jet2]);

    /// Adds `Σ_s adj[s] · ∂f(x, ys[s])/∂θ` to `grad`.
    fn backprop_group(&self, x: f64, ys: &[f64], order: Order, adj: &[Jet2], grad: &mut [f64]);

    fn value(&self, x: f64, y: f64) -> f64 {
        let mut out = [Jet2::ZERO];
        self.eval_group(x, &[y], Order::Value, &mut out);
        out[0].v
    }

    /// `(f, ∂f/∂y, ∂²f/∂y²)` at `(x, y)`.
    fn jet(&self, x: f64, y: f64) -> Jet2 {
        let mut out = [Jet2::ZERO];
        self.eval_group(x, &[y], Order::Second, &mut out);
        out[0]
    }
}

/// Provenance stored alongside trained parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub method: String,
    pub hyperparameters: BTreeMap<String, f64>,
    pub epochs: usize,
}

pub struct EbmModel {
    spec: MlpSpec,
    theta: Vec<f64>,
    seed: u64,
    pub meta: Option<TrainingMeta>,
    layout: Layout,
}

impl Clone for EbmModel {
    fn clone(&self) -> Self {
        let mut m = EbmModel::with_theta(self.spec.clone(), self.theta.clone(), self.seed)
            .expect("cloned model has a validated spec");
        m.meta = self.meta.clone();
        m
    }
}

impl std::fmt::Debug for EbmModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EbmModel")
            .field("spec", &self.spec)
            .field("params", &self.theta.len())
            .field("seed", &self.seed)
            .field("meta", &self.meta)
            .finish()
    }
}

impl EbmModel {
    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; spec.num_params()];
        let (x, y, j) = spec.slots();
        for slot in x.iter().chain(&y).chain(&j) {
            let bound = 1.0 / (slot.inp as f64).sqrt();
            for w in &mut theta[slot.w..slot.b] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Self::with_theta(spec, theta, seed)
    }

    pub fn with_theta(spec: MlpSpec, theta: Vec<f64>, seed: u64) -> Result<Self> {
        spec.validate()?;
        if theta.len() != spec.num_params() {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, spec needs {}",
                theta.len(),
                spec.num_params()
            )));
        }
        let (x, y, joint) = spec.slots();
        let layout = Layout { x, y, joint, act: spec.activation };
        Ok(EbmModel { spec, theta, seed, meta: None, layout })
    }

    pub fn zeroed(spec: MlpSpec) -> Result<Self> {
        let n = spec.num_params();
        Self::with_theta(spec, vec![0.0; n], 0)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }

    fn check_finite(&self) -> Result<()> {
        match self.theta.iter().position(|t| !t.is_finite()) {
            Some(index) => Err(Error::NonFiniteParam { index }),
            None => Ok(()),
        }
    }

    pub fn forward(&self, x: f64, y: f64) -> Result<f64> {
        self.check_finite()?;
        Ok(self.value(x, y))
    }

    /// `(f, ∂f/∂y, ∂²f/∂y²)` at `(x, y.v)`; `y` must be a seed
    /// (`d1 = 1`, `d2 = 0`).
    pub fn forward_jet(&self, x: f64, y: Jet2) -> Result<Jet2> {
        self.check_finite()?;
        if y.d1 != 1.0 || y.d2 != 0.0 {
            return Err(Error::Config("forward_jet expects a seeded y (d1 = 1, d2 = 0)".into()));
        }
        Ok(self.jet(x, y.v))
    }

    /// Builds `f(x, y)` on a tape out of per-unit affine and activation
    /// nodes. Slow; an independent route to the batched kernels.
    pub fn record(&self, tape: &mut Tape<'_>, x: f64, y: NodeId) -> NodeId {
        let act = self.spec.activation;
        let layer = |tape: &mut Tape<'_>, slot: &LayerSlot, inputs: &[NodeId], activate: bool| {
            (0..slot.out)
                .map(|o| {
                    let u = tape.affine(inputs, slot.weight(o, 0), slot.b + o);
                    if activate {
                        tape.act(u, act)
                    } else {
                        u
                    }
                })
                .collect::<Vec<_>>()
        };
        let mut hx = vec![tape.constant(x)];
        for slot in &self.layout.x {
            hx = layer(tape, slot, &hx, true);
        }
        let mut hy = vec![y];
        for slot in &self.layout.y {
            hy = layer(tape, slot, &hy, true);
        }
        let mut h: Vec<NodeId> = hx.into_iter().chain(hy).collect();
        let last = self.layout.joint.len() - 1;
        for (l, slot) in self.layout.joint.iter().enumerate() {
            h = layer(tape, slot, &h, l < last);
        }
        h[0]
    }
}

impl Energy for EbmModel {
    fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn eval_group(&self, x: f64, ys: &[f64], order: Order, out: &mut [Jet2]) {
        self.layout.eval_group(&self.theta, x, ys, order, out)
    }

    fn backprop_group(&self, x: f64, ys: &[f64], order: Order, adj: &[Jet2], grad: &mut [f64]) {
        self.layout.backprop_group(&self.theta, x, ys, order, adj, grad)
    }
}

/// A parameter-free energy given by a closure over `(x, y)` jets. Useful
/// as an analytic stand-in for the network.
pub struct FnEnergy<F> {
    f: F,
}

impl<F> FnEnergy<F>
where
    F: Fn(f64, Jet2) -> Jet2 + Sync,
{
    pub fn new(f: F) -> Self {
        FnEnergy { f }
    }
}

impl<F> Energy for FnEnergy<F>
where
    F: Fn(f64, Jet2) -> Jet2 + Sync,
{
    fn num_params(&self) -> usize {
        0
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn eval_group(&self, x: f64, ys: &[f64], order: Order, out: &mut [Jet2]) {
        for (o, &y) in out.iter_mut().zip(ys) {
            let j = (self.f)(x, Jet2::seed(y));
            *o = match order {
                Order::Value => Jet2::constant(j.v),
                Order::First => Jet2::new(j.v, j.d1, 0.0),
                Order::Second => j,
            };
        }
    }

    fn backprop_group(&self, _x: f64, _ys: &[f64], _order: Order, _adj: &[Jet2], _grad: &mut [f64]) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;

    fn random_model(act: Activation, seed: u64) -> EbmModel {
        let mut m = EbmModel::init(MlpSpec::default().with_activation(act), seed).unwrap();
        // nonzero biases so every code path is exercised
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
        for t in m.theta_mut() {
            *t += rng.random_range(-0.3..0.3);
        }
        m
    }

    #[test]
    fn init_is_deterministic() {
        let a = EbmModel::init(MlpSpec::default(), 11).unwrap();
        let b = EbmModel::init(MlpSpec::default(), 11).unwrap();
        assert_eq!(a.theta().len(), 591);
        assert_eq!(a.theta(), b.theta());
        let c = EbmModel::init(MlpSpec::default(), 12).unwrap();
        assert_ne!(a.theta(), c.theta());
        let (xs, _, _) = MlpSpec::default().slots();
        assert!(a.theta()[xs[0].b..xs[0].b + 10].iter().all(|&b| b == 0.0));
        assert!(a.theta()[xs[0].w..xs[0].b].iter().all(|&w| w.abs() <= 1.0));
    }

    #[test]
    fn zero_network_is_zero() {
        let m = EbmModel::zeroed(MlpSpec::default()).unwrap();
        for &(x, y) in &[(0.0, 0.0), (-2.5, 1.0), (3.0, -3.0)] {
            assert_eq!(m.forward(x, y).unwrap(), 0.0);
            assert_eq!(m.forward_jet(x, Jet2::seed(y)).unwrap(), Jet2::ZERO);
        }
    }

    #[test]
    fn unit_linear_network_sums_paths() {
        let spec = MlpSpec {
            x_branch: vec![LayerDims::new(1, 1)],
            y_branch: vec![LayerDims::new(1, 1)],
            joint: vec![LayerDims::new(2, 1), LayerDims::new(1, 1)],
            activation: Activation::Identity,
        };
        // all weights one, biases zero: f = x + y
        let mut theta = vec![0.0; spec.num_params()];
        let (x, y, j) = spec.slots();
        for s in x.iter().chain(&y).chain(&j) {
            theta[s.w..s.b].fill(1.0);
        }
        let m = EbmModel::with_theta(spec, theta, 0).unwrap();
        assert_eq!(m.forward(1.5, -0.25).unwrap(), 1.25);
        assert_eq!(m.forward_jet(2.0, Jet2::seed(3.0)).unwrap(), Jet2::new(5.0, 1.0, 0.0));
    }

    #[test]
    fn nan_parameters_rejected() {
        let mut m = EbmModel::init(MlpSpec::default(), 1).unwrap();
        m.theta_mut()[17] = f64::NAN;
        assert!(matches!(m.forward(0.0, 0.0), Err(Error::NonFiniteParam { index: 17 })));
    }

    #[test]
    fn value_slot_identical_across_orders() {
        for act in [Activation::Relu, Activation::Softplus] {
            let m = random_model(act, 5);
            for k in 0..50 {
                let x = -3.0 + 0.12 * k as f64;
                let y = 2.9 - 0.113 * k as f64;
                let v = m.forward(x, y).unwrap();
                let j = m.forward_jet(x, Jet2::seed(y)).unwrap();
                assert_eq!(v.to_bits(), j.v.to_bits());
            }
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        for act in [Activation::Relu, Activation::Softplus] {
            for seed in 0..5 {
                let mut m = random_model(act, seed);
                // wider weights give curvature well above rounding level
                for t in m.theta_mut() {
                    *t *= 3.0;
                }
                let (x, y) = (0.3 + 0.2 * seed as f64, -0.7 + 0.31 * seed as f64);
                let j = m.forward_jet(x, Jet2::seed(y)).unwrap();
                let h = 1e-5;
                let fd1 = (m.forward(x, y + h).unwrap() - m.forward(x, y - h).unwrap()) / (2.0 * h);
                assert!((j.d1 - fd1).abs() / (fd1.abs() + 1e-12) < 1e-6, "{act:?} d1 {} vs {}", j.d1, fd1);
                if act == Activation::Softplus {
                    let h = 1e-4;
                    let fd2 = (m.forward(x, y + h).unwrap() - 2.0 * m.forward(x, y).unwrap()
                        + m.forward(x, y - h).unwrap())
                        / (h * h);
                    assert!((j.d2 - fd2).abs() / (fd2.abs() + 1e-12) < 1e-4, "d2 {} vs {}", j.d2, fd2);
                } else {
                    assert_eq!(j.d2, 0.0);
                }
            }
        }
    }

    #[test]
    fn batched_backprop_matches_tape() {
        for act in [Activation::Relu, Activation::Softplus] {
            let m = random_model(act, 9);
            let x = 0.8;
            let ys = [-1.0, 0.2, 0.9, 2.2, -2.7];
            let adj: Vec<Jet2> =
                (0..ys.len()).map(|s| Jet2::new(0.3 + s as f64, -0.5 * s as f64, 0.25 - 0.1 * s as f64)).collect();
            let mut fused = vec![0.0; m.num_params()];
            m.backprop_group(x, &ys, Order::Second, &adj, &mut fused);

            // same weighted sum, assembled from per-unit tape nodes
            let theta = m.theta().to_vec();
            let mut tape = Tape::new(&theta);
            let mut terms = Vec::new();
            for (s, &y) in ys.iter().enumerate() {
                let yn = tape.seed(y);
                let f = m.record(&mut tape, x, yn);
                let mut jf = [Jet2::ZERO];
                m.eval_group(x, &[y], Order::Second, &mut jf);
                let tv = tape.value(f);
                assert!((tv.v - jf[0].v).abs() < 1e-12 && (tv.d1 - jf[0].d1).abs() < 1e-12);
                assert!((tv.d2 - jf[0].d2).abs() < 1e-12);
                let a = adj[s];
                let pv = tape.primal(f);
                let p1 = tape.d1(f);
                let p2 = tape.d2(f);
                let k0 = tape.scale(pv, a.v);
                let k1 = tape.scale(p1, a.d1);
                let k2 = tape.scale(p2, a.d2);
                terms.extend([k0, k1, k2]);
            }
            let root = tape.sum(&terms);
            let g = tape.backward(root).unwrap();
            for (p, (a, b)) in fused.iter().zip(g.params.iter()).enumerate() {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{act:?} param {p}: {a} vs {b}");
            }
        }
    }
}
