//! Append-only scalar graph with jet payloads.
//!
//! Every node carries a [`Jet2`], so a loss may be built from `f`, `∂f/∂y`
//! and `∂²f/∂y²` and still be differentiated with respect to the parameter
//! vector (reverse-over-forward). Adjoints are jet-shaped as well: one
//! adjoint per jet slot.

use std::ops::Deref;

use super::activation::Activation;
use super::jet::Jet2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Param(u32),
    /// Evaluated outside the tape; its adjoint is handed back to the caller.
    Extern(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Scale(u32, f64),
    Shift(u32),
    Act(u32, Activation),
    Exp(u32),
    Ln(u32),
    Square(u32),
    Affine {
        args: u32,
        len: u32,
        weights: u32,
        bias: u32,
    },
    Sum {
        args: u32,
        len: u32,
    },
    LogSumExp {
        args: u32,
        len: u32,
    },
    Primal(u32),
    D1(u32),
    D2(u32),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    val: Jet2,
}

/// Gradient with respect to the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn zeros(len: usize) -> Self {
        GradVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for GradVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for GradVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: GradVector,
    /// Adjoint of every external node, indexed by the slot returned from
    /// [`Tape::external`].
    pub externs: Vec<Jet2>,
}

pub struct Tape<'p> {
    theta: &'p [f64],
    nodes: Vec<Node>,
    args: Vec<u32>,
    n_extern: u32,
}

impl<'p> Tape<'p> {
    /// A tape whose `Param` and `Affine` nodes read from `theta`. The borrow
    /// keeps the parameters frozen until the tape is dropped.
    pub fn new(theta: &'p [f64]) -> Self {
        Tape { theta, nodes: Vec::new(), args: Vec::new(), n_extern: 0 }
    }

    pub fn with_capacity(theta: &'p [f64], nodes: usize) -> Self {
        Tape { theta, nodes: Vec::with_capacity(nodes), args: Vec::new(), n_extern: 0 }
    }

    pub fn theta(&self) -> &'p [f64] {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_externs(&self) -> usize {
        self.n_extern as usize
    }

    pub fn value(&self, id: NodeId) -> Jet2 {
        self.nodes[id.index()].val
    }

    fn push(&mut self, op: Op, val: Jet2) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { op, val });
        id
    }

    fn push_args(&mut self, ids: &[NodeId]) -> (u32, u32) {
        let start = self.args.len() as u32;
        self.args.extend(ids.iter().map(|id| id.0));
        (start, ids.len() as u32)
    }

    fn val(&self, id: NodeId) -> Jet2 {
        self.nodes[id.index()].val
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Leaf, Jet2::constant(v))
    }

    /// The differentiation variable `y`, seeded with unit first derivative.
    pub fn seed(&mut self, y: f64) -> NodeId {
        self.push(Op::Leaf, Jet2::seed(y))
    }

    pub fn leaf(&mut self, v: Jet2) -> NodeId {
        self.push(Op::Leaf, v)
    }

    pub fn param(&mut self, index: usize) -> NodeId {
        let v = self.theta[index];
        self.push(Op::Param(index as u32), Jet2::constant(v))
    }

    /// Inserts a value computed elsewhere. Returns the node and its extern
    /// slot; after [`backward`](Self::backward) the slot's adjoint is in
    /// [`Gradients::externs`].
    pub fn external(&mut self, value: Jet2) -> (NodeId, usize) {
        let slot = self.n_extern;
        self.n_extern += 1;
        (self.push(Op::Extern(slot), value), slot as usize)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) + self.val(b);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) - self.val(b);
        self.push(Op::Sub(a.0, b.0), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.val(a) * self.val(b);
        self.push(Op::Mul(a.0, b.0), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a).scale(c);
        self.push(Op::Scale(a.0, c), v)
    }

    pub fn shift(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a) + c;
        self.push(Op::Shift(a.0), v)
    }

    pub fn act(&mut self, a: NodeId, act: Activation) -> NodeId {
        let u = self.val(a);
        let [g0, g1, g2, _] = act.derivs(u.v);
        self.push(Op::Act(a.0, act), u.chain(g0, g1, g2))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).exp();
        self.push(Op::Exp(a.0), v)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).ln();
        self.push(Op::Ln(a.0), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).square();
        self.push(Op::Square(a.0), v)
    }

    /// `Σ_j θ[weights + j]·inputs[j] + θ[bias]`.
    pub fn affine(&mut self, inputs: &[NodeId], weights: usize, bias: usize) -> NodeId {
        let th = self.theta;
        let mut out = Jet2::constant(th[bias]);
        for (j, &id) in inputs.iter().enumerate() {
            out = out + self.val(id).scale(th[weights + j]);
        }
        let (args, len) = self.push_args(inputs);
        self.push(Op::Affine { args, len, weights: weights as u32, bias: bias as u32 }, out)
    }

    pub fn sum(&mut self, inputs: &[NodeId]) -> NodeId {
        let out = inputs.iter().fold(Jet2::ZERO, |acc, &id| acc + self.val(id));
        let (args, len) = self.push_args(inputs);
        self.push(Op::Sum { args, len }, out)
    }

    pub fn mean(&mut self, inputs: &[NodeId]) -> NodeId {
        let s = self.sum(inputs);
        self.scale(s, 1.0 / inputs.len() as f64)
    }

    /// `log Σ exp(inputs)` with the maximum subtracted before
    /// exponentiating. Inputs must not depend on `y`.
    pub fn logsumexp(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::Unsupported("logsumexp over zero inputs".into()));
        }
        if let Some(id) = inputs.iter().find(|id| !self.val(**id).is_constant()) {
            return Err(Error::Unsupported(format!("logsumexp input node {} carries y-derivatives", id.index())));
        }
        let vals: Vec<f64> = inputs.iter().map(|&id| self.val(id).v).collect();
        let out = logsumexp(&vals);
        let (args, len) = self.push_args(inputs);
        Ok(self.push(Op::LogSumExp { args, len }, Jet2::constant(out)))
    }

    /// The value slot of `a` with its y-derivatives dropped.
    pub fn primal(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).v;
        self.push(Op::Primal(a.0), Jet2::constant(v))
    }

    /// The first y-derivative of `a`, as a plain value.
    pub fn d1(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).d1;
        self.push(Op::D1(a.0), Jet2::constant(v))
    }

    /// The second y-derivative of `a`, as a plain value.
    pub fn d2(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).d2;
        self.push(Op::D2(a.0), Jet2::constant(v))
    }

    /// Reverse sweep from `root`. The tape is left untouched and can be
    /// swept again.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let r = root.index();
        if !self.nodes[r].val.is_constant() {
            return Err(Error::NonScalarRoot { node: r });
        }
        let mut adj = vec![Jet2::ZERO; r + 1];
        let mut grad = GradVector::zeros(self.theta.len());
        let mut externs = vec![Jet2::ZERO; self.n_extern as usize];
        adj[r].v = 1.0;

        for i in (0..=r).rev() {
            let a = adj[i];
            if a == Jet2::ZERO {
                continue;
            }
            let node = self.nodes[i];
            if !a.is_finite() || !node.val.is_finite() {
                // report where the non-finite value first appeared
                let origin = self.nodes[..=i].iter().position(|n| !n.val.is_finite()).unwrap_or(i);
                return Err(Error::NonFiniteNode { node: origin });
            }
            match node.op {
                Op::Leaf => {}
                Op::Param(p) => grad[p as usize] += a.v,
                Op::Extern(s) => externs[s as usize] = externs[s as usize] + a,
                Op::Add(x, y) => {
                    add_to(&mut adj, x, a);
                    add_to(&mut adj, y, a);
                }
                Op::Sub(x, y) => {
                    add_to(&mut adj, x, a);
                    add_to(&mut adj, y, -a);
                }
                Op::Mul(x, y) => {
                    let (u, w) = (self.nodes[x as usize].val, self.nodes[y as usize].val);
                    add_to(&mut adj, x, mul_adjoint(a, w));
                    add_to(&mut adj, y, mul_adjoint(a, u));
                }
                Op::Scale(x, c) => add_to(&mut adj, x, a.scale(c)),
                Op::Shift(x) => add_to(&mut adj, x, a),
                Op::Act(x, act) => {
                    let u = self.nodes[x as usize].val;
                    let [_, g1, g2, g3] = act.derivs(u.v);
                    add_to(&mut adj, x, unary_adjoint(a, u, g1, g2, g3));
                }
                Op::Exp(x) => {
                    let u = self.nodes[x as usize].val;
                    let e = node.val.v;
                    add_to(&mut adj, x, unary_adjoint(a, u, e, e, e));
                }
                Op::Ln(x) => {
                    let u = self.nodes[x as usize].val;
                    let r = 1.0 / u.v;
                    add_to(&mut adj, x, unary_adjoint(a, u, r, -r * r, 2.0 * r * r * r));
                }
                Op::Square(x) => {
                    let u = self.nodes[x as usize].val;
                    add_to(&mut adj, x, unary_adjoint(a, u, 2.0 * u.v, 2.0, 0.0));
                }
                Op::Affine { args, len, weights, bias } => {
                    let ids = &self.args[args as usize..(args + len) as usize];
                    grad[bias as usize] += a.v;
                    for (j, &x) in ids.iter().enumerate() {
                        let w = self.theta[weights as usize + j];
                        let u = self.nodes[x as usize].val;
                        grad[weights as usize + j] += a.v * u.v + a.d1 * u.d1 + a.d2 * u.d2;
                        add_to(&mut adj, x, a.scale(w));
                    }
                }
                Op::Sum { args, len } => {
                    for k in args..args + len {
                        add_to(&mut adj, self.args[k as usize], a);
                    }
                }
                Op::LogSumExp { args, len } => {
                    for k in args..args + len {
                        let x = self.args[k as usize];
                        let w = (self.nodes[x as usize].val.v - node.val.v).exp();
                        adj[x as usize].v += a.v * w;
                    }
                }
                Op::Primal(x) => adj[x as usize].v += a.v,
                Op::D1(x) => adj[x as usize].d1 += a.v,
                Op::D2(x) => adj[x as usize].d2 += a.v,
            }
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        Ok(Gradients { params: grad, externs })
    }
}

#[inline]
fn add_to(adj: &mut [Jet2], x: u32, a: Jet2) {
    let slot = &mut adj[x as usize];
    *slot = *slot + a;
}

/// Adjoint reaching `u` through `h = g(u)` given the jet adjoint `a` of `h`.
#[inline]
pub(crate) fn unary_adjoint(a: Jet2, u: Jet2, g1: f64, g2: f64, g3: f64) -> Jet2 {
    Jet2 {
        v: g1 * a.v + g2 * u.d1 * a.d1 + (g3 * u.d1 * u.d1 + g2 * u.d2) * a.d2,
        d1: g1 * a.d1 + 2.0 * g2 * u.d1 * a.d2,
        d2: g1 * a.d2,
    }
}

/// Adjoint reaching one factor of a product given the other factor `w`.
#[inline]
fn mul_adjoint(a: Jet2, w: Jet2) -> Jet2 {
    Jet2 { v: a.v * w.v + a.d1 * w.d1 + a.d2 * w.d2, d1: a.d1 * w.v + 2.0 * a.d2 * w.d1, d2: a.d2 * w.v }
}

/// Max-shifted log-sum-exp. Returns `-inf` when every input is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
