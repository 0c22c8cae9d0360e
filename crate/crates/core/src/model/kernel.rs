//! Batched forward and reverse passes for many `y` values sharing one `x`.
//!
//! Activations are stored channel-major: `chan[c][unit * n + s]` holds jet
//! slot `c` (value, d/dy, d²/dy²) of `unit` for sample `s`. The `x` branch
//! and its contribution to the first joint layer are computed once per
//! group.

use super::spec::LayerSlot;
use crate::autodiff::{Activation, Jet2};

/// Number of jet slots carried through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Value,
    First,
    Second,
}

impl Order {
    pub fn channels(self) -> usize {
        match self {
            Order::Value => 1,
            Order::First => 2,
            Order::Second => 3,
        }
    }
}

pub(crate) struct Layout {
    pub x: Vec<LayerSlot>,
    pub y: Vec<LayerSlot>,
    pub joint: Vec<LayerSlot>,
    pub act: Activation,
}

type Chans = Vec<Vec<f64>>;

struct XTrace {
    input: f64,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Bias plus the x-feature part of the first joint layer.
    partial: Vec<f64>,
}

impl XTrace {
    fn features(&self) -> &[f64] {
        match self.post.last() {
            Some(h) => h,
            None => std::slice::from_ref(&self.input),
        }
    }
}

struct YTrace {
    nc: usize,
    input: Chans,
    /// Pre- and post-activation of each `y`-branch layer, then each joint
    /// layer. The final joint layer has no activation; its `post` is empty.
    pre: Vec<Chans>,
    post: Vec<Chans>,
}

impl Layout {
    fn x_forward(&self, theta: &[f64], x: f64) -> XTrace {
        let mut pre = Vec::with_capacity(self.x.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.x.len());
        for slot in &self.x {
            let input: &[f64] = match post.last() {
                Some(h) => h,
                None => std::slice::from_ref(&x),
            };
            let mut u = vec![0.0; slot.out];
            for (o, uo) in u.iter_mut().enumerate() {
                let mut acc = theta[slot.b + o];
                for (j, &h) in input.iter().enumerate() {
                    acc += theta[slot.weight(o, j)] * h;
                }
                *uo = acc;
            }
            let h: Vec<f64> = u.iter().map(|&v| self.act.value(v)).collect();
            pre.push(u);
            post.push(h);
        }
        let mut tr = XTrace { input: x, pre, post, partial: Vec::new() };
        let first = &self.joint[0];
        let hx = tr.features();
        let partial = (0..first.out)
            .map(|o| {
                let mut acc = theta[first.b + o];
                for (j, &h) in hx.iter().enumerate() {
                    acc += theta[first.weight(o, j)] * h;
                }
                acc
            })
            .collect();
        tr.partial = partial;
        tr
    }

    fn y_forward(&self, theta: &[f64], xt: &XTrace, ys: &[f64], order: Order) -> YTrace {
        let n = ys.len();
        let nc = order.channels();
        let mut input = vec![ys.to_vec()];
        if nc > 1 {
            input.push(vec![1.0; n]);
        }
        if nc > 2 {
            input.push(vec![0.0; n]);
        }
        let total = self.y.len() + self.joint.len();
        let mut tr = YTrace { nc, input, pre: Vec::with_capacity(total), post: Vec::with_capacity(total) };

        for (l, slot) in self.y.iter().enumerate() {
            let src = if l == 0 { &tr.input } else { &tr.post[l - 1] };
            let bias = &theta[slot.b..slot.b + slot.out];
            let u = affine(theta, slot, 0, slot.inp, src, bias, nc, n);
            let h = activate(self.act, &u, nc);
            tr.pre.push(u);
            tr.post.push(h);
        }
        let hx_dim = xt.features().len();
        for (l, slot) in self.joint.iter().enumerate() {
            let u = if l == 0 {
                let src = if self.y.is_empty() { &tr.input } else { &tr.post[self.y.len() - 1] };
                affine(theta, slot, hx_dim, slot.inp - hx_dim, src, &xt.partial, nc, n)
            } else {
                let src = &tr.post[self.y.len() + l - 1];
                affine(theta, slot, 0, slot.inp, src, &theta[slot.b..slot.b + slot.out], nc, n)
            };
            let h = if l + 1 < self.joint.len() { activate(self.act, &u, nc) } else { Vec::new() };
            tr.pre.push(u);
            tr.post.push(h);
        }
        tr
    }

    /// Evaluates `f(x, ys[s])` for every sample with `order` jet slots.
    pub fn eval_group(&self, theta: &[f64], x: f64, ys: &[f64], order: Order, out: &mut [Jet2]) {
        assert_eq!(ys.len(), out.len());
        let xt = self.x_forward(theta, x);
        let yt = self.y_forward(theta, &xt, ys, order);
        let f = yt.pre.last().unwrap();
        for (s, o) in out.iter_mut().enumerate() {
            *o = Jet2 {
                v: f[0][s],
                d1: if yt.nc > 1 { f[1][s] } else { 0.0 },
                d2: if yt.nc > 2 { f[2][s] } else { 0.0 },
            };
        }
    }

    /// Accumulates `Σ_s adj[s] · ∂f(x, ys[s])/∂θ` into `grad`, where
    /// `adj[s]` is the jet-shaped adjoint of sample `s`'s output.
    pub fn backprop_group(&self, theta: &[f64], x: f64, ys: &[f64], order: Order, adj: &[Jet2], grad: &mut [f64]) {
        let n = ys.len();
        let nc = order.channels();
        let xt = self.x_forward(theta, x);
        let yt = self.y_forward(theta, &xt, ys, order);

        let mut a: Chans = vec![adj.iter().map(|j| j.v).collect()];
        if nc > 1 {
            a.push(adj.iter().map(|j| j.d1).collect());
        }
        if nc > 2 {
            a.push(adj.iter().map(|j| j.d2).collect());
        }

        let ny = self.y.len();
        let hx = xt.features();
        let hx_dim = hx.len();
        let mut partial_adj = Vec::new();

        for l in (0..self.joint.len()).rev() {
            let slot = &self.joint[l];
            if l > 0 {
                let src = &yt.post[ny + l - 1];
                let a_in = affine_back(theta, slot, 0, slot.inp, src, &a, nc, n, grad, true);
                a = act_back(self.act, &yt.pre[ny + l - 1], &a_in, nc);
            } else {
                // x-feature columns see a constant input
                let row_sums: Vec<f64> = (0..slot.out).map(|o| a[0][o * n..(o + 1) * n].iter().sum()).collect();
                for o in 0..slot.out {
                    grad[slot.b + o] += row_sums[o];
                    for (j, &h) in hx.iter().enumerate() {
                        grad[slot.weight(o, j)] += row_sums[o] * h;
                    }
                }
                partial_adj = row_sums;
                let src = if ny == 0 { &yt.input } else { &yt.post[ny - 1] };
                let need_input = ny > 0;
                let a_in = affine_back(theta, slot, hx_dim, slot.inp - hx_dim, src, &a, nc, n, grad, false);
                if need_input {
                    a = act_back(self.act, &yt.pre[ny - 1], &a_in, nc);
                }
            }
        }
        for l in (0..ny).rev() {
            let slot = &self.y[l];
            let src = if l == 0 { &yt.input } else { &yt.post[l - 1] };
            let a_in = affine_back(theta, slot, 0, slot.inp, src, &a, nc, n, grad, true);
            if l > 0 {
                a = act_back(self.act, &yt.pre[l - 1], &a_in, nc);
            }
        }

        // x branch, once per group
        let first = &self.joint[0];
        let mut ah: Vec<f64> =
            (0..hx_dim).map(|j| (0..first.out).map(|o| theta[first.weight(o, j)] * partial_adj[o]).sum()).collect();
        for l in (0..self.x.len()).rev() {
            let slot = &self.x[l];
            let au: Vec<f64> = xt.pre[l].iter().zip(&ah).map(|(&u, &g)| self.act.derivs(u)[1] * g).collect();
            let input: &[f64] = if l == 0 { std::slice::from_ref(&xt.input) } else { &xt.post[l - 1] };
            let mut next = vec![0.0; slot.inp];
            for o in 0..slot.out {
                grad[slot.b + o] += au[o];
                for (j, &h) in input.iter().enumerate() {
                    grad[slot.weight(o, j)] += au[o] * h;
                    next[j] += theta[slot.weight(o, j)] * au[o];
                }
            }
            ah = next;
        }
    }
}

const LANES: usize = 8;
const ROWS: usize = 2;

/// `dst[r][s] = init[r] + Σ_k w[r][k] · src[k][s]` for `r < rows`, each
/// sum accumulated in `k` order. `src` rows have stride `n`; `dst` gets
/// the rows appended one after another.
fn gemm_rows(w: &[Vec<f64>], init: &[f64], src: &[f64], n: usize, dst: &mut Vec<f64>) {
    let rows = w.len();
    let mut r0 = 0;
    while r0 < rows {
        let nr = ROWS.min(rows - r0);
        let base = dst.len();
        dst.resize(base + nr * n, 0.0);
        let out = &mut dst[base..];
        if nr == ROWS {
            let wb: [&Vec<f64>; ROWS] = std::array::from_fn(|i| &w[r0 + i]);
            let ib: [f64; ROWS] = std::array::from_fn(|i| init[r0 + i]);
            let mut s0 = 0;
            while s0 + LANES <= n {
                let mut acc = [[0.0; LANES]; ROWS];
                for r in 0..ROWS {
                    acc[r] = [ib[r]; LANES];
                }
                for k in 0..wb[0].len() {
                    let sk = &src[k * n + s0..k * n + s0 + LANES];
                    for r in 0..ROWS {
                        let wk = wb[r][k];
                        for l in 0..LANES {
                            acc[r][l] += wk * sk[l];
                        }
                    }
                }
                for r in 0..ROWS {
                    out[r * n + s0..r * n + s0 + LANES].copy_from_slice(&acc[r]);
                }
                s0 += LANES;
            }
            for r in 0..ROWS {
                for s in s0..n {
                    let mut acc = ib[r];
                    for (k, &wk) in wb[r].iter().enumerate() {
                        acc += wk * src[k * n + s];
                    }
                    out[r * n + s] = acc;
                }
            }
        } else {
            for r in 0..nr {
                let wr = &w[r0 + r];
                for s in 0..n {
                    let mut acc = init[r0 + r];
                    for (k, &wk) in wr.iter().enumerate() {
                        acc += wk * src[k * n + s];
                    }
                    out[r * n + s] = acc;
                }
            }
        }
        r0 += nr;
    }
}

/// `out[c][o] = init(c, o) + Σ_j w[o][col0 + j] · src[c][j]` for every
/// sample, accumulated in column order.
#[allow(clippy::too_many_arguments)]
fn affine(
    theta: &[f64],
    slot: &LayerSlot,
    col0: usize,
    cols: usize,
    src: &Chans,
    init_v: &[f64],
    nc: usize,
    n: usize,
) -> Chans {
    let w: Vec<Vec<f64>> =
        (0..slot.out).map(|o| (0..cols).map(|j| theta[slot.weight(o, col0 + j)]).collect()).collect();
    let zeros = vec![0.0; slot.out];
    (0..nc)
        .map(|c| {
            let mut oc = Vec::with_capacity(slot.out * n);
            gemm_rows(&w, if c == 0 { init_v } else { &zeros }, &src[c], n, &mut oc);
            oc
        })
        .collect()
}

/// Reverse of [`affine`] over columns `col0..col0+cols`: accumulates weight
/// (and optionally bias) gradients and returns the adjoint of `src`.
#[allow(clippy::too_many_arguments)]
fn affine_back(
    theta: &[f64],
    slot: &LayerSlot,
    col0: usize,
    cols: usize,
    src: &Chans,
    a: &Chans,
    nc: usize,
    n: usize,
    grad: &mut [f64],
    with_bias: bool,
) -> Chans {
    if with_bias {
        for o in 0..slot.out {
            grad[slot.b + o] += a[0][o * n..(o + 1) * n].iter().sum::<f64>();
        }
    }
    let mut dots = vec![0.0; cols];
    for c in 0..nc {
        for o in 0..slot.out {
            multi_dot(&a[c][o * n..(o + 1) * n], &src[c], n, &mut dots);
            for (j, d) in dots.iter().enumerate() {
                grad[slot.weight(o, col0 + j)] += d;
            }
        }
    }
    let wt: Vec<Vec<f64>> =
        (0..cols).map(|j| (0..slot.out).map(|o| theta[slot.weight(o, col0 + j)]).collect()).collect();
    let zeros = vec![0.0; cols];
    (0..nc)
        .map(|c| {
            let mut ac = Vec::with_capacity(cols * n);
            gemm_rows(&wt, &zeros, &a[c], n, &mut ac);
            ac
        })
        .collect()
}

/// `out[j] = <a, src[j*n..(j+1)*n]>` for every column `j`.
fn multi_dot(a: &[f64], src: &[f64], n: usize, out: &mut [f64]) {
    let mut j = 0;
    while j + 4 <= out.len() {
        let s = [
            &src[j * n..(j + 1) * n],
            &src[(j + 1) * n..(j + 2) * n],
            &src[(j + 2) * n..(j + 3) * n],
            &src[(j + 3) * n..(j + 4) * n],
        ];
        let mut acc = [[0.0f64; 4]; 4];
        let chunks = n / 4;
        for k in 0..chunks {
            let av = &a[4 * k..4 * k + 4];
            for (q, sq) in s.iter().enumerate() {
                let sv = &sq[4 * k..4 * k + 4];
                for l in 0..4 {
                    acc[q][l] += av[l] * sv[l];
                }
            }
        }
        for q in 0..4 {
            let mut tail = 0.0;
            for i in 4 * chunks..n {
                tail += a[i] * s[q][i];
            }
            out[j + q] = (acc[q][0] + acc[q][1]) + (acc[q][2] + acc[q][3]) + tail;
        }
        j += 4;
    }
    for (q, o) in out.iter_mut().enumerate().skip(j) {
        *o = dot(a, &src[q * n..(q + 1) * n]);
    }
}

fn activate(act: Activation, u: &Chans, nc: usize) -> Chans {
    match act {
        Activation::Relu => {
            let gate = &u[0];
            (0..nc).map(|c| u[c].iter().zip(gate).map(|(&v, &g)| if g > 0.0 { v } else { 0.0 }).collect()).collect()
        }
        _ => {
            let len = u[0].len();
            let mut h: Chans = (0..nc).map(|_| vec![0.0; len]).collect();
            for i in 0..len {
                let [g0, g1, g2, _] = act.derivs(u[0][i]);
                h[0][i] = g0;
                if nc > 1 {
                    h[1][i] = g1 * u[1][i];
                }
                if nc > 2 {
                    h[2][i] = g2 * u[1][i] * u[1][i] + g1 * u[2][i];
                }
            }
            h
        }
    }
}

/// Adjoint of the pre-activation given the adjoint of the post-activation.
fn act_back(act: Activation, u: &Chans, a: &Chans, nc: usize) -> Chans {
    match act {
        Activation::Relu => {
            let gate = &u[0];
            (0..nc).map(|c| a[c].iter().zip(gate).map(|(&v, &g)| if g > 0.0 { v } else { 0.0 }).collect()).collect()
        }
        _ => {
            let len = u[0].len();
            let mut out: Chans = (0..nc).map(|_| vec![0.0; len]).collect();
            for i in 0..len {
                let [_, g1, g2, g3] = act.derivs(u[0][i]);
                match nc {
                    1 => out[0][i] = g1 * a[0][i],
                    2 => {
                        out[0][i] = g1 * a[0][i] + g2 * u[1][i] * a[1][i];
                        out[1][i] = g1 * a[1][i];
                    }
                    _ => {
                        let uj = Jet2::new(u[0][i], u[1][i], u[2][i]);
                        let aj = Jet2::new(a[0][i], a[1][i], a[2][i]);
                        let r = crate::autodiff::unary_adjoint(aj, uj, g1, g2, g3);
                        out[0][i] = r.v;
                        out[1][i] = r.d1;
                        out[2][i] = r.d2;
                    }
                }
            }
            out
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
