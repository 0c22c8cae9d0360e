//! Scalar automatic differentiation: jets for `y`-derivatives and a
//! reverse-mode tape for parameter gradients.

mod activation;
mod jet;
mod tape;

pub use activation::{sigmoid, Activation};
pub use jet::{jet_eval, Jet2};
pub(crate) use tape::unary_adjoint;
pub use tape::{logsumexp, GradVector, Gradients, NodeId, Tape};

/// Relative disagreement between `grad` and a central-difference estimate
/// of the gradient of `loss` at `theta`, in the max norm:
/// `max_p |g(p) - g_fd(p)| / max_p |g_fd(p)|`.
pub fn finite_diff_check<F>(mut loss: F, grad: &[f64], theta: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(grad.len(), theta.len());
    let mut th = theta.to_vec();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in 0..th.len() {
        let orig = th[p];
        th[p] = orig + eps;
        let up = loss(&th);
        th[p] = orig - eps;
        let down = loss(&th);
        th[p] = orig;
        let fd = (up - down) / (2.0 * eps);
        worst = worst.max((grad[p] - fd).abs());
        scale = scale.max(fd.abs());
    }
    worst / scale.max(1e-300)
}
