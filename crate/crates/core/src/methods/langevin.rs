//! Unadjusted Langevin dynamics on `f(x, ·)`:
//! `y ← y + (α²/2)·∂f/∂y + α·ε`, `ε ~ N(0, 1)`.

use crate::autodiff::Jet2;
use crate::error::{Error, Result};
use crate::model::{Energy, Order};
use crate::rng::{normal, Rng};

/// Advances every chain in `ys` by `steps` steps in place. All chains share
/// `x`; noise is drawn step-major (all chains for step 0, then step 1, …).
pub fn langevin_chains(
    energy: &dyn Energy,
    x: f64,
    ys: &mut [f64],
    steps: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Result<()> {
    let mut grad = vec![Jet2::ZERO; ys.len()];
    let drift = 0.5 * alpha * alpha;
    for step in 0..steps {
        energy.eval_group(x, ys, Order::First, &mut grad);
        for (y, g) in ys.iter_mut().zip(&grad) {
            *y += drift * g.d1 + alpha * normal(rng);
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::ChainDiverged { step });
        }
    }
    Ok(())
}

/// Runs one chain from `y0` and returns its final state.
pub fn langevin_chain(energy: &dyn Energy, x: f64, y0: f64, steps: usize, alpha: f64, rng: &mut Rng) -> Result<f64> {
    let mut y = [y0];
    langevin_chains(energy, x, &mut y, steps, alpha, rng)?;
    Ok(y[0])
}

/// Runs `chains` parallel chains from `y0` for `steps` steps and returns
/// every visited state (step-major), excluding the start.
pub fn langevin_trajectory(
    energy: &dyn Energy,
    x: f64,
    y0: f64,
    chains: usize,
    steps: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mut ys = vec![y0; chains];
    let mut visited = Vec::with_capacity(chains * steps);
    for step in 0..steps {
        langevin_chains(energy, x, &mut ys, 1, alpha, rng).map_err(|_| Error::ChainDiverged { step })?;
        visited.extend_from_slice(&ys);
    }
    Ok(visited)
}
