//! Langevin sampling from analytic energies: a standard normal and a
//! two-bump density.

use ebm_regress::autodiff::Jet2;
use ebm_regress::methods::langevin_trajectory;
use ebm_regress::model::FnEnergy;
use ebm_regress::rng::stream;

fn moments(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / v.len() as f64)
}

fn main() -> ebm_regress::Result<()> {
    let alpha = 0.05;
    let normal = FnEnergy::new(|_x, y: Jet2| y.square().scale(-0.5));
    let ys = langevin_trajectory(&normal, 0.0, 0.0, 64, 20_000, alpha, &mut stream(&[1]))?;
    let (m, v) = moments(&ys);
    let exact = 1.0 / (1.0 - alpha * alpha / 4.0);
    println!("N(0,1): mean {m:+.4}, variance {v:.4} (discrete chain stationary variance {exact:.6})");

    // f = log(e^{-(y-1)²/0.1} + e^{-(y+1)²/0.1})
    let bumps = FnEnergy::new(|_x, y: Jet2| {
        let a = (y - Jet2::constant(1.0)).square().scale(-10.0).exp();
        let b = (y + Jet2::constant(1.0)).square().scale(-10.0).exp();
        (a + b).ln()
    });
    let ys = langevin_trajectory(&bumps, 0.0, 1.0, 64, 20_000, alpha, &mut stream(&[2]))?;
    let right = ys.iter().filter(|&&y| y > 0.0).count() as f64 / ys.len() as f64;
    println!("two bumps: {:.1}% of visited states right of 0", 100.0 * right);
    Ok(())
}
