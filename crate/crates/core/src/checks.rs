//! Self-contained correctness checks with known answers. `selfcheck` runs
//! them at small sizes; the acceptance suite runs them at full size.

use rand::Rng as _;

use crate::autodiff::{finite_diff_check, Activation, Jet2};
use crate::data::{normal_logpdf, Dataset};
use crate::error::Result;
use crate::evaluation::{kl_grid, predict, predict_trace, GridDensity, GridSpec, PredictorConfig};
use crate::methods::{
    draw_samples, langevin_trajectory, loss_and_grad_with, loss_value_with, ExampleDraw, MethodConfig, Samples,
};
use crate::model::{EbmModel, FnEnergy, MlpSpec};
use crate::rng::stream;

/// A named check outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Worst gradient error of each method over `draws` random parameter
/// vectors and batches (softplus network, `M = m`).
pub fn gradient_errors(draws: usize, batch: usize, m: usize, seed: u64) -> Result<Vec<(String, f64)>> {
    let spec = MlpSpec::default().with_activation(Activation::Softplus);
    let mut out = Vec::new();
    for name in MethodConfig::NAMES {
        let cfg = MethodConfig::default_for(name)?.with_num_samples(m);
        let mut worst = 0.0f64;
        for d in 0..draws {
            let mut rng = stream(&[seed, d as u64]);
            let model = EbmModel::init(spec.clone(), rng.random())?;
            let data = Dataset::ds2().generate(batch, rng.random())?;
            let b = &data.pairs;
            let samples = draw_samples(&model, b, &cfg, &mut rng)?;
            let (_, g) = loss_and_grad_with(&model, b, &cfg, &samples)?;
            let err = finite_diff_check(
                |t| {
                    let m = EbmModel::with_theta(spec.clone(), t.to_vec(), 0).expect("same spec");
                    loss_value_with(&m, b, &cfg, &samples).map_or(f64::NAN, |l| l.total)
                },
                &g,
                model.theta(),
                1e-5,
            );
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
        out.push((name.to_string(), worst));
    }
    Ok(out)
}

pub fn check_gradients(draws: usize, batch: usize, m: usize) -> Result<Check> {
    let errs = gradient_errors(draws, batch, m, 0x67ad)?;
    let ok = errs.iter().all(|(n, e)| *e < if n == "sm" { 1e-4 } else { 1e-5 });
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    Ok(Check::new(format!("gradients vs central differences ({draws} draws)"), ok, detail))
}

/// Closed-form loss values: `(name, got, expected)`.
pub fn closed_form_losses(m: usize) -> Result<Vec<(String, f64, f64)>> {
    let batch: Vec<(f64, f64)> = (0..8).map(|i| (-2.5 + 0.6 * i as f64, 0.0)).collect();
    let mut out = Vec::new();

    for name in ["nce", "nce+"] {
        let cfg = MethodConfig::default_for(name)?.with_num_samples(m);
        let noise = match &cfg {
            MethodConfig::Nce(c) => c.noise.clone(),
            MethodConfig::NcePlus(c) => c.noise.clone(),
            _ => unreachable!(),
        };
        // logits f − log p_N are constant
        let e = FnEnergy::new(move |_, y: Jet2| Jet2::constant(noise.logpdf(y.v, 0.0) + 0.7));
        let s = draw_samples(&e, &batch, &cfg, &mut stream(&[1]))?;
        let got = loss_value_with(&e, &batch, &cfg, &s)?.total;
        out.push((format!("{name} uniform logits"), got, ((m + 1) as f64).ln()));
    }

    let sigma = 0.2;
    let dsm = MethodConfig::default_for("dsm")?.with_num_samples(m);
    let e = FnEnergy::new(move |x, y: Jet2| {
        let u = y + (-x);
        -(u * u).scale(0.5 / (sigma * sigma))
    });
    let on_diag: Vec<(f64, f64)> = batch.iter().map(|&(x, _)| (x, x)).collect();
    let s = draw_samples(&e, &on_diag, &dsm, &mut stream(&[2]))?;
    out.push(("dsm matched-score stub".into(), loss_value_with(&e, &on_diag, &dsm, &s)?.total, 0.0));

    let mcmc = MethodConfig::default_for("ml-mcmc")?.with_num_samples(m.min(64));
    let e = FnEnergy::new(|_, _y: Jet2| Jet2::constant(-3.0));
    let s = draw_samples(&e, &batch, &mcmc, &mut stream(&[3]))?;
    out.push(("ml-mcmc constant model".into(), loss_value_with(&e, &batch, &mcmc, &s)?.total, 0.0));

    let e = FnEnergy::new(|_, y: Jet2| -(y * y).scale(0.5));
    let targets: Vec<(f64, f64)> = [-1.5, -0.2, 0.0, 0.9, 2.0].iter().map(|&y| (0.0, y)).collect();
    let empty = Samples { examples: vec![ExampleDraw::default(); targets.len()] };
    let l = loss_value_with(&e, &targets, &MethodConfig::Sm, &empty)?;
    for (&(_, y), got) in targets.iter().zip(&l.per_example) {
        out.push((format!("sm quadratic at y={y}"), *got, -1.0 + 0.5 * y * y));
    }
    Ok(out)
}

pub fn check_closed_forms(m: usize) -> Result<Check> {
    let rows = closed_form_losses(m)?;
    let ok = rows.iter().all(|(n, got, want)| {
        let tol = if n.starts_with("nce") { 1e-10 } else { 1e-12 };
        (got - want).abs() < tol
    });
    let worst = rows.iter().map(|(_, g, w)| (g - w).abs()).fold(0.0, f64::max);
    Ok(Check::new(
        format!("closed-form losses (M = {m})"),
        ok,
        format!("{} identities, worst deviation {worst:.1e}", rows.len()),
    ))
}

/// `(shifted-Gaussian KL, self KL, min KL over random pairs)`.
pub fn kl_oracles(pairs: usize) -> Result<(f64, f64, f64)> {
    let g = GridSpec { nx: 2, ny: 4096, lo: -6.0, hi: 6.0 };
    let gauss = |mu: f64| {
        GridDensity::from_columns(g, move |_, ys, c| {
            for (v, &y) in c.iter_mut().zip(ys) {
                *v = normal_logpdf(y, mu, 1.0);
            }
        })
    };
    let (p, q) = (gauss(0.0)?, gauss(0.1)?);
    let shifted = kl_grid(&p, &q)?.value;
    let own = kl_grid(&p, &p)?.value;
    let small = GridSpec { nx: 4, ny: 128, lo: -3.0, hi: 3.0 };
    let mut rng = stream(&[0x61]);
    let mut min = f64::INFINITY;
    for _ in 0..pairs {
        let tables: Vec<Vec<f64>> =
            (0..2).map(|_| (0..4 * 128).map(|_| rng.random_range(-6.0..6.0)).collect()).collect();
        let dens: Vec<GridDensity> = tables
            .into_iter()
            .map(|t| {
                GridDensity::from_columns(small, move |x, _, c| {
                    let j = ((x + 3.0) / 1.5) as usize;
                    c.copy_from_slice(&t[j * 128..(j + 1) * 128]);
                })
            })
            .collect::<Result<_>>()?;
        min = min.min(kl_grid(&dens[0], &dens[1])?.value);
    }
    Ok((shifted, own, min))
}

pub fn check_kl(pairs: usize) -> Result<Check> {
    let (shifted, own, min) = kl_oracles(pairs)?;
    let ok = (shifted - 0.005).abs() < 1e-4 && own == 0.0 && min >= -1e-12;
    Ok(Check::new(
        "grid KL oracles",
        ok,
        format!("N(0,1)||N(0.1,1) = {shifted:.6}, self = {own}, min over {pairs} random pairs = {min:.3e}"),
    ))
}

/// Variance of all states visited by `chains` Langevin chains of `steps`
/// steps on `f = −y²/2`, started at 0.
pub fn langevin_variance(chains: usize, steps: usize, alpha: f64, seed: u64) -> Result<f64> {
    let e = FnEnergy::new(|_, y: Jet2| -(y * y).scale(0.5));
    let mut rng = stream(&[seed]);
    // chunks keep the visited-state buffer small
    let mut ys = vec![0.0; chains];
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
    let chunk = 10_000;
    let mut done = 0;
    while done < steps {
        let len = chunk.min(steps - done);
        let mut all = Vec::with_capacity(len * chains);
        for y in ys.iter_mut() {
            let mut part = langevin_trajectory(&e, 0.0, *y, 1, len, alpha, &mut rng)?;
            *y = *part.last().expect("len ≥ 1");
            all.append(&mut part);
        }
        for v in all {
            sum += v;
            sq += v * v;
            n += 1;
        }
        done += len;
    }
    let mean = sum / n as f64;
    Ok(sq / n as f64 - mean * mean)
}

/// Stationary variance of the discretized chain on `f = −y²/2`.
pub fn langevin_discrete_variance(alpha: f64) -> f64 {
    1.0 / (1.0 - alpha * alpha / 4.0)
}

pub fn check_langevin(chains: usize, steps: usize) -> Result<Check> {
    let alpha = 0.05;
    let var = langevin_variance(chains, steps, alpha, 0x1a9)?;
    let ok = (var - 1.0).abs() < 0.05;
    Ok(Check::new(
        format!("Langevin stationarity ({chains} chains x {steps} steps)"),
        ok,
        format!("variance {var:.4}, discretized-chain value {:.6}", langevin_discrete_variance(alpha)),
    ))
}

/// `(|y* − 2|, number of random stubs with non-monotone accepted values)`.
pub fn predictor_contract(stubs: usize) -> Result<(f64, usize)> {
    let quad = FnEnergy::new(|_, y: Jet2| {
        let d = y + (-2.0);
        -(d * d)
    });
    let cfg = PredictorConfig { iterations: 50, lambda: 0.25, eta: 0.5 };
    let err = (predict(&quad, 0.0, 0.0, &cfg)? - 2.0).abs();
    let mut rng = stream(&[0x9e]);
    let mut bad = 0;
    for _ in 0..stubs {
        let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..4.0));
        let c: f64 = rng.random_range(0.05..1.0);
        let e = FnEnergy::new(move |_, y: Jet2| {
            (0..3).fold(-(y * y).scale(c), |acc, k| acc + y.scale(b[k]).sin().scale(a[k]))
        });
        let cfg = PredictorConfig {
            iterations: rng.random_range(1..40),
            lambda: rng.random_range(0.01..2.0),
            eta: rng.random_range(0.1..0.9),
        };
        let t = predict_trace(&e, 0.0, rng.random_range(-3.0..3.0), &cfg)?;
        if t.accepted_values.windows(2).any(|w| w[1] < w[0]) {
            bad += 1;
        }
    }
    Ok((err, bad))
}

pub fn check_predictor(stubs: usize) -> Result<Check> {
    let (err, bad) = predictor_contract(stubs)?;
    Ok(Check::new(
        "predictor contract",
        err < 1e-6 && bad == 0,
        format!("|y* - 2| = {err:.1e} after 50 iterations, {bad} of {stubs} random stubs non-monotone"),
    ))
}

/// The quick invariant suite.
pub fn selfcheck() -> Result<Vec<Check>> {
    Ok(vec![
        check_gradients(2, 4, 4)?,
        check_closed_forms(1024)?,
        check_kl(20)?,
        check_langevin(4, 250_000)?,
        check_predictor(200)?,
    ])
}
