//! Prediction refinement by gradient ascent on `f(x, ·)`.

use ebm_regress::autodiff::Jet2;
use ebm_regress::evaluation::{predict_trace, PredictorConfig};
use ebm_regress::model::FnEnergy;

fn main() -> ebm_regress::Result<()> {
    let f = FnEnergy::new(|_x, y: Jet2| (y - Jet2::constant(2.0)).square().scale(-1.0));
    let cfg = PredictorConfig::default();
    let t = predict_trace(&f, 0.0, -1.0, &cfg)?;
    println!("default T={} lambda={} eta={}: y = {:.6}", cfg.iterations, cfg.lambda, cfg.eta, t.y);
    println!("accepted f values: {:?}", t.accepted_values);

    for lambda in [0.1, 0.25] {
        let long = PredictorConfig { iterations: 50, lambda, ..cfg };
        let t = predict_trace(&f, 0.0, -1.0, &long)?;
        println!("T=50 lambda={lambda}: y = {:.9}, |y - 2| = {:.2e}", t.y, (t.y - 2.0).abs());
    }
    Ok(())
}
