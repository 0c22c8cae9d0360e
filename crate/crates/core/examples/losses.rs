//! Evaluates all seven training losses on one batch with shared samples
//! and prints each value and gradient norm.

use ebm_regress::data::Dataset;
use ebm_regress::methods::{draw_samples, loss_and_grad_with, MethodConfig};
use ebm_regress::model::{EbmModel, MlpSpec};
use ebm_regress::rng::stream;

fn main() -> ebm_regress::Result<()> {
    let data = Dataset::ds2().generate(16, 3)?;
    let model = EbmModel::init(MlpSpec::default(), 11)?;
    println!("{:<12} {:>12} {:>12}", "method", "loss", "|grad|");
    for name in ["ml-is", "kld-is", "ml-mcmc", "nce", "nce+", "sm", "dsm"] {
        let mut cfg = MethodConfig::default_for(name)?;
        if cfg.num_samples().is_some() {
            cfg = cfg.with_num_samples(128);
        }
        let samples = draw_samples(&model, &data.pairs, &cfg, &mut stream(&[5]))?;
        let (loss, grad) = loss_and_grad_with(&model, &data.pairs, &cfg, &samples)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        println!("{:<12} {:>12.6} {:>12.6}", cfg.label(), loss.total, norm);
    }
    Ok(())
}
