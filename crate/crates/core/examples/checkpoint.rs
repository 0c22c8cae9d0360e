//! Trains briefly, saves a checkpoint, reloads it and checks that both
//! models agree bit for bit.

use ebm_regress::data::Dataset;
use ebm_regress::methods::MethodConfig;
use ebm_regress::model::{load_checkpoint, save_checkpoint, EbmModel, Energy, MlpSpec};
use ebm_regress::trainer::{train, TrainConfig};

fn main() -> ebm_regress::Result<()> {
    let data = Dataset::ds2().generate(200, 0)?;
    let cfg = MethodConfig::default_for("dsm")?.with_num_samples(16);
    let out =
        train(EbmModel::init(MlpSpec::default(), 1)?, &data, &cfg, &TrainConfig { epochs: 2, ..Default::default() })?;
    let bytes = save_checkpoint(&out.model);
    let back = load_checkpoint(&bytes)?;
    let same = (0..50).all(|i| {
        let (x, y) = (-3.0 + 0.12 * i as f64, 1.5 - 0.06 * i as f64);
        out.model.value(x, y).to_bits() == back.value(x, y).to_bits()
    });
    println!(
        "{} bytes, {} parameters, trained with {:?}",
        bytes.len(),
        back.num_params(),
        back.meta.as_ref().map(|m| &m.method)
    );
    println!("reloaded model identical: {same}");
    Ok(())
}
