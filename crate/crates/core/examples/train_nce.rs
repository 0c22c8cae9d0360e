//! Trains one model with NCE on Dataset 2 and scores it on a coarse grid.
//!
//! ```text
//! cargo run --release --example train_nce -- [method] [epochs] [M]
//! ```

use ebm_regress::data::Dataset;
use ebm_regress::evaluation::{grid_density_model, grid_density_truth, kl_grid, GridSpec};
use ebm_regress::methods::MethodConfig;
use ebm_regress::model::{EbmModel, MlpSpec};
use ebm_regress::trainer::{train_observed, TrainConfig};

fn main() -> ebm_regress::Result<()> {
    let mut args = std::env::args().skip(1);
    let method = args.next().unwrap_or_else(|| "nce".into());
    let epochs: usize = args.next().map_or(3, |s| s.parse().expect("epochs"));
    let m: usize = args.next().map_or(64, |s| s.parse().expect("M"));

    let ds = Dataset::ds2();
    let data = ds.generate(2000, 0)?;
    let mut cfg = MethodConfig::default_for(&method)?;
    if cfg.num_samples().is_some() {
        cfg = cfg.with_num_samples(m);
    }
    let train_cfg = TrainConfig { epochs, seed: 1, ..Default::default() };
    let model = EbmModel::init(MlpSpec::default(), 7)?;
    let out = train_observed(model, &data, &cfg, &train_cfg, &mut |e, loss, secs| {
        println!("epoch {:>3}  loss {loss:>10.5}  {secs:.2}s", e + 1);
    })?;
    if let Some(f) = &out.record.failure {
        println!("training stopped: {}", f.message);
        return Ok(());
    }

    let grid = GridSpec { nx: 256, ny: 256, ..GridSpec::default() };
    let kl = kl_grid(&grid_density_truth(&ds, grid)?, &grid_density_model(&out.model, grid)?)?;
    println!("{}: D_KL on a 256x256 grid = {:.4}", cfg.label(), kl.value);
    Ok(())
}
