//! Grid KL divergence: Gaussian oracle and the untrained network against
//! the Dataset 2 truth.

use ebm_regress::data::{normal_logpdf, Dataset};
use ebm_regress::evaluation::{grid_density_model, grid_density_truth, kl_grid, GridDensity, GridSpec};
use ebm_regress::model::{EbmModel, MlpSpec};

fn gaussian(grid: GridSpec, mean: f64) -> ebm_regress::Result<GridDensity> {
    GridDensity::from_columns(grid, |_x, ys, col| {
        for (c, &y) in col.iter_mut().zip(ys) {
            *c = normal_logpdf(y, mean, 1.0);
        }
    })
}

fn main() -> ebm_regress::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(512, |s| s.parse().expect("grid size"));
    let grid = GridSpec { nx: n, ny: n, ..GridSpec::default() };
    let kl = kl_grid(&gaussian(grid, 0.0)?, &gaussian(grid, 0.1)?)?;
    println!("KL(N(0,1) || N(0.1,1)) on [-3,3]: {:.6} (untruncated 0.005)", kl.value);

    let truth = grid_density_truth(&Dataset::ds2(), grid)?;
    println!("truth vs itself: {}", kl_grid(&truth, &truth)?.value);
    let untrained = grid_density_model(&EbmModel::init(MlpSpec::default(), 0)?, grid)?;
    println!("untrained network vs ds2 truth: {:.4}", kl_grid(&truth, &untrained)?.value);
    let flat = grid_density_model(&EbmModel::zeroed(MlpSpec::default())?, grid)?;
    println!("flat density vs ds2 truth: {:.4}", kl_grid(&truth, &flat)?.value);
    Ok(())
}
