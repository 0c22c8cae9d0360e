//! Writes PGM heatmaps of both true conditional densities.
//!
//! ```text
//! cargo run --release --example heatmap -- [out_dir]
//! ```

use ebm_regress::data::{Dataset, Dataset2Truth};
use ebm_regress::evaluation::{grid_density_truth, GridSpec};

fn main() -> ebm_regress::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let grid = GridSpec { nx: 512, ny: 512, ..GridSpec::default() };
    for ds in [Dataset::ds1(), Dataset::ds2()] {
        let d = grid_density_truth(&ds, grid)?;
        let path = out.join(format!("{}_truth.pgm", ds.name()));
        std::fs::write(&path, d.to_pgm(2)?)?;
        println!("wrote {}", path.display());
        if let Dataset::Ds2(_) = ds {
            let worst = (0..grid.nx)
                .map(|j| ((grid.y(d.column_argmax(j)) - Dataset2Truth::mean(grid.x(j))) / grid.dy()).abs())
                .fold(0.0, f64::max);
            println!("ds2 ridge: column argmax within {worst:.2} cells of the true mean");
        }
    }
    Ok(())
}
