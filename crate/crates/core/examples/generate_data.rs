//! Samples both synthetic datasets and writes them as CSV.
//!
//! ```text
//! cargo run --release --example generate_data -- [out_dir] [n] [seed]
//! ```

use ebm_regress::data::{Dataset, Dataset2Truth};

fn main() -> ebm_regress::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let n: usize = args.next().map_or(2000, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    for ds in [Dataset::ds1(), Dataset::ds2()] {
        let set = ds.generate(n, seed)?;
        let path = out.join(format!("{}.csv", ds.name()));
        set.write_csv(&path)?;
        let mean_y = set.pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        println!("{}: {} pairs, mean y {mean_y:+.4}, wrote {}", ds.name(), set.len(), path.display());
    }

    // residuals of ds2 around its conditional mean should look standard normal
    let set = Dataset::ds2().generate(n, seed)?;
    let z: Vec<f64> = set.pairs.iter().map(|&(x, y)| (y - Dataset2Truth::mean(x)) / Dataset2Truth::std(x)).collect();
    let m = z.iter().sum::<f64>() / n as f64;
    let v = z.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / n as f64;
    println!("ds2 standardized residuals: mean {m:+.4}, variance {v:.4}");
    Ok(())
}
