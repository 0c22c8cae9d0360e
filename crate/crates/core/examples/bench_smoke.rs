//! Runs the smoke experiment (every method, tiny budget) and prints the
//! summary table. Re-running into the same directory reuses finished runs.
//!
//! ```text
//! cargo run --release --example bench_smoke -- [out_dir]
//! ```

use ebm_regress::bench::{run_bench, BenchOptions, ExperimentSpec};

fn main() -> ebm_regress::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ebm-bench-smoke"));
    let spec = ExperimentSpec::smoke();
    let table = run_bench(&spec, &BenchOptions { out_dir: out.clone(), threads: None, quiet: false })?;
    print!("{}", table.summary_markdown(&spec.name));
    println!("\nresults.csv, timing.csv and per-run records under {}", out.display());
    Ok(())
}
