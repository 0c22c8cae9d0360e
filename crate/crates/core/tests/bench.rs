use std::time::SystemTime;

use ebm_regress::bench::{run_bench, BenchOptions, BenchPaths, ExperimentSpec, ResultTable};

fn opts(dir: &std::path::Path) -> BenchOptions {
    BenchOptions { out_dir: dir.to_path_buf(), threads: Some(2), quiet: true }
}

fn mtime(p: &std::path::Path) -> SystemTime {
    std::fs::metadata(p).unwrap().modified().unwrap()
}

#[test]
fn smoke_bench_is_deterministic_and_resumable() {
    let spec = ExperimentSpec::smoke();
    let dir = tempfile::tempdir().unwrap();
    let paths = BenchPaths { root: dir.path().to_path_buf() };
    let table = run_bench(&spec, &opts(dir.path())).unwrap();
    let csv = std::fs::read_to_string(paths.results_csv()).unwrap();
    assert_eq!(table.rows.len(), spec.cells().len());
    assert_eq!(ResultTable::from_csv(&csv).unwrap().to_csv(), csv);
    assert!(std::fs::read_to_string(paths.summary_md()).unwrap().contains("NCE+"));
    assert!(std::fs::read_to_string(paths.timing_csv()).unwrap().lines().count() > spec.cells().len());

    let cells = spec.cells();
    let (gone, kept) = (&cells[2], &cells[0]);
    let kept_rec = paths.run_record(&kept.id, 0);
    let before = mtime(&kept_rec);
    std::fs::remove_dir_all(dir.path().join("runs").join(&gone.id)).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));

    run_bench(&spec, &opts(dir.path())).unwrap();
    assert_eq!(std::fs::read_to_string(paths.results_csv()).unwrap(), csv);
    assert_eq!(mtime(&kept_rec), before);
    assert!(paths.run_record(&gone.id, 0).exists());

    // a different worker count still gives the same bytes
    let other = tempfile::tempdir().unwrap();
    run_bench(&spec, &BenchOptions { out_dir: other.path().to_path_buf(), threads: Some(1), quiet: true }).unwrap();
    assert_eq!(std::fs::read_to_string(other.path().join("results.csv")).unwrap(), csv);
}

#[test]
fn stale_records_are_recomputed() {
    let mut spec = ExperimentSpec::smoke();
    spec.methods.truncate(1);
    spec.runs_per_cell = 2;
    spec.best_k = 1;
    let dir = tempfile::tempdir().unwrap();
    let paths = BenchPaths { root: dir.path().to_path_buf() };
    run_bench(&spec, &opts(dir.path())).unwrap();
    let rec = paths.run_record(&spec.cells()[0].id, 1);
    let original = std::fs::read_to_string(&rec).unwrap();

    spec.train.epochs += 1;
    run_bench(&spec, &opts(dir.path())).unwrap();
    let updated = std::fs::read_to_string(&rec).unwrap();
    assert_ne!(original, updated);
    let v: serde_json::Value = serde_json::from_str(&updated).unwrap();
    assert_eq!(v["loss_curve"].as_array().unwrap().len(), spec.train.epochs);
}

#[test]
fn beta_zero_runs_as_plain_nce() {
    let mut spec = ExperimentSpec::beta();
    spec.beta_sweep = vec![0.0, 0.1];
    spec.methods = spec.methods.into_iter().map(|m| m.with_num_samples(4)).collect();
    spec.n_train = 40;
    spec.runs_per_cell = 1;
    spec.best_k = 1;
    spec.train.epochs = 1;
    spec.grid.nx = 32;
    spec.grid.ny = 32;
    let dir = tempfile::tempdir().unwrap();
    let table = run_bench(&spec, &opts(dir.path())).unwrap();
    let methods: Vec<&str> = table.rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, ["nce", "nce+"]);

    let mut nce = spec.clone();
    nce.methods = vec![ebm_regress::methods::MethodConfig::default_for("nce").unwrap().with_num_samples(4)];
    nce.beta_sweep.clear();
    let d2 = tempfile::tempdir().unwrap();
    let plain = run_bench(&nce, &opts(d2.path())).unwrap();
    assert_eq!(plain.rows[0].values, table.rows[0].values);
}
