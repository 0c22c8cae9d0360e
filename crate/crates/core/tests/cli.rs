use std::path::Path;
use std::process::{Command, Output};

use ebm_regress::data::{Dataset, RegressionSet};
use ebm_regress::evaluation::{grid_density_model, grid_density_truth, kl_grid, GridSpec};
use ebm_regress::model::{load_checkpoint, save_checkpoint, EbmModel, MlpSpec};
use ebm_regress::trainer::RunRecord;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebm-bench")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bin(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_reproducible_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = ok(&["gen-data", "--dataset", "ds2", "--n", "2000", "--seed", "7", "--out", s(&a)]);
    assert!(out.contains("2000 rows"), "{out}");
    ok(&["gen-data", "--dataset", "ds2", "--n", "2000", "--seed", "7", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let set = RegressionSet::read_csv(&a).unwrap();
    assert_eq!(set.len(), 2000);
    assert_eq!(set.pairs, Dataset::ds2().generate(2000, 7).unwrap().pairs);

    assert_eq!(code(&["gen-data", "--dataset", "ds2", "--n", "0", "--out", s(&a)]), 2);
    assert_eq!(code(&["gen-data", "--dataset", "ds9", "--out", s(&a)]), 2);
    assert_eq!(code(&["gen-data", "--dataset", "ds1", "--ds1-stds", "0.3,-1", "--out", s(&a)]), 2);
    ok(&["gen-data", "--dataset", "ds1", "--ds1-means", "-0.5,0.5", "--n", "10", "--out", s(&a)]);
}

#[test]
fn train_eval_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let prefix = dir.path().join("m");
    ok(&["gen-data", "--dataset", "ds2", "--n", "300", "--seed", "1", "--out", s(&data)]);
    ok(&[
        "train",
        "--method",
        "nce+",
        "--beta",
        "0.025",
        "--M",
        "16",
        "--epochs",
        "2",
        "--data",
        s(&data),
        "--seed",
        "3",
        "--out",
        s(&prefix),
        "--quiet",
    ]);
    let ckpt = dir.path().join("m.ebm.json");
    let model = load_checkpoint(&std::fs::read(&ckpt).unwrap()).unwrap();
    let meta = model.meta.as_ref().unwrap();
    assert_eq!(meta.method, "nce+");
    assert_eq!(meta.hyperparameters["beta"], 0.025);
    assert_eq!(meta.epochs, 2);
    let rec: RunRecord = serde_json::from_slice(&std::fs::read(dir.path().join("m.run.json")).unwrap()).unwrap();
    assert_eq!(rec.loss_curve.len(), 2);
    assert!(!rec.failed());

    let json = dir.path().join("kl.json");
    let first = ok(&["eval", "--checkpoint", s(&ckpt), "--dataset", "ds2", "--grid", "128", "--out", s(&json)]);
    let second = ok(&["eval", "--checkpoint", s(&ckpt), "--dataset", "ds2", "--grid", "128"]);
    assert_eq!(first, second);
    let g = GridSpec { nx: 128, ny: 128, ..GridSpec::default() };
    let want =
        kl_grid(&grid_density_truth(&Dataset::ds2(), g).unwrap(), &grid_density_model(&model, g).unwrap()).unwrap();
    assert_eq!(first.trim(), format!("D_KL = {:.6}", want.value));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["kl"].as_f64().unwrap(), want.value);

    let p1 = dir.path().join("a.pgm");
    let p2 = dir.path().join("b.pgm");
    ok(&["plot", "heatmap", "--checkpoint", s(&ckpt), "--grid", "128", "--downsample", "2", "--out", s(&p1)]);
    ok(&["plot", "heatmap", "--checkpoint", s(&ckpt), "--grid", "128", "--downsample", "2", "--out", s(&p2)]);
    let img = std::fs::read(&p1).unwrap();
    assert_eq!(img, std::fs::read(&p2).unwrap());
    assert!(img.starts_with(b"P5\n64 64\n255\n"));

    let y = ok(&["predict", "--checkpoint", s(&ckpt), "--x", "-0.5", "--y-hat", "0.1"]);
    assert!(y.trim().parse::<f64>().unwrap().is_finite());
}

#[test]
fn eval_of_zero_model_matches_uniform_reference() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("zero.ebm.json");
    std::fs::write(&ckpt, save_checkpoint(&EbmModel::zeroed(MlpSpec::default()).unwrap())).unwrap();
    let out = ok(&["eval", "--checkpoint", s(&ckpt), "--dataset", "ds2", "--grid", "256"]);
    // Σ_k p_k log(p_k · n_y) per column, averaged over columns
    let g = GridSpec { nx: 256, ny: 256, ..GridSpec::default() };
    let mut total = 0.0;
    for j in 0..g.nx {
        let x = g.x(j);
        let lp: Vec<f64> = (0..g.ny).map(|k| Dataset::ds2().true_logpdf(x, g.y(k))).collect();
        let mx = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lp.iter().map(|l| (l - mx).exp()).sum();
        total += lp
            .iter()
            .map(|l| {
                let p = (l - mx).exp() / z;
                if p > 0.0 {
                    p * (p * g.ny as f64).ln()
                } else {
                    0.0
                }
            })
            .sum::<f64>();
    }
    let want = total / g.nx as f64;
    let got: f64 = out.trim().trim_start_matches("D_KL = ").parse().unwrap();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");

    let self_test = ok(&["eval", "--self-test", "--dataset", "ds1", "--grid", "64"]);
    assert_eq!(self_test.trim(), "D_KL = 0.000000");
}

#[test]
fn truth_heatmap_follows_the_sine_ridge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.pgm");
    ok(&["plot", "heatmap", "--truth", "ds2", "--grid", "256", "--downsample", "1", "--out", s(&out)]);
    let img = std::fs::read(&out).unwrap();
    let header = b"P5\n256 256\n255\n";
    assert!(img.starts_with(header));
    let px = &img[header.len()..];
    let g = GridSpec { nx: 256, ny: 256, ..GridSpec::default() };
    for j in 0..256 {
        // rows run top to bottom, so row r holds y index 255 - r
        let r = (0..256).max_by_key(|&r| px[r * 256 + j]).unwrap();
        let k = 255 - r;
        let want = (g.x(j).sin() - g.lo) / g.dy() - 0.5;
        assert!((k as f64 - want).abs() <= 2.0, "column {j}: {k} vs {want}");
    }
}

#[test]
fn zero_model_heatmap_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("zero.ebm.json");
    let out = dir.path().join("z.pgm");
    std::fs::write(&ckpt, save_checkpoint(&EbmModel::zeroed(MlpSpec::default()).unwrap())).unwrap();
    ok(&["plot", "heatmap", "--checkpoint", s(&ckpt), "--grid", "64", "--downsample", "1", "--out", s(&out)]);
    let img = std::fs::read(&out).unwrap();
    let px = &img[b"P5\n64 64\n255\n".len()..];
    assert_eq!(px.len(), 64 * 64);
    assert!(px.iter().all(|&p| p == px[0]));
}

#[test]
fn diverging_run_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let prefix = dir.path().join("bad");
    ok(&["gen-data", "--dataset", "ds2", "--n", "64", "--out", s(&data)]);
    let out = ok(&[
        "train",
        "--method",
        "ml-is",
        "--M",
        "1",
        "--lr",
        "1e200",
        "--epochs",
        "3",
        "--data",
        s(&data),
        "--out",
        s(&prefix),
        "--quiet",
    ]);
    assert!(out.contains("run failed"), "{out}");
    let rec: RunRecord = serde_json::from_slice(&std::fs::read(dir.path().join("bad.run.json")).unwrap()).unwrap();
    assert!(rec.failed());
    assert!(rec.loss_curve.len() < 3);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ebm.json");
    assert_eq!(code(&["eval", "--checkpoint", s(&missing), "--dataset", "ds2"]), 2);
    assert_eq!(code(&["plot", "heatmap", "--checkpoint", s(&missing), "--out", "x.pgm"]), 2);
    assert_eq!(code(&["train", "--method", "nce", "--data", s(&missing), "--out", "x"]), 2);
    assert_eq!(code(&["train", "--method", "magic", "--data", s(&missing), "--out", "x"]), 2);
    assert_eq!(code(&["bench", "--preset", "table9"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);

    let garbage = dir.path().join("g.ebm.json");
    std::fs::write(&garbage, "{not json").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", s(&garbage), "--dataset", "ds2"]), 2);

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"schema_version": 1, "mystery": true}"#).unwrap();
    assert_eq!(code(&["bench", "--spec", s(&spec)]), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_ebm-bench"))
        .args(["bench", "--preset", "smoke", "--out", s(&dir.path().join("b"))])
        .env("EBM_BENCH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selfcheck_passes() {
    let out = ok(&["selfcheck"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{out}");
}
