//! End-to-end tests of the `rdmc` binary: exit codes, file outputs,
//! determinism, and the documented CSV shapes.

use std::path::Path;
use std::process::{Command, Output};

fn rdmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32, ctx: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{ctx}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_files(dir: &Path, seed: u64, samples: usize) -> (String, String) {
    let model = dir.join("model.json").display().to_string();
    let data = dir.join("data.csv").display().to_string();
    let out = rdmc(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--samples",
        &samples.to_string(),
        "--out-model",
        &model,
        "--out-data",
        &data,
    ]);
    assert_exit(&out, 0, "synth");
    (model, data)
}

#[test]
fn usage_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = synth_files(tmp.path(), 0, 16);

    // ratio outside [0, 1]
    let out = rdmc(&[
        "compress", "--model", &model, "--data", &data, "--objective", "baseline",
        "--compressor", "prune", "--ratio", "1.5", "--out",
        &tmp.path().join("c.json").display().to_string(),
    ]);
    assert_exit(&out, 2, "ratio 1.5");

    // prune without a ratio
    let out = rdmc(&[
        "compress", "--model", &model, "--data", &data, "--objective", "baseline",
        "--compressor", "prune", "--out",
        &tmp.path().join("c.json").display().to_string(),
    ]);
    assert_exit(&out, 2, "prune without ratio");

    // supervised objective without labels
    let out = rdmc(&[
        "importance", "--model", &model, "--data", &data, "--objective", "grad",
    ]);
    assert_exit(&out, 2, "grad without labels");

    // unknown suite (clap enum)
    let out = rdmc(&["verify", "--suite", "nonsense"]);
    assert_exit(&out, 2, "unknown suite");
}

#[test]
fn domain_errors_exit_with_code_three() {
    // distortion grid beyond D_max = 14
    let out = rdmc(&["rd-curve", "--preset", "fig2", "--d-grid", "3,20"]);
    assert_exit(&out, 3, "grid beyond D_max");
}

#[test]
fn io_errors_exit_with_code_six() {
    let out = rdmc(&[
        "importance", "--model", "/nonexistent/model.json", "--data", "/nonexistent/d.csv",
        "--objective", "baseline",
    ]);
    assert_exit(&out, 6, "missing model file");
}

#[test]
fn rd_curve_preset_reproduces_breakpoints() {
    let out = rdmc(&["rd-curve", "--preset", "fig2", "--d-grid", "0.6,3,9,14"]);
    assert_exit(&out, 0, "rd-curve");
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('D'))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    // columns: D, rate_bits, mu, D_1, D_2, D_3
    let ln6_bits = 6.0_f64.ln() / 2.0_f64.ln();
    assert!((rows[1][0] - 3.0).abs() < 1e-12);
    assert!((rows[1][1] - ln6_bits).abs() <= 1e-9, "rate {}", rows[1][1]);
    assert!((rows[1][2] - 1.0).abs() <= 1e-9, "mu {}", rows[1][2]);
    assert!((rows[2][2] - 4.0).abs() <= 1e-9, "mu {}", rows[2][2]);
    assert!((rows[2][4] - 2.0).abs() <= 1e-9, "level {}", rows[2][4]);
    assert_eq!(rows[3][1], 0.0, "rate at total fill");
    // single-coordinate source reduces to the scalar formula
    let out = rdmc(&[
        "rd-curve", "--sigma-w", "1.0", "--lambda-x", "1.0", "--d-grid", "0.25",
    ]);
    assert_exit(&out, 0, "scalar source");
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!((row[1] - 1.0).abs() <= 1e-12, "R(1, 0.25) = {} bits", row[1]);
}

#[test]
fn verify_hermite_suite_passes() {
    let out = rdmc(&["verify", "--suite", "hermite", "--seed", "3"]);
    assert_exit(&out, 0, "verify hermite");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("parseval_to_half"));
    assert!(!text.contains(",false"));
}

#[test]
fn importance_on_linear_toy_model_is_empirical_second_moment() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("lin.json");
    std::fs::write(
        &model,
        r#"{"layers":[{"weights":[[0.5,-1.0]],"bias":[0.0],"activation":"identity"}],
            "head":"regression","temperature":1.0}"#,
    )
    .unwrap();
    let data = tmp.path().join("d.csv");
    std::fs::write(&data, "x0,x1\n1.0,2.0\n3.0,-1.0\n").unwrap();
    let out = rdmc(&[
        "importance",
        "--model",
        &model.display().to_string(),
        "--data",
        &data.display().to_string(),
        "--objective",
        "unsup-reg",
        "--exclude-bias",
    ]);
    assert_exit(&out, 0, "importance");
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("global_index"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    // diag of the empirical second moment: mean(1, 9), mean(4, 1)
    assert_eq!(values, vec![5.0, 2.5]);
}

#[test]
fn compress_at_ratio_one_is_identity_and_k1_is_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = synth_files(tmp.path(), 1, 32);

    let out_model = tmp.path().join("full.json").display().to_string();
    let out = rdmc(&[
        "compress", "--model", &model, "--data", &data, "--labels", "label",
        "--objective", "baseline", "--compressor", "prune", "--ratio", "1.0",
        "--out", &out_model,
    ]);
    assert_exit(&out, 0, "compress ratio 1");
    assert_eq!(
        std::fs::read(&model).unwrap(),
        std::fs::read(&out_model).unwrap(),
        "keep-all pruning must reproduce the model file byte for byte"
    );
    let row = String::from_utf8(out.stdout).unwrap();
    let last = row.lines().last().unwrap();
    assert!(last.starts_with("baseline,prune,"));

    let out_model = tmp.path().join("k1.json").display().to_string();
    let out = rdmc(&[
        "compress", "--model", &model, "--data", &data, "--labels", "label",
        "--objective", "unsup-cls", "--compressor", "quant", "--k", "1",
        "--out", &out_model,
    ]);
    assert_exit(&out, 0, "compress k=1");
    let net = rdmc_core::io::load_model(&out_model).unwrap();
    for layer in net.layers() {
        let w0 = layer.weights()[0];
        assert!(layer.weights().iter().all(|&v| v == w0));
    }

    // sidecar document: one codebook per layer, every weight assigned
    let sidecar = std::fs::read_to_string(tmp.path().join("k1.sidecar.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(parsed["compressor"], "quant");
    let layers = parsed["layers"].as_array().unwrap();
    assert_eq!(layers.len(), net.layers().len());
    for (spec, layer) in layers.iter().zip(net.layers()) {
        assert_eq!(spec["kind"], "codebook");
        let assignments = spec["assignments"].as_array().unwrap();
        assert_eq!(
            assignments.len(),
            layer.weights().len() + layer.bias().len()
        );
    }
}

#[test]
fn sweep_output_is_deterministic_and_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = synth_files(tmp.path(), 2, 48);
    let out_a = tmp.path().join("a.csv").display().to_string();
    let out_b = tmp.path().join("b.csv").display().to_string();
    let plot = tmp.path().join("plot.csv").display().to_string();
    for out_path in [&out_a, &out_b] {
        let out = rdmc(&[
            "sweep", "--model", &model, "--data", &data, "--labels", "label",
            "--objective", "baseline,unsup-cls", "--compressor", "quant",
            "--k-grid", "2,4", "--seed", "9", "--iters", "25",
            "--out", out_path, "--plot-out", &plot,
        ]);
        assert_exit(&out, 0, "sweep");
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same seed must give identical bytes");
    let text = String::from_utf8(a).unwrap();
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("method"))
        .collect();
    assert_eq!(data_rows.len(), 4, "2 objectives x 2 grid points");
    assert!(text.lines().any(|l| l.starts_with("# seed: 9")));
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert!(plot_text.lines().next().unwrap().starts_with('#'));
    assert!(plot_text.contains("unsup-cls-quant-cross_entropy"));
}

#[test]
fn threads_flag_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let (model, data) = synth_files(tmp.path(), 3, 48);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_path = tmp
            .path()
            .join(format!("t{threads}.csv"))
            .display()
            .to_string();
        let out = rdmc(&[
            "--threads", threads, "sweep", "--model", &model, "--data", &data,
            "--labels", "label", "--objective", "baseline", "--compressor", "prune",
            "--ratio-grid", "0.1,0.5,1.0", "--seed", "4", "--out", &out_path,
        ]);
        assert_exit(&out, 0, "sweep with threads");
        outputs.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
