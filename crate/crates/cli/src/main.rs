//! `rdmc` — compress small dense networks and verify the theory behind the
//! objectives.
//!
//! Every command is deterministic given its flag set (all randomness flows
//! from `--seed` through documented substreams) and every output CSV starts
//! with `#` comment lines echoing the effective configuration.
//!
//! Exit codes: 0 success, 2 usage, 3 domain/shape, 4 numeric,
//! 5 verification failure, 6 file I/O or parse.

mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdmc_core::importance::{compute_importance, ImportanceKind, IMPORTANCE_CSV_COLUMNS};
use rdmc_core::io::{
    csv_document, load_dataset, load_model, save_dataset, save_model, save_sidecar, write_csv,
    LabelSpec,
};
use rdmc_core::metrics::{
    compress_network, metric_row, sweep, CompressorKind, Strength, SweepGrid, SweepOptions,
    PLOT_CSV_COLUMNS, REPORT_CSV_COLUMNS,
};
use rdmc_core::net::{Dataset, FlatIndexer, Head, Network};
use rdmc_core::rd::{curve_csv_columns, curve_csv_row, rd_curve, LinearSource};
use rdmc_core::{synth, Error};

const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_VERIFY: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "rdmc", version, about = "Importance-weighted pruning and quantization with rate-distortion diagnostics")]
struct Cli {
    /// Cap rayon worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-weight importance scores and emit them as CSV.
    Importance(ImportanceArgs),
    /// Compress a model once; writes the compressed model and a report row.
    Compress(CompressArgs),
    /// Weighted water-filling rate-distortion curve for a diagonal source.
    RdCurve(RdCurveArgs),
    /// Run a verification suite; exits 5 when any check fails.
    Verify(VerifyArgs),
    /// Sweep compression strengths across objectives and tabulate metrics.
    Sweep(SweepArgs),
    /// Generate the bundled synthetic classifier and mixture dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Baseline,
    UnsupReg,
    UnsupCls,
    Grad,
    Hess,
    GradHess,
}

impl From<ObjectiveArg> for ImportanceKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Baseline => ImportanceKind::Baseline,
            ObjectiveArg::UnsupReg => ImportanceKind::UnsupRegression,
            ObjectiveArg::UnsupCls => ImportanceKind::UnsupClassification,
            ObjectiveArg::Grad => ImportanceKind::SupGradient,
            ObjectiveArg::Hess => ImportanceKind::SupHessian,
            ObjectiveArg::GradHess => ImportanceKind::SupGradHessian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompressorArg {
    Prune,
    Quant,
    QuantQuartic,
}

impl From<CompressorArg> for CompressorKind {
    fn from(c: CompressorArg) -> Self {
        match c {
            CompressorArg::Prune => CompressorKind::Prune,
            CompressorArg::Quant => CompressorKind::Quant,
            CompressorArg::QuantQuartic => CompressorKind::QuantQuartic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Linear,
    ReluPrune,
    ReluQuant,
    Hermite,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// The diag[3,2,1] worked-example source.
    Fig2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyPresetArg {
    /// The diag[3,2,1] source checks (selects the linear suite).
    Fig2,
    /// The m = 8 ReLU pruning instance family (selects relu-prune).
    Relu8,
}

#[derive(Args)]
struct ModelDataArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset file (CSV with header).
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column in the dataset CSV.
    #[arg(long)]
    labels: Option<String>,
    /// Override the model's softmax temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Exclude biases from the compressed parameter set.
    #[arg(long)]
    exclude_bias: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    md: ModelDataArgs,
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    /// Ridge added to Hessian-based scores.
    #[arg(long, default_value_t = 0.0)]
    hessian_ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    md: ModelDataArgs,
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    #[arg(long, value_enum)]
    compressor: CompressorArg,
    /// Keep ratio in [0, 1] (prune).
    #[arg(long)]
    ratio: Option<f64>,
    /// Cluster count (quant / quant-quartic).
    #[arg(long)]
    k: Option<usize>,
    /// k-means iteration cap.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0.0)]
    hessian_ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path for the compressed model (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Path for the one-row report CSV (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RdCurveArgs {
    /// Built-in source preset.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Per-coordinate prior variances (comma separated).
    #[arg(long, value_delimiter = ',')]
    sigma_w: Option<Vec<f64>>,
    /// Per-coordinate input second moments (comma separated).
    #[arg(long, value_delimiter = ',')]
    lambda_x: Option<Vec<f64>>,
    /// Ascending distortion grid; defaults to 50 points up to D_max.
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    /// Named instance family; a shorthand for the matching --suite.
    #[arg(long, value_enum)]
    preset: Option<VerifyPresetArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hermite truncation order.
    #[arg(long, default_value_t = 40)]
    pmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    md: ModelDataArgs,
    /// Objective kinds to compare (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    objective: Vec<ObjectiveArg>,
    #[arg(long, value_enum)]
    compressor: CompressorArg,
    /// Keep-ratio grid for prune sweeps.
    #[arg(long, value_delimiter = ',')]
    ratio_grid: Option<Vec<f64>>,
    /// Cluster-count grid for quant sweeps.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0.0)]
    hessian_ridge: f64,
    /// Sweep the Hessian ridge over these values (overrides --hessian-ridge).
    #[arg(long, value_delimiter = ',')]
    ridge_grid: Option<Vec<f64>>,
    /// Pool all layers into one mask/codebook instead of per-layer.
    #[arg(long)]
    global_pool: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Companion (x, y, series) plot data CSV.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_data: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Shape(_) | Error::Domain(_) => EXIT_DOMAIN,
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Parse(_) | Error::Io(_) => EXIT_IO,
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("usage error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn emit(out: &Option<PathBuf>, comments: &[String], columns: &str, rows: &[String]) -> Result<(), Error> {
    match out {
        Some(path) => write_csv(path, comments, columns, rows),
        None => {
            print!("{}", csv_document(comments, columns, rows));
            Ok(())
        }
    }
}

fn load_model_data(md: &ModelDataArgs) -> Result<(Network, Dataset, FlatIndexer), Error> {
    let mut net = load_model(&md.model)?;
    if let Some(t) = md.temperature {
        net.set_temperature(t)?;
    }
    let label = match (&md.labels, net.head()) {
        (Some(col), Head::Classification) => LabelSpec::Class(col),
        (Some(col), Head::Regression) => LabelSpec::Target(col),
        (None, _) => LabelSpec::None,
    };
    let data = load_dataset(&md.data, label)?;
    data.validate_for(&net, false)?;
    let idx = FlatIndexer::new(&net, !md.exclude_bias);
    Ok((net, data, idx))
}

fn config_comments(command: &str, fields: &[(&str, String)]) -> Vec<String> {
    let mut out = vec![format!("rdmc {} {command}", env!("CARGO_PKG_VERSION"))];
    for (k, v) in fields {
        out.push(format!("{k}: {v}"));
    }
    out
}

fn run_importance(args: &ImportanceArgs) -> Result<u8, Error> {
    let kind: ImportanceKind = args.objective.into();
    let (net, data, idx) = load_model_data(&args.md)?;
    let imp = compute_importance(kind, &net, &idx, &data, args.hessian_ridge)?;
    let comments = config_comments(
        "importance",
        &[
            ("model", args.md.model.display().to_string()),
            ("data", args.md.data.display().to_string()),
            ("objective", kind.name().to_string()),
            ("hessian_ridge", args.hessian_ridge.to_string()),
            ("temperature", net.temperature().to_string()),
            ("include_bias", (!args.md.exclude_bias).to_string()),
            ("seed", args.seed.to_string()),
        ],
    );
    emit(&args.out, &comments, IMPORTANCE_CSV_COLUMNS, &imp.csv_rows(&idx))?;
    Ok(0)
}

fn run_compress(args: &CompressArgs) -> Result<u8, Error> {
    let kind: ImportanceKind = args.objective.into();
    let compressor: CompressorKind = args.compressor.into();
    let strength = match compressor {
        CompressorKind::Prune => {
            let r = args
                .ratio
                .ok_or_else(|| Error::domain("prune requires --ratio"))?;
            Strength::KeepRatio(r)
        }
        _ => {
            let k = args.k.ok_or_else(|| Error::domain("quantization requires --k"))?;
            Strength::Clusters(k)
        }
    };
    let (net, data, idx) = load_model_data(&args.md)?;
    let imp = compute_importance(kind, &net, &idx, &data, args.hessian_ridge)?;
    let opts = SweepOptions {
        iters: args.iters,
        hessian_ridge: args.hessian_ridge,
        ..SweepOptions::default()
    };
    let outcome = compress_network(&net, &idx, &imp, compressor, strength, args.seed, &opts)?;
    save_model(&args.out, &outcome.net)?;
    let sidecar_path = args.out.with_extension("sidecar.json");
    save_sidecar(
        &sidecar_path,
        compressor.name(),
        !args.md.exclude_bias,
        &outcome.artifacts,
    )?;
    let param = match strength {
        Strength::KeepRatio(r) => r,
        Strength::Clusters(k) => k as f64,
    };
    let row = metric_row(
        &net,
        &outcome.net,
        &data,
        kind,
        compressor,
        param,
        outcome.ratio,
        args.hessian_ridge,
    )?;
    let comments = config_comments(
        "compress",
        &[
            ("model", args.md.model.display().to_string()),
            ("data", args.md.data.display().to_string()),
            ("objective", kind.name().to_string()),
            ("compressor", compressor.name().to_string()),
            ("param", param.to_string()),
            ("iters", args.iters.to_string()),
            ("hessian_ridge", args.hessian_ridge.to_string()),
            ("temperature", net.temperature().to_string()),
            ("include_bias", (!args.md.exclude_bias).to_string()),
            ("seed", args.seed.to_string()),
            ("compressed_model", args.out.display().to_string()),
        ],
    );
    emit(&args.report, &comments, REPORT_CSV_COLUMNS, &[row.csv_row()])?;
    Ok(0)
}

fn run_rd_curve(args: &RdCurveArgs) -> Result<u8, Error> {
    let src = match (&args.preset, &args.sigma_w, &args.lambda_x) {
        (Some(PresetArg::Fig2), None, None) => LinearSource::three_two_one(),
        (None, Some(s), Some(l)) => LinearSource::new(s.clone(), l.clone())?,
        _ => {
            return Err(Error::domain(
                "give either --preset or both --sigma-w and --lambda-x",
            ))
        }
    };
    let grid: Vec<f64> = match &args.d_grid {
        Some(g) => g.clone(),
        None => {
            let dmax = src.d_max();
            (1..=50).map(|i| dmax * (i as f64 / 50.0)).collect()
        }
    };
    let curve = rd_curve(&src, &grid)?;
    let rows: Vec<String> = curve.iter().map(curve_csv_row).collect();
    let comments = config_comments(
        "rd-curve",
        &[
            (
                "sigma_w",
                format!("{:?}", src.sigma_w()),
            ),
            ("lambda_x", format!("{:?}", src.lambda_x())),
            ("d_max", src.d_max().to_string()),
            ("seed", args.seed.to_string()),
        ],
    );
    emit(&args.out, &comments, &curve_csv_columns(src.dim()), &rows)?;
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let suite = match (args.suite, args.preset) {
        (Some(s), None) => s,
        (None, Some(VerifyPresetArg::Fig2)) => SuiteArg::Linear,
        (None, Some(VerifyPresetArg::Relu8)) => SuiteArg::ReluPrune,
        (Some(s), Some(p)) => {
            let implied = match p {
                VerifyPresetArg::Fig2 => SuiteArg::Linear,
                VerifyPresetArg::Relu8 => SuiteArg::ReluPrune,
            };
            if s != implied {
                return Err(Error::domain("--suite and --preset disagree"));
            }
            s
        }
        (None, None) => return Err(Error::domain("verify needs --suite or --preset")),
    };
    let outcome = suites::run_suite(suite, args.seed, args.pmax)?;
    let comments = config_comments(
        "verify",
        &[
            ("suite", format!("{suite:?}").to_lowercase()),
            ("seed", args.seed.to_string()),
            ("pmax", args.pmax.to_string()),
        ],
    );
    emit(&args.out, &comments, suites::SUITE_CSV_COLUMNS, &outcome.rows)?;
    for line in &outcome.summary_lines {
        eprintln!("{line}");
    }
    Ok(if outcome.all_passed { 0 } else { EXIT_VERIFY })
}

fn run_sweep(args: &SweepArgs) -> Result<u8, Error> {
    let compressor: CompressorKind = args.compressor.into();
    let grid = match (compressor, &args.ratio_grid, &args.k_grid) {
        (CompressorKind::Prune, Some(rs), None) => SweepGrid::Ratios(rs.clone()),
        (CompressorKind::Quant | CompressorKind::QuantQuartic, None, Some(ks)) => {
            SweepGrid::ClusterCounts(ks.clone())
        }
        _ => {
            return Err(Error::domain(
                "prune sweeps need --ratio-grid, quant sweeps need --k-grid",
            ))
        }
    };
    let objectives: Vec<ImportanceKind> = args.objective.iter().map(|&o| o.into()).collect();
    let (net, data, idx) = load_model_data(&args.md)?;
    let opts = SweepOptions {
        iters: args.iters,
        hessian_ridge: args.hessian_ridge,
        ridge_grid: args.ridge_grid.clone(),
        global_pool: args.global_pool,
        ..SweepOptions::default()
    };
    let report = sweep(&net, &idx, &data, &objectives, compressor, &grid, args.seed, &opts)?;
    let rows: Vec<String> = report.rows.iter().map(|r| r.csv_row()).collect();
    let comments = config_comments(
        "sweep",
        &[
            ("model", args.md.model.display().to_string()),
            ("data", args.md.data.display().to_string()),
            (
                "objectives",
                objectives.iter().map(|o| o.name()).collect::<Vec<_>>().join("+"),
            ),
            ("compressor", compressor.name().to_string()),
            (
                "grid",
                match &grid {
                    SweepGrid::Ratios(v) => format!("{v:?}"),
                    SweepGrid::ClusterCounts(v) => format!("{v:?}"),
                },
            ),
            ("iters", args.iters.to_string()),
            ("hessian_ridge", args.hessian_ridge.to_string()),
            (
                "ridge_grid",
                args.ridge_grid
                    .as_ref()
                    .map_or("none".to_string(), |g| format!("{g:?}")),
            ),
            ("temperature", net.temperature().to_string()),
            ("include_bias", (!args.md.exclude_bias).to_string()),
            ("global_pool", args.global_pool.to_string()),
            ("seed", args.seed.to_string()),
        ],
    );
    emit(&args.out, &comments, REPORT_CSV_COLUMNS, &rows)?;
    if let Some(plot) = &args.plot_out {
        write_csv(plot, &comments, PLOT_CSV_COLUMNS, &report.plot_csv_rows())?;
    }
    Ok(0)
}

fn run_synth(args: &SynthArgs) -> Result<u8, Error> {
    if args.samples == 0 {
        return Err(Error::domain("--samples must be at least 1"));
    }
    let net = synth::two_class_mlp(args.seed);
    let data = synth::gaussian_mixture(args.seed, args.samples)?;
    save_model(&args.out_model, &net)?;
    save_dataset(&args.out_data, &data)?;
    eprintln!(
        "wrote {} ({} parameters) and {} ({} samples)",
        args.out_model.display(),
        FlatIndexer::new(&net, true).len(),
        args.out_data.display(),
        data.len()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            return usage_error("--threads must be at least 1");
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    // flag combinations that are usage errors rather than domain errors
    match &cli.command {
        Command::Compress(a) => {
            if let Some(r) = a.ratio {
                if !(0.0..=1.0).contains(&r) {
                    return usage_error(&format!("--ratio {r} outside [0, 1]"));
                }
            }
            if matches!(a.compressor, CompressorArg::Prune) && a.ratio.is_none() {
                return usage_error("prune requires --ratio");
            }
            if !matches!(a.compressor, CompressorArg::Prune) && a.k.is_none() {
                return usage_error("quantization requires --k");
            }
            if needs_labels(a.objective) && a.md.labels.is_none() {
                return usage_error("this objective requires --labels");
            }
        }
        Command::Importance(a) => {
            if needs_labels(a.objective) && a.md.labels.is_none() {
                return usage_error("this objective requires --labels");
            }
        }
        Command::Verify(a) => {
            if a.suite.is_none() && a.preset.is_none() {
                return usage_error("verify needs --suite or --preset");
            }
        }
        Command::Sweep(a) => {
            if a.objective.iter().any(|&o| needs_labels(o)) && a.md.labels.is_none() {
                return usage_error("a requested objective requires --labels");
            }
            if let Some(rs) = &a.ratio_grid {
                if rs.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return usage_error("every --ratio-grid entry must lie in [0, 1]");
                }
            }
        }
        _ => {}
    }

    let result = match &cli.command {
        Command::Importance(a) => run_importance(a),
        Command::Compress(a) => run_compress(a),
        Command::RdCurve(a) => run_rd_curve(a),
        Command::Verify(a) => run_verify(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn needs_labels(o: ObjectiveArg) -> bool {
    ImportanceKind::from(o).needs_labels()
}
