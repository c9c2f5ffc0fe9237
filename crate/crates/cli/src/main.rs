//! `qpoly`: verification suites, training runs, and analysis exports.
//!
//! Exit codes: 0 success, 1 verification failure, 2 data error,
//! 3 numerical abort, 64 usage error.

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use qpoly_core::activations::ActivationKind;
use qpoly_core::closedform::{chebyshev_nodes, chebyshev_project};
use qpoly_core::data::{
    load_split, read_idx, write_atomic, Checkpoint, DatasetId, IdxData,
};
use qpoly_core::nn::{self, CnnConfig, CnnModel, TrainOptions};
use qpoly_core::qcpn::{
    baseline_forward, gen_dataset, hybrid_forward, train_baseline, train_qcpn, BaselineNn,
    HybridQcpn, QcpnTrainOptions, RegressionSet, Target,
};
use qpoly_core::sim::run_qcpn_circuit;
use qpoly_core::verify;
use qpoly_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

const EXIT_OK: i32 = 0;
const EXIT_VERIFY_FAIL: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;
const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides the default dataset directory.
const DATA_DIR_ENV: &str = "QPOLY_DATA_DIR";

#[derive(Parser)]
#[command(name = "qpoly", version, about = "Quantum-inspired ML driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle-equivalence and identity suites.
    Verify(VerifyArgs),
    /// Train the quantum-activation CNN on an image dataset.
    TrainCnn(TrainCnnArgs),
    /// Train a Chebyshev-polynomial network on a function target.
    TrainQcpn(TrainQcpnArgs),
    /// Export feature maps and trained kernel parameters from a checkpoint.
    Features(FeaturesArgs),
    /// Project a random circuit onto the Chebyshev basis (degree bound).
    Project(ProjectArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: all, qc1, qc2, prop1, conjugation.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Largest register size for the closed-form suites.
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    /// Random draws per register size.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Tolerance override.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where the discrepancy report and manifest are written.
    #[arg(long, default_value = "out/verify")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainCnnArgs {
    #[arg(long, default_value = "mnist")]
    dataset: String,
    #[arg(long, default_value = "af3")]
    activation: String,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Training-set size.
    #[arg(long, default_value_t = 8000)]
    train: usize,
    /// Test-set size.
    #[arg(long, default_value_t = 2000)]
    test: usize,
    /// Dataset directory (overrides QPOLY_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "out/train-cnn")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainQcpnArgs {
    /// j0, j1, p5, p6, j0sum, j1sum, p5prod, p6prod.
    #[arg(long, default_value = "j0")]
    target: String,
    /// Units (combination terms) for one-input targets.
    #[arg(long, default_value_t = 2)]
    units: usize,
    /// Chebyshev order K of every unit.
    #[arg(long, default_value_t = 12)]
    order: usize,
    /// Product terms for two-input targets.
    #[arg(long, default_value_t = 10)]
    terms: usize,
    #[arg(long, default_value_t = 3000)]
    epochs: usize,
    /// Minibatch size; 0 trains full-batch.
    #[arg(long, default_value_t = 0)]
    batch: usize,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    train: usize,
    #[arg(long, default_value_t = 1000)]
    test: usize,
    /// Sampling domain lower bound (defaults to the target's own).
    #[arg(long)]
    domain_lo: Option<f64>,
    /// Sampling domain upper bound.
    #[arg(long)]
    domain_hi: Option<f64>,
    /// Also train the matched-budget tanh baseline.
    #[arg(long, default_value_t = false)]
    baseline: bool,
    /// Baseline hidden width.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value = "out/train-qcpn")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Checkpoint file written by train-cnn.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Index into the source dataset's train corpus.
    #[arg(long, default_value_t = 0)]
    image_index: usize,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "out/features")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    /// Register size, 3..=8.
    #[arg(long, default_value_t = 4)]
    qubits: usize,
    /// Chebyshev nodes to sample (0 = automatic).
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/project")]
    out_dir: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Verify(a) => run_with_manifest("verify", &a.out_dir, |m| cmd_verify(&a, m)),
        Command::TrainCnn(a) => {
            run_with_manifest("train-cnn", &a.out_dir, |m| cmd_train_cnn(&a, m))
        }
        Command::TrainQcpn(a) => {
            run_with_manifest("train-qcpn", &a.out_dir, |m| cmd_train_qcpn(&a, m))
        }
        Command::Features(a) => {
            run_with_manifest("features", &a.out_dir, |m| cmd_features(&a, m))
        }
        Command::Project(a) => run_with_manifest("project", &a.out_dir, |m| cmd_project(&a, m)),
    };
    std::process::exit(code);
}

/// Accumulates the resolved configuration and is flushed atomically as
/// `manifest.txt` when the command finishes.
struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run_with_manifest(
    command: &str,
    out_dir: &Path,
    f: impl FnOnce(&mut Manifest) -> i32,
) -> i32 {
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_DATA;
    }
    let mut manifest = Manifest { lines: Vec::new() };
    manifest.push("command", command);
    manifest.push("out_dir", out_dir.display());
    manifest.push("start_unix", now_secs());
    let code = f(&mut manifest);
    manifest.push("end_unix", now_secs());
    manifest.push("exit_status", code);
    let mut text = String::new();
    for (k, v) in &manifest.lines {
        let _ = writeln!(text, "{k} = {v}");
    }
    if let Err(e) = write_atomic(&out_dir.join("manifest.txt"), &text) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_DATA;
    }
    code
}

/// Map library errors onto the documented exit codes.
fn code_for(e: &CoreError) -> i32 {
    match e {
        CoreError::Io { .. } | CoreError::Format(_) | CoreError::Parse { .. } => EXIT_DATA,
        CoreError::Size(_) => EXIT_DATA,
        CoreError::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_VERIFY_FAIL,
    }
}

fn fail(e: &CoreError) -> i32 {
    eprintln!("error: {e}");
    code_for(e)
}

fn resolve_data_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_DATA
    })
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(args: &VerifyArgs, manifest: &mut Manifest) -> i32 {
    manifest.push("suite", &args.suite);
    manifest.push("max_n", args.max_n);
    manifest.push("draws", args.draws);
    manifest.push("tol", args.tol);
    manifest.push("seed", args.seed);

    let opts = verify::VerifyOptions {
        qc1_max_n: args.max_n,
        qc2_max_n: args.max_n,
        recursion_max_n: args.max_n.min(10),
        equivalence_draws: args.draws,
        recursion_draws: args.draws.div_ceil(2),
        tol: args.tol,
        seed: args.seed,
    };
    let wanted: &[&str] = match args.suite.as_str() {
        "all" => &["qc1-closed-form", "qc2-closed-form", "prop1-recursion", "x3-conjugation"],
        "qc1" => &["qc1-closed-form"],
        "qc2" => &["qc2-closed-form"],
        "prop1" => &["prop1-recursion"],
        "conjugation" => &["x3-conjugation"],
        other => {
            eprintln!("error: unknown suite {other:?}");
            return EXIT_USAGE;
        }
    };
    let results = match verify::run_all(&opts) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let mut all_pass = true;
    println!("{:<18} {:>8} {:>7} {:>13} {:>9}  status", "suite", "n-range", "draws", "max-dev", "tol");
    for r in results.iter().filter(|r| wanted.contains(&r.name)) {
        let status = if r.pass() { "pass" } else { "FAIL" };
        all_pass &= r.pass();
        println!(
            "{:<18} {:>8} {:>7} {:>13.3e} {:>9.1e}  {status}",
            r.name,
            format!("{}..{}", r.n_range.0, r.n_range.1),
            r.draws,
            r.max_dev,
            r.tol
        );
    }

    // Always emit the QC2 printed-branch discrepancy report.
    match verify::qc2_discrepancy_report(args.max_n.max(3), args.draws, args.seed + 10) {
        Ok(rows) => {
            let csv = verify::discrepancy_csv(&rows);
            let path = args.out_dir.join("qc2_discrepancy.csv");
            if let Err(code) = write_file(&path, &csv) {
                return code;
            }
            manifest.push("discrepancy_report", path.display());
        }
        Err(e) => return fail(&e),
    }

    if all_pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAIL
    }
}

// ---------------------------------------------------------------------------
// train-cnn
// ---------------------------------------------------------------------------

fn cmd_train_cnn(args: &TrainCnnArgs, manifest: &mut Manifest) -> i32 {
    let kind = match ActivationKind::from_name(&args.activation) {
        Ok(k) => k,
        Err(_) => {
            eprintln!("error: unknown activation {:?}", args.activation);
            return EXIT_USAGE;
        }
    };
    let dataset = match DatasetId::from_name(&args.dataset) {
        Ok(d) => d,
        Err(_) => {
            eprintln!("error: unknown dataset {:?}", args.dataset);
            return EXIT_USAGE;
        }
    };
    let data_dir = resolve_data_dir(&args.data_dir);
    for (k, v) in [
        ("dataset", args.dataset.clone()),
        ("activation", args.activation.clone()),
        ("epochs", args.epochs.to_string()),
        ("batch", args.batch.to_string()),
        ("lr", args.lr.to_string()),
        ("seed", args.seed.to_string()),
        ("train", args.train.to_string()),
        ("test", args.test.to_string()),
        ("data_dir", data_dir.display().to_string()),
    ] {
        manifest.push(k, v);
    }

    let (train_set, test_set) =
        match load_split(dataset, args.train, args.test, args.seed, &data_dir) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
    manifest.push("provenance", &train_set.provenance);

    let mut model = match CnnModel::new(CnnConfig::standard(kind), args.seed) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let opts = TrainOptions {
        epochs: args.epochs,
        batch_size: args.batch,
        lr: args.lr,
        seed: args.seed,
        start_epoch: 1,
    };
    let out_dir = args.out_dir.clone();
    let dataset_name = args.dataset.clone();
    let seed = args.seed;
    let lr = args.lr;
    let batch = args.batch;
    let report = match nn::train(
        &mut model,
        &train_set.images,
        &train_set.labels,
        &test_set.images,
        &test_set.labels,
        opts,
        |m, rec| {
            let metrics = vec![
                ("train_loss".to_string(), rec.train_loss),
                ("train_acc".to_string(), rec.train_acc),
                ("test_loss".to_string(), rec.test_loss),
                ("test_acc".to_string(), rec.test_acc),
            ];
            let mut cp = Checkpoint::from_cnn(m, rec.epoch, &metrics);
            cp.config.push(("dataset".to_string(), dataset_name.clone()));
            cp.config.push(("seed".to_string(), seed.to_string()));
            cp.config.push(("lr".to_string(), lr.to_string()));
            cp.config.push(("batch".to_string(), batch.to_string()));
            qpoly_core::data::save_checkpoint(
                &out_dir.join(format!("checkpoint_epoch_{:03}.txt", rec.epoch)),
                &cp,
            )
        },
    ) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };

    let csv_path = args.out_dir.join("metrics.csv");
    if let Err(code) = write_file(&csv_path, &report.to_csv()) {
        return code;
    }
    manifest.push("metrics_csv", csv_path.display());
    match report.optimal_epoch() {
        Ok(opt) => {
            let rec = report.records[opt - 1];
            println!(
                "optimal epoch {opt}: train acc {:.4}, test acc {:.4}",
                rec.train_acc, rec.test_acc
            );
            manifest.push("optimal_epoch", opt);
        }
        Err(_) => println!("no epochs trained"),
    }
    EXIT_OK
}

// ---------------------------------------------------------------------------
// train-qcpn
// ---------------------------------------------------------------------------

fn regression_predictions_csv(
    set: &RegressionSet,
    mut predict: impl FnMut(&[f64]) -> qpoly_core::Result<f64>,
) -> qpoly_core::Result<String> {
    let mut out = String::new();
    if set.dim == 1 {
        out.push_str("x,target,prediction\n");
    } else {
        out.push_str("x1,x2,target,prediction\n");
    }
    for i in 0..set.len() {
        let raw = set.input_raw(i);
        let pred = predict(set.input(i))?;
        for v in raw {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{},{}", set.y[i], pred);
    }
    Ok(out)
}

fn cmd_train_qcpn(args: &TrainQcpnArgs, manifest: &mut Manifest) -> i32 {
    let target = match Target::from_name(&args.target) {
        Ok(t) => t,
        Err(_) => {
            eprintln!("error: unknown target {:?}", args.target);
            return EXIT_USAGE;
        }
    };
    let default_domain = target.default_domain();
    let domain = (
        args.domain_lo.unwrap_or(default_domain.0),
        args.domain_hi.unwrap_or(default_domain.1),
    );
    let dim = target.input_dim();
    let terms = if dim == 1 { args.units } else { args.terms };
    for (k, v) in [
        ("target", args.target.clone()),
        ("units", args.units.to_string()),
        ("order", args.order.to_string()),
        ("terms", terms.to_string()),
        ("epochs", args.epochs.to_string()),
        ("batch", args.batch.to_string()),
        ("lr", args.lr.to_string()),
        ("seed", args.seed.to_string()),
        ("train", args.train.to_string()),
        ("test", args.test.to_string()),
        ("domain_lo", domain.0.to_string()),
        ("domain_hi", domain.1.to_string()),
        ("baseline", args.baseline.to_string()),
        ("hidden", args.hidden.to_string()),
    ] {
        manifest.push(k, v);
    }

    let (train_set, test_set) = match gen_dataset(target, args.train, args.test, domain, args.seed)
    {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let mut model = match HybridQcpn::new(dim, args.order, terms, args.seed) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let opts = QcpnTrainOptions {
        epochs: args.epochs,
        batch_size: args.batch,
        lr: args.lr,
        seed: args.seed,
    };
    let report = match train_qcpn(&mut model, &train_set, &test_set, opts) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(code) = write_file(&args.out_dir.join("qcpn_metrics.csv"), &report.to_csv()) {
        return code;
    }
    let preds = match regression_predictions_csv(&test_set, |x| hybrid_forward(&model, x)) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    if let Err(code) = write_file(&args.out_dir.join("qcpn_predictions.csv"), &preds) {
        return code;
    }
    let final_mse = report.records.last().map_or(f64::NAN, |r| r.test_loss);
    println!("qcpn final test MSE: {final_mse:e}");
    manifest.push("qcpn_test_mse", format!("{final_mse:e}"));

    if args.baseline {
        let mut base = match BaselineNn::new(dim, args.hidden, args.seed) {
            Ok(b) => b,
            Err(e) => return fail(&e),
        };
        let base_report = match train_baseline(&mut base, &train_set, &test_set, opts) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        if let Err(code) = write_file(
            &args.out_dir.join("baseline_metrics.csv"),
            &base_report.to_csv(),
        ) {
            return code;
        }
        let preds = match regression_predictions_csv(&test_set, |x| baseline_forward(&base, x)) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        if let Err(code) = write_file(&args.out_dir.join("baseline_predictions.csv"), &preds) {
            return code;
        }
        let base_mse = base_report.records.last().map_or(f64::NAN, |r| r.test_loss);
        println!("baseline final test MSE: {base_mse:e}");
        manifest.push("baseline_test_mse", format!("{base_mse:e}"));
    }
    EXIT_OK
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

fn matrix_csv(data: &[f64], rows: usize, cols: usize) -> String {
    let mut out = String::new();
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", data[r * cols + c]);
        }
        out.push('\n');
    }
    out
}

fn cmd_features(args: &FeaturesArgs, manifest: &mut Manifest) -> i32 {
    manifest.push("checkpoint", args.checkpoint.display());
    manifest.push("image_index", args.image_index);
    let cp = match qpoly_core::data::load_checkpoint(&args.checkpoint) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let model = match cp.to_cnn() {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let dataset_name = cp.config_get("dataset").unwrap_or("mnist").to_string();
    let dataset = match DatasetId::from_name(&dataset_name) {
        Ok(d) => d,
        Err(e) => return fail(&e),
    };
    let data_dir = resolve_data_dir(&args.data_dir);
    manifest.push("dataset", &dataset_name);
    manifest.push("data_dir", data_dir.display());

    // Pull one raw image straight from the train corpus.
    let (img_name, _) = match dataset {
        DatasetId::Letter => ("emnist-letters-train-images-idx3-ubyte", ""),
        _ => ("train-images-idx3-ubyte", ""),
    };
    let img_path = data_dir.join(dataset.name()).join(img_name);
    let images = match read_idx(&img_path) {
        Ok(IdxData::Images(t)) => t,
        Ok(IdxData::Labels(_)) => {
            eprintln!("error: {} is a label file", img_path.display());
            return EXIT_DATA;
        }
        Err(e) => return fail(&e),
    };
    let (n, h, w) = match images.shape() {
        [n, h, w] => (*n, *h, *w),
        _ => {
            eprintln!("error: unexpected image tensor shape");
            return EXIT_DATA;
        }
    };
    if args.image_index >= n {
        eprintln!("error: image index {} out of range 0..{n}", args.image_index);
        return EXIT_DATA;
    }
    let px = h * w;
    let one = match qpoly_core::tensor::Tensor::new(
        vec![1, h, w],
        images.data()[args.image_index * px..(args.image_index + 1) * px].to_vec(),
    ) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let conv = match nn::conv_forward(&model, &one) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let (oh, ow, nc) = (
        model.config.conv_h(),
        model.config.conv_w(),
        model.config.channels,
    );
    // Feature maps are stored [1, oh, ow, C]; split per channel.
    for ch in 0..nc {
        let mut map = Vec::with_capacity(oh * ow);
        for i in 0..oh {
            for j in 0..ow {
                map.push(conv.data()[(i * ow + j) * nc + ch]);
            }
        }
        let path = args.out_dir.join(format!("feature_map_ch{ch:02}.csv"));
        if let Err(code) = write_file(&path, &matrix_csv(&map, oh, ow)) {
            return code;
        }
    }

    // Trained kernel parameters: angles for the quantum kinds, weights and
    // bias for the classical ones.
    let angular = model.config.kind.is_angular();
    let param_name = if angular { "angles" } else { "weights" };
    let mut csv = String::from("channel,index,value\n");
    for (ch, kernel) in model.kernels.iter().enumerate() {
        for (i, v) in kernel.params().iter().enumerate() {
            let _ = writeln!(csv, "{ch},{i},{v}");
        }
    }
    let param_path = args.out_dir.join(format!("{param_name}.csv"));
    if let Err(code) = write_file(&param_path, &csv) {
        return code;
    }
    manifest.push("parameters_csv", param_path.display());

    if angular {
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (ch, kernel) in model.kernels.iter().enumerate() {
            let (idx, val) = kernel
                .params()
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1.abs() - half_pi).abs();
                    let db = (b.1.abs() - half_pi).abs();
                    da.total_cmp(&db)
                })
                .map(|(i, &v)| (i, v))
                .unwrap_or((0, 0.0));
            println!(
                "channel {ch}: phi[{idx}] = {val:.6} (distance to +/-pi/2: {:.6})",
                (val.abs() - half_pi).abs()
            );
        }
    }
    EXIT_OK
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

fn cmd_project(args: &ProjectArgs, manifest: &mut Manifest) -> i32 {
    if !(3..=8).contains(&args.qubits) {
        eprintln!("error: qubits must be in 3..=8, got {}", args.qubits);
        return EXIT_USAGE;
    }
    let n = args.qubits;
    let k = (n - 1) * (n - 2);
    let samples = if args.samples == 0 {
        2 * k + 5
    } else {
        args.samples
    };
    manifest.push("qubits", n);
    manifest.push("samples", samples);
    manifest.push("seed", args.seed);
    manifest.push("order", k);
    if samples < k + 1 {
        eprintln!("error: need at least {} samples for order {k}", k + 1);
        return EXIT_USAGE;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let theta: Vec<f64> = (0..qpoly_core::sim::qcpn_theta_len(n))
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let nodes = chebyshev_nodes(samples);
    let samples_xy: qpoly_core::Result<Vec<(f64, f64)>> = nodes
        .iter()
        .map(|&x| run_qcpn_circuit(x, &theta, n).map(|y| (x, y)))
        .collect();
    let samples_xy = match samples_xy {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let res_k = match chebyshev_project(&samples_xy, k) {
        Ok((_, r)) => r,
        Err(e) => return fail(&e),
    };
    let res_km1 = match chebyshev_project(&samples_xy, k - 1) {
        Ok((_, r)) => r,
        Err(e) => return fail(&e),
    };
    println!("qubits {n}: K = {k}");
    println!("residual at K   = {res_k:e}");
    println!("residual at K-1 = {res_km1:e}");
    manifest.push("residual_k", format!("{res_k:e}"));
    manifest.push("residual_k_minus_1", format!("{res_km1:e}"));
    EXIT_OK
}
