//! `nodeselect` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure (including a gradient check
//! breach), 2 bad config or arguments, 3 bad dataset or dimension mismatch.
//! Standard output carries only `key=value` summary lines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nodeselect::bench::{diagnostics_bench, run_bench, BenchSpec, DatasetSource, Experiment};
use nodeselect::gradcheck::{run_gradcheck, CheckMode, GradcheckOptions};
use nodeselect::graph::{
    load_graph, make_splits, DEFAULT_RATIOS, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE,
};
use nodeselect::model::{evaluate, load_checkpoint, save_checkpoint, train};
use nodeselect::{init_model, Error, Graph, Model, ModelConfig};

const MANIFEST_FILE: &str = "manifest.json";
const METRICS_FILE: &str = "metrics.csv";
const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Parser)]
#[command(name = "nodeselect", version, about = "Selective node propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a dataset directory and write a run directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Flat key=value model config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of a checkpoint on one split of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["test", "val", "train"])]
        split: String,
    },
    /// Run one benchmark experiment and write its CSV report.
    Bench {
        /// noise | scale | sweep-t | sweep-l | stacking | diag
        #[arg(long)]
        experiment: String,
        /// Dataset directory; the synthetic block-model graph by default.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model config overriding the benchmark defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        #[arg(long = "l-grid", value_delimiter = ',')]
        l_grid: Option<Vec<usize>>,
        /// Number of seeds, run as 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        /// Trained checkpoint for the diag experiment.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the analytic gradients.
    Gradcheck {
        #[arg(long, default_value = "soft")]
        mode: String,
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt: Option<f64>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        msg: e.to_string(),
    }
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

/// Exit code for an error whose origin was not pinned down by the caller.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => config_err(e),
        Error::Dataset(_) | Error::Parse { .. } | Error::Shape { .. } => data_err(e),
        _ => runtime_err(e),
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize)]
struct DatasetFingerprint {
    dir: String,
    sha256: String,
}

#[derive(Serialize)]
struct Artifacts {
    manifest: String,
    metrics: String,
    checkpoint: String,
}

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config: std::collections::BTreeMap<&'static str, String>,
    dataset: DatasetFingerprint,
    seeds: Vec<u64>,
    split_ratios: [f64; 3],
    artifacts: Artifacts,
    replay: Vec<String>,
}

/// SHA-256 over the four dataset files in a fixed order, each prefixed by
/// its name and length.
fn dataset_hash(dir: &Path) -> Result<String, Failure> {
    let mut h = Sha256::new();
    for name in [META_FILE, EDGES_FILE, FEATURES_FILE, LABELS_FILE] {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, body).map_err(|e| runtime_err(format!("{}: {e}", path.display())))
}

fn load_data(dir: &Path) -> Result<Graph, Failure> {
    load_graph(dir).map_err(data_err)
}

fn check_dims(model: &Model, g: &Graph) -> CmdResult {
    if model.in_dim() != g.feat_dim() || model.num_classes() != g.num_classes() {
        return Err(data_err(format!(
            "checkpoint expects {} features and {} classes, dataset has {} and {}",
            model.in_dim(),
            model.num_classes(),
            g.feat_dim(),
            g.num_classes()
        )));
    }
    Ok(())
}

fn cmd_train(data: &Path, config: &Path, seed: u64, out: &Path) -> CmdResult {
    let mut cfg = ModelConfig::from_file(config).map_err(config_err)?;
    cfg.seed = seed;
    let g = load_data(data)?;
    let sha256 = dataset_hash(data)?;

    fs::create_dir_all(out).map_err(|e| runtime_err(format!("{}: {e}", out.display())))?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: "train",
        config: cfg.entries().into_iter().collect(),
        dataset: DatasetFingerprint {
            dir: data.display().to_string(),
            sha256,
        },
        seeds: vec![seed],
        split_ratios: [DEFAULT_RATIOS.0, DEFAULT_RATIOS.1, DEFAULT_RATIOS.2],
        artifacts: Artifacts {
            manifest: MANIFEST_FILE.into(),
            metrics: METRICS_FILE.into(),
            checkpoint: CHECKPOINT_FILE.into(),
        },
        replay: std::env::args().collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(runtime_err)?;
    write_file(&out.join(MANIFEST_FILE), json + "\n")?;

    let masks = make_splits(&g, DEFAULT_RATIOS, seed).map_err(data_err)?;
    let mut model = init_model(&cfg, g.feat_dim(), g.num_classes()).map_err(classify)?;
    let report = train(&mut model, &g, &masks).map_err(classify)?;
    log::info!(
        "best epoch {} of {}, val_acc {:.4}",
        report.best_epoch,
        report.epochs.len(),
        report.best_val_acc
    );
    write_file(&out.join(METRICS_FILE), report.metrics_csv())?;
    save_checkpoint(&model, out.join(CHECKPOINT_FILE)).map_err(runtime_err)?;
    println!("test_acc={}", report.test_acc);
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &Path, split: &str) -> CmdResult {
    let model = load_checkpoint(checkpoint).map_err(runtime_err)?;
    let g = load_data(data)?;
    check_dims(&model, &g)?;
    let masks = make_splits(&g, DEFAULT_RATIOS, model.config.seed).map_err(data_err)?;
    let mask = match split {
        "train" => &masks.train,
        "val" => &masks.val,
        _ => &masks.test,
    };
    let acc = evaluate(&model, &g, mask).map_err(classify)?;
    println!("{split}_acc={acc}");
    Ok(())
}

/// Thread count: `NS_THREADS` when set, `--jobs` otherwise.
fn resolve_jobs(flag: usize) -> Result<usize, Failure> {
    match std::env::var("NS_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config_err(format!("NS_THREADS: cannot parse {v:?}"))),
        Err(_) => Ok(flag),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    experiment: &str,
    data: Option<PathBuf>,
    config: Option<PathBuf>,
    fractions: Option<Vec<f64>>,
    sizes: Option<Vec<usize>>,
    t_grid: Option<Vec<f64>>,
    l_grid: Option<Vec<usize>>,
    seeds: Option<u64>,
    checkpoint: Option<PathBuf>,
    jobs: usize,
    out: &Path,
) -> CmdResult {
    let experiment: Experiment = experiment.parse().map_err(config_err)?;
    let mut spec = BenchSpec::new(experiment);
    if let Some(dir) = data {
        load_data(&dir)?;
        spec.dataset = DatasetSource::Dir(dir);
    }
    if let Some(path) = config {
        spec.model = ModelConfig::from_file(path).map_err(config_err)?;
    }
    if let Some(v) = fractions {
        spec.fractions = v;
    }
    if let Some(v) = sizes {
        spec.sizes = v;
    }
    if let Some(v) = t_grid {
        spec.t_grid = v;
    }
    if let Some(v) = l_grid {
        spec.l_grid = v;
    }
    if let Some(n) = seeds {
        spec.seeds = (0..n).collect();
    }
    spec.jobs = resolve_jobs(jobs)?;
    spec.validate().map_err(config_err)?;

    let report = match (experiment, checkpoint) {
        (Experiment::Diagnostics, Some(path)) => {
            let model = load_checkpoint(&path).map_err(runtime_err)?;
            let g = nodeselect::bench::Dataset::resolve(&spec.dataset).map_err(data_err)?;
            check_dims(&model, &g)?;
            diagnostics_bench(&spec, Some(&model))
        }
        (_, Some(_)) => return Err(config_err("--checkpoint only applies to diag")),
        (_, None) => run_bench(&spec),
    }
    .map_err(classify)?;
    report.write(out).map_err(runtime_err)?;
    println!("rows={}", report.rows.len());
    println!("out={}", out.display());
    Ok(())
}

fn cmd_gradcheck(
    mode: &str,
    nodes: usize,
    trials: usize,
    seed: u64,
    corrupt: Option<f64>,
) -> CmdResult {
    let mode: CheckMode = mode.parse().map_err(config_err)?;
    if !(2..=16).contains(&nodes) {
        return Err(config_err(format!(
            "--nodes must be in 2..=16, got {nodes}"
        )));
    }
    if trials == 0 {
        return Err(config_err("--trials must be >= 1"));
    }
    let opts = GradcheckOptions {
        mode,
        nodes,
        trials,
        seed,
        corrupt,
        ..GradcheckOptions::default()
    };
    let report = run_gradcheck(&opts).map_err(classify)?;
    log::info!(
        "{} coordinates checked, {} skipped, {:.1} ms",
        report.checked,
        report.skipped,
        report.elapsed_ms
    );
    println!("max_rel_err={:e}", report.max_rel_err);
    if report.passed() {
        return Ok(());
    }
    let at = report
        .worst
        .map(|c| c.to_string())
        .unwrap_or_else(|| "unknown coordinate".into());
    Err(runtime_err(format!(
        "relative error above {:e} at {at}",
        report.tolerance
    )))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            data,
            config,
            seed,
            out,
        } => cmd_train(&data, &config, seed, &out),
        Command::Eval {
            checkpoint,
            data,
            split,
        } => cmd_eval(&checkpoint, &data, &split),
        Command::Bench {
            experiment,
            data,
            config,
            fractions,
            sizes,
            t_grid,
            l_grid,
            seeds,
            checkpoint,
            jobs,
            out,
        } => cmd_bench(
            &experiment,
            data,
            config,
            fractions,
            sizes,
            t_grid,
            l_grid,
            seeds,
            checkpoint,
            jobs,
            &out,
        ),
        Command::Gradcheck {
            mode,
            nodes,
            trials,
            seed,
            corrupt,
        } => cmd_gradcheck(&mode, nodes, trials, seed, corrupt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
