//! Command-line front-end: simulate → cluster → fit → eval, plus figure
//! reproduction. Every command writes a `manifest.json` next to its outputs
//! with the fully resolved configuration; `rerun` replays a manifest and
//! reproduces the data files byte-for-byte.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use treelasso::dataset::{center_columns, DataSet};
use treelasso::error::{Error, Result};
use treelasso::eval;
use treelasso::experiment::{self, ExperimentConfig, Method};
use treelasso::io;
use treelasso::simgen::{self, SimulationSpec};
use treelasso::solver::{self, SolverConfig};
use treelasso::tree::{make_l1l2_tree, make_lasso_tree, OutputTree};
use treelasso::treelearn;

#[derive(Parser)]
#[command(name = "treelasso", version, about = "Tree-guided group lasso for multi-task regression")]
struct Cli {
    /// Worker threads for replicate/fold-level parallelism (0 = all cores).
    /// Results do not depend on this setting.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test replicate with its true coefficients
    /// and output tree.
    Simulate(SimulateArgs),
    /// Learn an output tree from Y by agglomerative clustering.
    Cluster(ClusterArgs),
    /// Fit coefficients on (X, Y) under a chosen penalty.
    Fit(FitArgs),
    /// Score estimates: ROC/AUC against true coefficients, or test MSE.
    Eval(EvalArgs),
    /// Regenerate the plot-data tables behind the simulation figures.
    Reproduce(ReproduceArgs),
    /// Replay a previous run from its manifest.
    Rerun { manifest: PathBuf },
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("TREELASSO_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with simulation parameters; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal strength written into every true nonzero coefficient.
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long)]
    outputs: Option<usize>,
    /// Children per tree level, comma separated (e.g. 3,2,5,2).
    #[arg(long)]
    branching: Option<String>,
    /// Tree depths whose groups receive causal inputs, comma separated;
    /// defaults to every internal level below the root.
    #[arg(long)]
    active_levels: Option<String>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// TSV matrix of outputs (N x K).
    #[arg(long)]
    y: PathBuf,
    /// Normalized-height pruning threshold.
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Penalty tree JSON; required with --method tree.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// lasso | l1l2 | tree
    #[arg(long, default_value = "tree")]
    method: String,
    #[arg(long, conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Select lambda by k-fold cross-validation over a built-in grid.
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    cv_seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated coefficients (support-recovery mode, with --b-true).
    #[arg(long, requires = "b_true")]
    b_hat: Option<PathBuf>,
    #[arg(long)]
    b_true: Option<PathBuf>,
    /// Predictions (prediction-error mode, with --y-test).
    #[arg(long, requires = "y_test")]
    y_pred: Option<PathBuf>,
    #[arg(long)]
    y_test: Option<PathBuf>,
    /// Directory of replicate subdirectories, each holding b_hat.tsv and
    /// b_true.tsv; emits the aggregated mean ROC curve.
    #[arg(long)]
    replicate_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// fig3 | fig4 | fig5
    figure: String,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, default_value_t = 20)]
    seed: u64,
    /// Comma-separated tuning grid for lambda; defaults to the built-in grid.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// The fully resolved form of a command, as recorded in the manifest.
#[derive(Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum ResolvedCommand {
    Simulate { spec: SimulationSpec, out_dir: PathBuf },
    Cluster { y: PathBuf, rho: f64, out_dir: PathBuf },
    Fit {
        x: PathBuf,
        y: PathBuf,
        tree: Option<PathBuf>,
        method: String,
        lambda: Option<f64>,
        cv: bool,
        folds: usize,
        cv_seed: u64,
        out_dir: PathBuf,
    },
    Eval {
        b_hat: Option<PathBuf>,
        b_true: Option<PathBuf>,
        y_pred: Option<PathBuf>,
        y_test: Option<PathBuf>,
        replicate_dir: Option<PathBuf>,
        out_dir: PathBuf,
    },
    Reproduce {
        figure: String,
        replicates: usize,
        seed: u64,
        lambda_grid: Vec<f64>,
        out_dir: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    #[serde(flatten)]
    resolved: ResolvedCommand,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    version: String,
    wall_time_secs: f64,
}

/// Side products of a command used to fill the manifest.
struct CommandOutcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        // Ignore failure: the pool can only be built once (e.g. in rerun).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => 3,
                Error::Solver(_) => 4,
                _ => 2,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    let resolved = resolve(command)?;
    execute_with_manifest(resolved)
}

fn execute_with_manifest(resolved: ResolvedCommand) -> Result<()> {
    let start = Instant::now();
    let outcome = execute(&resolved)?;
    let out_dir = match &resolved {
        ResolvedCommand::Simulate { out_dir, .. }
        | ResolvedCommand::Cluster { out_dir, .. }
        | ResolvedCommand::Fit { out_dir, .. }
        | ResolvedCommand::Eval { out_dir, .. }
        | ResolvedCommand::Reproduce { out_dir, .. } => out_dir.clone(),
    };
    let manifest = RunManifest {
        resolved,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
    std::fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

/// Materializes all defaults, reading config files where given.
fn resolve(command: Command) -> Result<ResolvedCommand> {
    Ok(match command {
        Command::Simulate(args) => {
            let mut spec = match &args.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str::<SimulationSpec>(&text)
                        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
                }
                None => {
                    if args.signal.is_none() {
                        return Err(Error::Config(
                            "--signal is required when no --config file is given".into(),
                        ));
                    }
                    SimulationSpec::default()
                }
            };
            if let Some(v) = args.signal {
                spec.signal = v;
            }
            if let Some(v) = args.seed {
                spec.seed = v;
            }
            if let Some(v) = args.n_train {
                spec.n_train = v;
            }
            if let Some(v) = args.n_test {
                spec.n_test = v;
            }
            if let Some(v) = args.inputs {
                spec.j_inputs = v;
            }
            if let Some(v) = args.outputs {
                spec.k_outputs = v;
            }
            if let Some(b) = &args.branching {
                spec.branching = b
                    .split(',')
                    .map(|t| {
                        t.trim().parse().map_err(|_| {
                            Error::Config(format!("bad branching entry '{t}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
                // A new branching invalidates levels chosen for the old one;
                // unless levels are given explicitly, activate every internal
                // level below the root (the leaf level for a one-level tree).
                if args.active_levels.is_none() && args.config.is_none() {
                    spec.active_levels = if spec.branching.len() >= 2 {
                        (1..spec.branching.len()).collect()
                    } else {
                        std::iter::once(1).collect()
                    };
                }
            }
            if let Some(levels) = &args.active_levels {
                spec.active_levels = levels
                    .split(',')
                    .map(|t| {
                        t.trim().parse().map_err(|_| {
                            Error::Config(format!("bad active level '{t}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            if let Some(v) = args.noise_sd {
                spec.noise_sd = v;
            }
            spec.check()?;
            ResolvedCommand::Simulate {
                spec,
                out_dir: args.out_dir.unwrap_or_else(default_out_dir),
            }
        }
        Command::Cluster(args) => ResolvedCommand::Cluster {
            y: args.y,
            rho: args.rho,
            out_dir: args.out_dir.unwrap_or_else(default_out_dir),
        },
        Command::Fit(args) => {
            if args.lambda.is_none() && !args.cv {
                return Err(Error::Config("either --lambda or --cv is required".into()));
            }
            if args.method == "tree" && args.tree.is_none() {
                return Err(Error::Config("--method tree requires --tree".into()));
            }
            ResolvedCommand::Fit {
                x: args.x,
                y: args.y,
                tree: args.tree,
                method: args.method,
                lambda: args.lambda,
                cv: args.cv,
                folds: args.folds,
                cv_seed: args.cv_seed,
                out_dir: args.out_dir.unwrap_or_else(default_out_dir),
            }
        }
        Command::Eval(args) => {
            let modes = [
                args.b_hat.is_some(),
                args.y_pred.is_some(),
                args.replicate_dir.is_some(),
            ];
            if modes.iter().filter(|&&m| m).count() != 1 {
                return Err(Error::Config(
                    "choose exactly one mode: --b-hat/--b-true, --y-pred/--y-test, \
                     or --replicate-dir"
                        .into(),
                ));
            }
            ResolvedCommand::Eval {
                b_hat: args.b_hat,
                b_true: args.b_true,
                y_pred: args.y_pred,
                y_test: args.y_test,
                replicate_dir: args.replicate_dir,
                out_dir: args.out_dir.unwrap_or_else(default_out_dir),
            }
        }
        Command::Reproduce(args) => {
            if !["fig3", "fig4", "fig5"].contains(&args.figure.as_str()) {
                return Err(Error::Config(format!(
                    "unknown figure '{}' (expected fig3, fig4, or fig5)",
                    args.figure
                )));
            }
            let lambda_grid = match &args.lambda_grid {
                None => ExperimentConfig::default().lambda_grid,
                Some(s) => s
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("bad lambda '{t}'")))
                    })
                    .collect::<Result<_>>()?,
            };
            ResolvedCommand::Reproduce {
                figure: args.figure,
                replicates: args.replicates,
                seed: args.seed,
                lambda_grid,
                out_dir: args.out_dir.unwrap_or_else(default_out_dir),
            }
        }
        Command::Rerun { manifest } => {
            let text = std::fs::read_to_string(&manifest)?;
            let parsed: RunManifest = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", manifest.display())))?;
            parsed.resolved
        }
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn execute(resolved: &ResolvedCommand) -> Result<CommandOutcome> {
    match resolved {
        ResolvedCommand::Simulate { spec, out_dir } => cmd_simulate(spec, out_dir),
        ResolvedCommand::Cluster { y, rho, out_dir } => cmd_cluster(y, *rho, out_dir),
        ResolvedCommand::Fit {
            x,
            y,
            tree,
            method,
            lambda,
            cv,
            folds,
            cv_seed,
            out_dir,
        } => cmd_fit(x, y, tree.as_deref(), method, *lambda, *cv, *folds, *cv_seed, out_dir),
        ResolvedCommand::Eval {
            b_hat,
            b_true,
            y_pred,
            y_test,
            replicate_dir,
            out_dir,
        } => cmd_eval(
            b_hat.as_deref(),
            b_true.as_deref(),
            y_pred.as_deref(),
            y_test.as_deref(),
            replicate_dir.as_deref(),
            out_dir,
        ),
        ResolvedCommand::Reproduce { figure, replicates, seed, lambda_grid, out_dir } => {
            cmd_reproduce(figure, *replicates, *seed, lambda_grid, out_dir)
        }
    }
}

fn cmd_simulate(spec: &SimulationSpec, out_dir: &Path) -> Result<CommandOutcome> {
    ensure_dir(out_dir)?;
    let (train, test, b_true, tree) = simgen::generate_dataset(spec)?;
    let files = [
        ("x_train.tsv", train.x()),
        ("y_train.tsv", train.y()),
        ("x_test.tsv", test.x()),
        ("y_test.tsv", test.y()),
        ("b_true.tsv", &b_true),
    ];
    let mut outputs = Vec::new();
    for (name, m) in files {
        let path = out_dir.join(name);
        let prefix = if name.starts_with('x') { "j" } else { "k" };
        io::write_matrix(&path, m, prefix)?;
        outputs.push(path);
    }
    let tree_path = out_dir.join("tree.json");
    io::write_tree(&tree_path, &tree)?;
    outputs.push(tree_path);
    Ok(CommandOutcome { inputs: vec![], outputs })
}

fn cmd_cluster(y_path: &Path, rho: f64, out_dir: &Path) -> Result<CommandOutcome> {
    ensure_dir(out_dir)?;
    let y = io::read_matrix(y_path)?;
    let corr = treelearn::correlation_matrix(&y.view())?;
    let dist = treelearn::correlation_distance(&corr.view());
    let mut dend = treelearn::agglomerative_cluster(&dist.view())?;
    let tree = treelearn::normalize_and_assign(&mut dend, rho)?;
    let dend_path = out_dir.join("dendrogram.tsv");
    let tree_path = out_dir.join("tree.json");
    io::write_dendrogram(&dend_path, &dend)?;
    io::write_tree(&tree_path, &tree)?;
    Ok(CommandOutcome {
        inputs: vec![y_path.to_path_buf()],
        outputs: vec![dend_path, tree_path],
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    x_path: &Path,
    y_path: &Path,
    tree_path: Option<&Path>,
    method: &str,
    lambda: Option<f64>,
    cv: bool,
    folds: usize,
    cv_seed: u64,
    out_dir: &Path,
) -> Result<CommandOutcome> {
    ensure_dir(out_dir)?;
    let x = io::read_matrix(x_path)?;
    let y = io::read_matrix(y_path)?;
    let k = y.ncols();
    let tree: OutputTree = match method {
        "lasso" => make_lasso_tree(k)?,
        "l1l2" => make_l1l2_tree(k)?,
        "tree" => io::read_tree(tree_path.expect("checked in resolve"))?,
        other => {
            return Err(Error::Config(format!(
                "unknown method '{other}' (expected lasso, l1l2, or tree)"
            )))
        }
    };
    let data = center_columns(DataSet::new(x, y)?)?;
    let (chosen_lambda, cv_table) = if cv {
        let grid = solver::default_lambda_grid();
        let base = SolverConfig::new(1.0)?;
        let (best, rows) = solver::cross_validate(&data, &tree, &grid, folds, cv_seed, &base)?;
        (best, Some(rows))
    } else {
        (lambda.expect("checked in resolve"), None)
    };
    let config = SolverConfig::new(chosen_lambda)?;
    let fit = solver::fit(&data, &tree, &config)?;

    let b_path = out_dir.join("b_hat.tsv");
    let report_path = out_dir.join("fit_report.tsv");
    io::write_matrix(&b_path, &fit.b, "k")?;
    io::write_fit_report(&report_path, &fit)?;
    let mut outputs = vec![b_path, report_path];
    if let Some(rows) = cv_table {
        let cv_path = out_dir.join("cv_table.tsv");
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.lambda.to_string(), r.mean_mse.to_string()])
            .collect();
        io::write_table(&cv_path, &["lambda", "mean_mse"], &table)?;
        outputs.push(cv_path);
    }
    let mut inputs = vec![x_path.to_path_buf(), y_path.to_path_buf()];
    if let Some(t) = tree_path {
        inputs.push(t.to_path_buf());
    }
    Ok(CommandOutcome { inputs, outputs })
}

fn write_roc(path: &Path, curve: &eval::RocCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|(f, t)| vec![f.to_string(), t.to_string()])
        .collect();
    io::write_table(path, &["fpr", "tpr"], &rows)
}

fn cmd_eval(
    b_hat: Option<&Path>,
    b_true: Option<&Path>,
    y_pred: Option<&Path>,
    y_test: Option<&Path>,
    replicate_dir: Option<&Path>,
    out_dir: &Path,
) -> Result<CommandOutcome> {
    ensure_dir(out_dir)?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    if let Some(b_hat) = b_hat {
        let b_true = b_true.expect("checked in resolve");
        inputs.extend([b_hat.to_path_buf(), b_true.to_path_buf()]);
        let bh = io::read_matrix(b_hat)?;
        let bt = io::read_matrix(b_true)?;
        let curve = eval::roc_by_threshold(&bh.view(), &bt.view())?;
        let auc = eval::auc(&curve);
        let tau = eval::default_support_tau(&bh.view());
        let m = eval::support_metrics(&bh.view(), &bt.view(), tau)?;
        let roc_path = out_dir.join("roc.tsv");
        write_roc(&roc_path, &curve)?;
        let metrics_path = out_dir.join("metrics.tsv");
        io::write_table(
            &metrics_path,
            &["auc", "tau", "sensitivity", "specificity"],
            &[vec![
                auc.to_string(),
                tau.to_string(),
                m.sensitivity.to_string(),
                m.specificity.to_string(),
            ]],
        )?;
        outputs.extend([roc_path, metrics_path]);
    } else if let Some(y_pred) = y_pred {
        let y_test = y_test.expect("checked in resolve");
        inputs.extend([y_pred.to_path_buf(), y_test.to_path_buf()]);
        let yp = io::read_matrix(y_pred)?;
        let yt = io::read_matrix(y_test)?;
        let mse = eval::test_mse(&yp.view(), &yt.view())?;
        let metrics_path = out_dir.join("metrics.tsv");
        io::write_table(&metrics_path, &["test_mse"], &[vec![mse.to_string()]])?;
        outputs.push(metrics_path);
    } else {
        let dir = replicate_dir.expect("checked in resolve");
        inputs.push(dir.to_path_buf());
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        let mut curves = Vec::new();
        for sub in &subdirs {
            let bh = io::read_matrix(&sub.join("b_hat.tsv"))?;
            let bt = io::read_matrix(&sub.join("b_true.tsv"))?;
            curves.push(eval::roc_by_threshold(&bh.view(), &bt.view())?);
        }
        let mean = eval::aggregate_curves(&curves)?;
        let roc_path = out_dir.join("mean_roc.tsv");
        write_roc(&roc_path, &mean)?;
        outputs.push(roc_path);
    }
    Ok(CommandOutcome { inputs, outputs })
}

fn cmd_reproduce(
    figure: &str,
    replicates: usize,
    seed: u64,
    lambda_grid: &[f64],
    out_dir: &Path,
) -> Result<CommandOutcome> {
    ensure_dir(out_dir)?;
    let mut outputs = Vec::new();
    match figure {
        "fig3" => {
            // One signal-0.4 replicate: true and estimated coefficients for
            // heat-map rendering.
            let spec = SimulationSpec { signal: 0.4, seed, ..Default::default() };
            let lambda = experiment::tune_lambda(&spec, Method::TreeTrue, lambda_grid)?;
            let (train, _, b_true, tree) = simgen::generate_dataset(&spec)?;
            let data = center_columns(train)?;
            let fit = solver::fit(&data, &tree, &SolverConfig::new(lambda)?)?;
            for (name, m) in [("b_true.tsv", &b_true), ("b_hat.tsv", &fit.b)] {
                let path = out_dir.join(name);
                io::write_matrix(&path, m, "k")?;
                outputs.push(path);
            }
        }
        "fig4" | "fig5" => {
            let cfg = ExperimentConfig {
                replicates,
                base_seed: seed,
                lambda_grid: lambda_grid.to_vec(),
                ..Default::default()
            };
            let cells = experiment::run_experiment(&cfg)?;
            if figure == "fig4" {
                for &signal in &cfg.signals {
                    let mut rows = Vec::new();
                    for cell in cells.iter().filter(|c| c.signal == signal) {
                        for (f, t) in &cell.mean_curve.points {
                            rows.push(vec![
                                cell.method.label(),
                                f.to_string(),
                                t.to_string(),
                            ]);
                        }
                    }
                    let path = out_dir.join(format!("roc_signal_{signal}.tsv"));
                    io::write_table(&path, &["method", "fpr", "tpr"], &rows)?;
                    outputs.push(path);
                }
                let auc_rows: Vec<Vec<String>> = cells
                    .iter()
                    .map(|c| {
                        vec![
                            c.method.label(),
                            c.signal.to_string(),
                            c.lambda.to_string(),
                            c.auc_mean.to_string(),
                            c.auc_se.to_string(),
                        ]
                    })
                    .collect();
                let path = out_dir.join("auc.tsv");
                io::write_table(
                    &path,
                    &["method", "signal", "lambda", "auc_mean", "auc_se"],
                    &auc_rows,
                )?;
                outputs.push(path);
            } else {
                let mse_rows: Vec<Vec<String>> = cells
                    .iter()
                    .map(|c| {
                        vec![
                            c.method.label(),
                            c.signal.to_string(),
                            c.lambda.to_string(),
                            c.mse_mean.to_string(),
                            c.mse_se.to_string(),
                        ]
                    })
                    .collect();
                let path = out_dir.join("mse.tsv");
                io::write_table(
                    &path,
                    &["method", "signal", "lambda", "mse_mean", "mse_se"],
                    &mse_rows,
                )?;
                outputs.push(path);
            }
        }
        _ => unreachable!("validated in resolve"),
    }
    Ok(CommandOutcome { inputs: vec![], outputs })
}
