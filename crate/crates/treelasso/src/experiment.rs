//! The simulation study: repeated fits across signal strengths and penalty
//! variants, scored by support-recovery ROC/AUC and held-out prediction
//! error, averaged over replicates.
//!
//! Each (signal, method) cell first picks lambda on a dedicated tuning
//! replicate (held apart from the scored replicates by a large seed offset),
//! then fits the scored replicates in parallel at that fixed lambda.

use rayon::prelude::*;

use crate::dataset::center_columns;
use crate::error::{Error, Result};
use crate::eval::{self, RocCurve};
use crate::simgen::SimulationSpec;
use crate::solver::{fit, predict, SolverConfig};
use crate::tree::{make_l1l2_tree, make_lasso_tree, OutputTree};
use crate::treelearn;

/// Replicate indices reserved for lambda tuning; scored replicates are 0..R.
const TUNING_REPLICATES: [u64; 2] = [1 << 32, (1 << 32) + 1];

/// Penalty variant under comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Star tree with g = 0 everywhere: plain lasso.
    Lasso,
    /// Star tree with g = 1 at the root: joint L1/L2 selection.
    L1L2,
    /// Tree-guided penalty on the true simulation tree.
    TreeTrue,
    /// Tree-guided penalty on a tree clustered from the training outputs,
    /// pruned at normalized height `rho`.
    TreeLearned { rho: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Lasso => "lasso".into(),
            Method::L1L2 => "l1l2".into(),
            Method::TreeTrue => "tree".into(),
            Method::TreeLearned { rho } => format!("T{rho}"),
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "l1l2" => Ok(Method::L1L2),
            "tree" => Ok(Method::TreeTrue),
            _ => s
                .strip_prefix('T')
                .and_then(|r| r.parse().ok())
                .map(|rho| Method::TreeLearned { rho })
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown method '{s}' (expected lasso, l1l2, tree, or T<rho>)"
                    ))
                }),
        }
    }
}

/// Scores of one method on one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub curve: RocCurve,
    pub auc: f64,
    pub mse: f64,
}

/// Aggregated scores of one (method, signal) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: Method,
    pub signal: f64,
    pub lambda: f64,
    pub mean_curve: RocCurve,
    pub auc_mean: f64,
    pub auc_se: f64,
    pub mse_mean: f64,
    pub mse_se: f64,
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub signals: Vec<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Grid searched on the tuning replicate of each cell.
    pub lambda_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            signals: vec![0.2, 0.4, 0.6],
            methods: vec![
                Method::Lasso,
                Method::L1L2,
                Method::TreeTrue,
                Method::TreeLearned { rho: 0.9 },
                Method::TreeLearned { rho: 0.7 },
            ],
            replicates: 50,
            base_seed: 20,
            lambda_grid: vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 3.0, 10.0],
        }
    }
}

/// The penalty tree a method uses on one replicate's training data.
pub fn tree_for_method(
    method: Method,
    train_y: &ndarray::ArrayView2<f64>,
    true_tree: &OutputTree,
) -> Result<OutputTree> {
    let k = true_tree.num_outputs();
    match method {
        Method::Lasso => make_lasso_tree(k),
        Method::L1L2 => make_l1l2_tree(k),
        Method::TreeTrue => Ok(true_tree.clone()),
        Method::TreeLearned { rho } => {
            let corr = treelearn::correlation_matrix(train_y)?;
            let dist = treelearn::correlation_distance(&corr.view());
            let mut dend = treelearn::agglomerative_cluster(&dist.view())?;
            treelearn::normalize_and_assign(&mut dend, rho)
        }
    }
}

/// Generates one replicate, fits `method` at `lambda`, and scores it.
pub fn run_replicate(
    spec: &SimulationSpec,
    method: Method,
    lambda: f64,
) -> Result<ReplicateOutcome> {
    let (train, test, b_true, true_tree) = crate::simgen::generate_dataset(spec)?;
    let tree = tree_for_method(method, &train.y().view(), &true_tree)?;
    let centered = center_columns(train)?;
    let config = SolverConfig::new(lambda)?;
    let result = fit(&centered, &tree, &config)?;
    let pred = predict(
        &test.x().view(),
        &result.b.view(),
        centered.x_means(),
        centered.y_means(),
    )?;
    let mse = eval::test_mse(&pred.view(), &test.y().view())?;
    let curve = eval::roc_by_threshold(&result.b.view(), &b_true.view())?;
    let auc = eval::auc(&curve);
    Ok(ReplicateOutcome { curve, auc, mse })
}

/// Picks the grid lambda with the lowest held-out test MSE averaged over
/// the tuning replicates. Ties go to the larger lambda.
pub fn tune_lambda(
    spec: &SimulationSpec,
    method: Method,
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let tuning_specs: Vec<SimulationSpec> = TUNING_REPLICATES
        .iter()
        .map(|&r| spec.for_replicate(r))
        .collect();
    let scored: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&lambda| {
            let mut total = 0.0;
            for ts in &tuning_specs {
                total += run_replicate(ts, method, lambda)?.mse;
            }
            Ok((lambda, total / tuning_specs.len() as f64))
        })
        .collect::<Result<_>>()?;
    let mut best = scored[0];
    for &(lambda, mse) in &scored[1..] {
        if mse < best.1 || (mse == best.1 && lambda > best.0) {
            best = (lambda, mse);
        }
    }
    Ok(best.0)
}

/// Runs one (method, signal) cell: tuning, R scored replicates in parallel,
/// aggregation.
pub fn run_cell(
    cfg: &ExperimentConfig,
    method: Method,
    signal: f64,
) -> Result<CellResult> {
    let spec = SimulationSpec {
        signal,
        seed: cfg.base_seed,
        ..SimulationSpec::default()
    };
    spec.check()?;
    let lambda = tune_lambda(&spec, method, &cfg.lambda_grid)?;
    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(&spec.for_replicate(r), method, lambda))
        .collect::<Result<_>>()?;
    let curves: Vec<RocCurve> = outcomes.iter().map(|o| o.curve.clone()).collect();
    let aucs: Vec<f64> = outcomes.iter().map(|o| o.auc).collect();
    let mses: Vec<f64> = outcomes.iter().map(|o| o.mse).collect();
    let (auc_mean, auc_se) = eval::aggregate_scalars(&aucs)?;
    let (mse_mean, mse_se) = eval::aggregate_scalars(&mses)?;
    Ok(CellResult {
        method,
        signal,
        lambda,
        mean_curve: eval::aggregate_curves(&curves)?,
        auc_mean,
        auc_se,
        mse_mean,
        mse_se,
    })
}

/// Runs every (method, signal) cell of the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    if cfg.replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    let mut results = Vec::new();
    for &signal in &cfg.signals {
        for &method in &cfg.methods {
            results.push(run_cell(cfg, method, signal)?);
        }
    }
    Ok(results)
}
