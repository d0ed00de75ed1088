//! Alternating minimization for the squared tree-penalty objective
//!
//! ```text
//! sum_k ||y_k - X beta_k||^2 + lambda * (sum_j sum_v w_v ||beta^j_{G_v}||_2)^2
//! ```
//!
//! The squared mixed norm is replaced by its variational form
//! `sum_{j,v} w_v^2 ||beta^j_{G_v}||^2 / d_{j,v}` with simplex variables `d`.
//! For fixed coefficients the optimal duals are `d_{j,v} ∝ w_v ||beta^j_{G_v}||`
//! (floored at a small epsilon to keep the ridge weights finite); for fixed
//! duals each column solves a weighted ridge system
//! `(X^T X + lambda D_k) beta_k = X^T y_k`, where `D_k` is diagonal with
//! `sum_{v: k in G_v} w_v^2 / d_{j,v}` in entry `j`. Restricting the sum to
//! the groups that actually contain output `k` makes the beta step the exact
//! minimizer of the surrogate, which is what guarantees monotone descent.
//! `X^T X` is formed once per fit; each column's factorization is refreshed
//! every iteration since `D_k` changes.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::penalty::penalty_flat;
use crate::tree::OutputTree;
use crate::CoefficientMatrix;

/// Solver settings. `lambda` multiplies the squared penalty.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Smoothing floor applied to the dual weights before normalization.
    /// Keeps the ridge weights finite when a group's coefficients vanish;
    /// the trade-off is that exact zeros are never produced.
    pub epsilon_floor: f64,
    /// Stop when the relative objective change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// When false, the dual update drops the w_v factor (comparison mode;
    /// forfeits the exact-descent guarantee).
    pub weighted_duals: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let config = SolverConfig {
            lambda,
            epsilon_floor: 1e-10,
            tol: 1e-6,
            max_iter: 1000,
            weighted_duals: true,
        };
        config.check()?;
        Ok(config)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::Config("epsilon_floor must be > 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Variational dual weights, one per (input, tree node) pair. Entries are
/// non-negative and sum to one.
#[derive(Debug, Clone)]
pub struct DualWeights {
    /// J x |V| matrix of weights.
    pub d: Array2<f64>,
    /// Set when the coefficient matrix was identically zero and the uniform
    /// fallback was used.
    pub degenerate: bool,
}

/// Outcome of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub b: CoefficientMatrix,
    /// Objective value after the initialization and after each iteration.
    pub objective_trace: Vec<f64>,
    pub duals: DualWeights,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
}

/// One row of a cross-validation table.
#[derive(Debug, Clone)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_mse: f64,
    pub fold_mse: Vec<f64>,
}

///// The squared-penalty objective: residual sum of squares plus
/// `lambda * penalty_flat(B)^2`.
pub fn objective(
    data: &DataSet,
    b: &ArrayView2<f64>,
    tree: &OutputTree,
    lambda: f64,
) -> Result<f64> {
    if !data.is_centered() {
        return Err(Error::Config("objective requires centered data".into()));
    }
    if b.nrows() != data.num_inputs() || b.ncols() != data.num_outputs() {
        return Err(Error::Dimension(format!(
            "coefficients are {}x{} but data is J={}, K={}",
            b.nrows(),
            b.ncols(),
            data.num_inputs(),
            data.num_outputs()
        )));
    }
    let resid = data.y() - &data.x().dot(b);
    let rss = resid.iter().map(|r| r * r).sum::<f64>();
    let pen = penalty_flat(b, tree)?;
    Ok(rss + lambda * pen * pen)
}

/// Closed-form dual update for fixed coefficients:
/// `d_{j,v} = max(w_v ||beta^j_{G_v}||, eps) / Z` with `Z` normalizing the
/// total to one. An identically zero `B` falls back to uniform duals with
/// the degenerate flag set.
pub fn update_duals(
    b: &ArrayView2<f64>,
    tree: &OutputTree,
    config: &SolverConfig,
) -> DualWeights {
    let j_inputs = b.nrows();
    let v_nodes = tree.num_nodes();
    let mut d = Array2::zeros((j_inputs, v_nodes));
    let mut any_nonzero = false;
    for (v, node) in tree.nodes().iter().enumerate() {
        let w = if config.weighted_duals { node.derived_w } else { 1.0 };
        for j in 0..j_inputs {
            let norm: f64 = node
                .group
                .iter()
                .map(|&k| b[(j, k)] * b[(j, k)])
                .sum::<f64>()
                .sqrt();
            let a = w * norm;
            if a > 0.0 {
                any_nonzero = true;
            }
            d[(j, v)] = a;
        }
    }
    if !any_nonzero {
        let uniform = 1.0 / (j_inputs * v_nodes) as f64;
        d.fill(uniform);
        return DualWeights { d, degenerate: true };
    }
    d.mapv_inplace(|a| a.max(config.epsilon_floor));
    let z = d.sum();
    d.mapv_inplace(|a| a / z);
    DualWeights { d, degenerate: false }
}

/// Weighted ridge update of all coefficient columns for fixed duals.
pub fn update_beta(
    data: &DataSet,
    duals: &DualWeights,
    tree: &OutputTree,
    lambda: f64,
) -> Result<CoefficientMatrix> {
    if !data.is_centered() {
        return Err(Error::Config("update_beta requires centered data".into()));
    }
    let xtx = data.x().t().dot(data.x());
    let xty = data.x().t().dot(data.y());
    let paths = leaf_paths(tree);
    beta_given_duals(&xtx, &xty, duals, tree, lambda, &paths)
}

fn leaf_paths(tree: &OutputTree) -> Vec<Vec<usize>> {
    (0..tree.num_outputs()).map(|k| tree.path_to_root(k)).collect()
}

fn beta_given_duals(
    xtx: &Array2<f64>,
    xty: &Array2<f64>,
    duals: &DualWeights,
    tree: &OutputTree,
    lambda: f64,
    paths: &[Vec<usize>],
) -> Result<CoefficientMatrix> {
    let j_inputs = xtx.nrows();
    let k_outputs = xty.ncols();
    if duals.d.nrows() != j_inputs || duals.d.ncols() != tree.num_nodes() {
        return Err(Error::Dimension(format!(
            "duals are {}x{}, expected {}x{}",
            duals.d.nrows(),
            duals.d.ncols(),
            j_inputs,
            tree.num_nodes()
        )));
    }
    if duals.d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Config("dual weights must be strictly positive".into()));
    }
    if lambda == 0.0 {
        // Plain least squares, one factorization shared by all columns.
        let factor = cholesky(xtx)?;
        return factor.solve_columns(xty);
    }
    let w2: Vec<f64> = tree.nodes().iter().map(|n| n.derived_w * n.derived_w).collect();
    let columns: Result<Vec<Array1<f64>>> = (0..k_outputs)
        .into_par_iter()
        .map(|k| {
            let mut a = xtx.clone();
            for j in 0..j_inputs {
                let ridge: f64 = paths[k].iter().map(|&v| w2[v] / duals.d[(j, v)]).sum();
                a[(j, j)] += lambda * ridge;
            }
            cholesky(&a)?.solve(xty.column(k))
        })
        .collect();
    let columns = columns?;
    let mut b = Array2::zeros((j_inputs, k_outputs));
    for (k, col) in columns.into_iter().enumerate() {
        b.column_mut(k).assign(&col);
    }
    Ok(b)
}

/// Fits the tree-guided group lasso by alternating the dual and coefficient
/// updates from a ridge initialization until the relative objective change
/// drops below `config.tol` (or `max_iter` is reached, reported through
/// `converged = false`, never an error). Deterministic given its inputs.
pub fn fit(data: &DataSet, tree: &OutputTree, config: &SolverConfig) -> Result<FitResult> {
    config.check()?;
    if !data.is_centered() {
        return Err(Error::Config("fit requires centered data".into()));
    }
    data.check_finite()?;
    if tree.num_outputs() != data.num_outputs() {
        return Err(Error::Dimension(format!(
            "tree has {} outputs but data has {}",
            tree.num_outputs(),
            data.num_outputs()
        )));
    }

    let xtx = data.x().t().dot(data.x());
    let xty = data.x().t().dot(data.y());
    let paths = leaf_paths(tree);

    // Ridge start with a uniform penalty of the same strength, so the first
    // dual update sees a nonzero coefficient matrix.
    let mut init = xtx.clone();
    for j in 0..init.nrows() {
        init[(j, j)] += config.lambda;
    }
    let factor = cholesky(&init).map_err(|e| match e {
        Error::Solver(msg) if config.lambda == 0.0 => Error::Solver(format!(
            "X^T X is rank deficient and lambda = 0 gives no regularization: {msg}"
        )),
        other => other,
    })?;
    let mut b = factor.solve_columns(&xty)?;

    let mut trace = vec![objective(data, &b.view(), tree, config.lambda)?];
    let mut duals = update_duals(&b.view(), tree, config);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        duals = update_duals(&b.view(), tree, config);
        b = beta_given_duals(&xtx, &xty, &duals, tree, config.lambda, &paths)?;
        let obj = objective(data, &b.view(), tree, config.lambda)?;
        let prev = *trace.last().unwrap();
        trace.push(obj);
        iterations += 1;
        if (prev - obj).abs() <= config.tol * prev.abs().max(1e-12) {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        b,
        objective_trace: trace,
        duals,
        iterations,
        converged,
        lambda: config.lambda,
    })
}

/// Centers `x_new` by the training input means and returns predictions with
/// the training output means added back.
pub fn predict(
    x_new: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    x_means: &Array1<f64>,
    y_means: &Array1<f64>,
) -> Result<Array2<f64>> {
    if x_new.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "x_new has {} columns but the model has {} inputs",
            x_new.ncols(),
            b.nrows()
        )));
    }
    if x_means.len() != b.nrows() || y_means.len() != b.ncols() {
        return Err(Error::Dimension("means do not match the coefficient matrix".into()));
    }
    let centered = x_new.to_owned() - &x_means.view().insert_axis(Axis(0));
    let mut pred = centered.dot(b);
    pred += &y_means.view().insert_axis(Axis(0));
    Ok(pred)
}

/// The default cross-validation grid: 30 log-spaced points over [1e-3, 1e3].
pub fn default_lambda_grid() -> Vec<f64> {
    let n = 30;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// K-fold cross-validation over a lambda grid. Rows are shuffled
/// deterministically from `seed`, folds are contiguous chunks of the
/// shuffled order, and each training fold is centered on its own rows.
/// Returns the winning lambda (ties broken toward the larger value) and the
/// full table.
pub fn cross_validate(
    data: &DataSet,
    tree: &OutputTree,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    base: &SolverConfig,
) -> Result<(f64, Vec<CvRow>)> {
    if lambda_grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let n = data.num_samples();
    if n / folds < 2 {
        return Err(Error::Config(format!(
            "{n} samples over {folds} folds leaves folds smaller than 2 rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let val: Vec<usize> = order[bounds[f]..bounds[f + 1]].to_vec();
            let train: Vec<usize> = order[..bounds[f]]
                .iter()
                .chain(order[bounds[f + 1]..].iter())
                .copied()
                .collect();
            (train, val)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..lambda_grid.len())
        .flat_map(|li| (0..folds).map(move |f| (li, f)))
        .collect();
    let mse: Result<Vec<f64>> = jobs
        .par_iter()
        .map(|&(li, f)| {
            let (train_rows, val_rows) = &splits[f];
            let train = crate::dataset::center_columns(data.select_rows(train_rows)?)?;
            let config = SolverConfig {
                lambda: lambda_grid[li],
                ..base.clone()
            };
            let result = fit(&train, tree, &config)?;
            let x_val = data.x().select(Axis(0), val_rows);
            let y_val = data.y().select(Axis(0), val_rows);
            let pred = predict(
                &x_val.view(),
                &result.b.view(),
                train.x_means(),
                train.y_means(),
            )?;
            crate::eval::test_mse(&pred.view(), &y_val.view())
        })
        .collect();
    let mse = mse?;

    let mut table = Vec::with_capacity(lambda_grid.len());
    for (li, &lambda) in lambda_grid.iter().enumerate() {
        let fold_mse: Vec<f64> = (0..folds).map(|f| mse[li * folds + f]).collect();
        let mean_mse = fold_mse.iter().sum::<f64>() / folds as f64;
        table.push(CvRow { lambda, mean_mse, fold_mse });
    }
    let mut best = &table[0];
    for row in &table[1..] {
        if row.mean_mse < best.mean_mse
            || (row.mean_mse == best.mean_mse && row.lambda > best.lambda)
        {
            best = row;
        }
    }
    Ok((best.lambda, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tests::example_tree;
    use crate::tree::{make_l1l2_tree, make_lasso_tree};
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};

    fn small_data(seed: u64, n: usize, j: usize, k: usize) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, j), |_| rng.gen_range(-1.0..1.0));
        let b = Array2::from_shape_fn((j, k), |_| rng.gen_range(-1.0..1.0));
        let noise = Array2::from_shape_fn((n, k), |_| rng.gen_range(-0.1..0.1));
        let y = x.dot(&b) + noise;
        DataSet::centered(x, y).unwrap()
    }

    #[test]
    fn objective_zero_coefficients() {
        let data = small_data(1, 20, 2, 2);
        let tree = make_lasso_tree(2).unwrap();
        let b = Array2::zeros((2, 2));
        let obj = objective(&data, &b.view(), &tree, 3.0).unwrap();
        let yty: f64 = data.y().iter().map(|v| v * v).sum();
        assert!((obj - yty).abs() < 1e-10);
    }

    #[test]
    fn objective_matches_hand_assembly() {
        let data = small_data(2, 20, 2, 2);
        let tree = make_l1l2_tree(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Array2::from_shape_fn((2, 2), |_| rng.gen_range(-1.0..1.0));
        let lambda = 0.7;
        let resid = data.y() - &data.x().dot(&b);
        let rss: f64 = resid.iter().map(|v| v * v).sum();
        let pen = crate::penalty::penalty_flat(&b.view(), &tree).unwrap();
        let expect = rss + lambda * pen * pen;
        assert!((objective(&data, &b.view(), &tree, lambda).unwrap() - expect).abs() < 1e-10);
        // lambda = 0 is the pure residual.
        assert!((objective(&data, &b.view(), &tree, 0.0).unwrap() - rss).abs() < 1e-10);
    }

    #[test]
    fn duals_normalize_by_hand() {
        // Lasso tree over 2 outputs: leaf weights 1, root weight 0.
        // beta = (3, 1) gives a = (3, 1, 0) -> d ~ (0.75, 0.25, ~0).
        let tree = make_lasso_tree(2).unwrap();
        let b = arr2(&[[3.0, 1.0]]);
        let config = SolverConfig::new(1.0).unwrap();
        let duals = update_duals(&b.view(), &tree, &config);
        assert!(!duals.degenerate);
        assert!((duals.d[(0, 0)] - 0.75).abs() < 1e-9);
        assert!((duals.d[(0, 1)] - 0.25).abs() < 1e-9);
        assert!(duals.d[(0, 2)] < 1e-9);
        assert!((duals.d.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_groups_give_uniform_duals() {
        let tree = make_lasso_tree(2).unwrap();
        let b = arr2(&[[2.0, 2.0], [-2.0, 2.0]]);
        let config = SolverConfig::new(1.0).unwrap();
        let duals = update_duals(&b.view(), &tree, &config);
        // Four leaf entries share the mass; the two root entries are floored.
        for j in 0..2 {
            for v in 0..2 {
                assert!((duals.d[(j, v)] - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_coefficients_degenerate_duals() {
        let tree = make_lasso_tree(2).unwrap();
        let b = Array2::zeros((3, 2));
        let config = SolverConfig::new(1.0).unwrap();
        let duals = update_duals(&b.view(), &tree, &config);
        assert!(duals.degenerate);
        let uniform = 1.0 / (3.0 * 3.0);
        assert!(duals.d.iter().all(|&v| (v - uniform).abs() < 1e-15));
    }

    #[test]
    fn beta_update_at_lambda_zero_is_ols() {
        let data = small_data(4, 30, 3, 2);
        let tree = make_lasso_tree(2).unwrap();
        let config = SolverConfig::new(0.0).unwrap();
        let duals = update_duals(&Array2::ones((3, 2)).view(), &tree, &config);
        let b = update_beta(&data, &duals, &tree, 0.0).unwrap();
        // Independent route: solve the normal equations by Gauss elimination.
        let xtx = data.x().t().dot(data.x());
        let xty = data.x().t().dot(data.y());
        let ols = gauss_solve(&xtx, &xty);
        for (u, v) in b.iter().zip(ols.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn beta_update_matches_direct_inverse() {
        // J=2, K=1: compare against an explicit 2x2 inverse.
        let data = small_data(5, 20, 2, 1);
        let tree = make_lasso_tree(1).unwrap();
        let config = SolverConfig::new(2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b0 = Array2::from_shape_fn((2, 1), |_| rng.gen_range(0.5..1.5));
        let duals = update_duals(&b0.view(), &tree, &config);
        let b = update_beta(&data, &duals, &tree, 2.5).unwrap();

        let xtx = data.x().t().dot(data.x());
        let xty = data.x().t().dot(data.y());
        // Output 0 sits in both the leaf and root groups.
        let ridge_j = |j: usize| -> f64 {
            let w_leaf = tree.node(0).derived_w;
            let w_root = tree.node(1).derived_w;
            w_leaf * w_leaf / duals.d[(j, 0)] + w_root * w_root / duals.d[(j, 1)]
        };
        let a00 = xtx[(0, 0)] + 2.5 * ridge_j(0);
        let a11 = xtx[(1, 1)] + 2.5 * ridge_j(1);
        let a01 = xtx[(0, 1)];
        let det = a00 * a11 - a01 * a01;
        let b0_expect = (a11 * xty[(0, 0)] - a01 * xty[(1, 0)]) / det;
        let b1_expect = (a00 * xty[(1, 0)] - a01 * xty[(0, 0)]) / det;
        assert!((b[(0, 0)] - b0_expect).abs() < 1e-10);
        assert!((b[(1, 0)] - b1_expect).abs() < 1e-10);
    }

    #[test]
    fn beta_update_huge_lambda_shrinks_to_zero() {
        let data = small_data(7, 20, 3, 2);
        let tree = make_l1l2_tree(2).unwrap();
        let config = SolverConfig::new(1.0).unwrap();
        let b0 = Array2::ones((3, 2));
        let duals = update_duals(&b0.view(), &tree, &config);
        let b = update_beta(&data, &duals, &tree, 1e12).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn fit_zero_outputs_gives_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((20, 3), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::zeros((20, 3));
        let data = DataSet::centered(x, y).unwrap();
        let tree = example_tree(0.5, 0.5);
        let result = fit(&data, &tree, &SolverConfig::new(1.0).unwrap()).unwrap();
        assert!(result.converged);
        assert!(result.b.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn fit_single_coefficient_matches_ridge_closed_form() {
        // K = J = 1 with a lasso tree: squared penalty = b^2, so the global
        // minimizer is plain ridge regression.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((25, 1), |_| rng.gen_range(-1.0..1.0));
        let y = x.mapv(|v| 0.8 * v) + Array2::from_shape_fn((25, 1), |_| rng.gen_range(-0.05..0.05));
        let data = DataSet::centered(x, y).unwrap();
        let tree = make_lasso_tree(1).unwrap();
        let lambda = 3.0;
        let config = SolverConfig::new(lambda).unwrap().with_tol(1e-12);
        let result = fit(&data, &tree, &config).unwrap();
        let xtx = data.x().t().dot(data.x())[(0, 0)];
        let xty = data.x().t().dot(data.y())[(0, 0)];
        let ridge = xty / (xtx + lambda);
        assert!(result.converged);
        assert!((result.b[(0, 0)] - ridge).abs() < 1e-6);
    }

    #[test]
    fn fit_trace_is_monotone() {
        let data = small_data(10, 25, 4, 3);
        let tree = example_tree(0.5, 0.5);
        let result = fit(&data, &tree, &SolverConfig::new(2.0).unwrap()).unwrap();
        assert!(result.converged);
        for pair in result.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10);
        }
    }

    #[test]
    fn rank_deficient_ols_reports_solver_error() {
        // J > N at lambda = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((3, 5), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-1.0..1.0));
        let data = DataSet::centered(x, y).unwrap();
        let tree = make_lasso_tree(2).unwrap();
        let err = fit(&data, &tree, &SolverConfig::new(0.0).unwrap());
        match err {
            Err(Error::Solver(msg)) => assert!(msg.contains("rank deficient")),
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_data_rejected() {
        let mut x = Array2::ones((4, 2));
        x[(0, 0)] = f64::NAN;
        let y = Array2::ones((4, 2));
        let data = DataSet::centered(x, y).unwrap();
        let tree = make_lasso_tree(2).unwrap();
        assert!(matches!(
            fit(&data, &tree, &SolverConfig::new(1.0).unwrap()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn predict_zero_coefficients_returns_means() {
        let data = small_data(12, 20, 2, 2);
        let b = Array2::zeros((2, 2));
        let x_new = Array2::ones((3, 2));
        let pred = predict(&x_new.view(), &b.view(), data.x_means(), data.y_means()).unwrap();
        for row in pred.rows() {
            for (p, m) in row.iter().zip(data.y_means().iter()) {
                assert!((p - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predict_roundtrips_noiseless_training_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((30, 3), |_| rng.gen_range(0.0..2.0));
        let b_true = arr2(&[[0.5, -1.0], [2.0, 0.0], [0.0, 1.0]]);
        let y = x.dot(&b_true);
        let raw_x = x.clone();
        let raw_y = y.clone();
        let data = DataSet::centered(x, y).unwrap();
        let tree = make_lasso_tree(2).unwrap();
        let result = fit(&data, &tree, &SolverConfig::new(0.0).unwrap()).unwrap();
        let pred = predict(&raw_x.view(), &result.b.view(), data.x_means(), data.y_means()).unwrap();
        for (p, t) in pred.iter().zip(raw_y.iter()) {
            assert!((p - t).abs() < 1e-8);
        }
    }

    #[test]
    fn predict_rejects_column_mismatch() {
        let b = Array2::zeros((2, 2));
        let x_new = Array2::ones((3, 4));
        let means = ndarray::Array1::zeros(2);
        assert!(predict(&x_new.view(), &b.view(), &means, &means).is_err());
    }

    #[test]
    fn cv_single_lambda_is_returned() {
        let data = small_data(14, 24, 2, 2);
        let tree = make_lasso_tree(2).unwrap();
        let config = SolverConfig::new(1.0).unwrap();
        let (best, table) = cross_validate(&data, &tree, &[0.37], 3, 0, &config).unwrap();
        assert_eq!(best, 0.37);
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn cv_pure_noise_prefers_heavy_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = Array2::from_shape_fn((40, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((40, 2), |_| rng.gen_range(-1.0..1.0));
        let data = DataSet::new(x, y).unwrap();
        let tree = make_lasso_tree(2).unwrap();
        let grid: Vec<f64> = (0..8).map(|i| 10f64.powf(-2.0 + i as f64 * 0.7)).collect();
        let config = SolverConfig::new(1.0).unwrap();
        let (best, _) = cross_validate(&data, &tree, &grid, 4, 0, &config).unwrap();
        let rank = grid.iter().position(|&l| l == best).unwrap();
        assert!(rank >= grid.len() * 3 / 4 - 1, "best lambda {best} not in top quartile");
    }

    #[test]
    fn cv_rejects_bad_folds() {
        let data = small_data(16, 10, 2, 2);
        let tree = make_lasso_tree(2).unwrap();
        let config = SolverConfig::new(1.0).unwrap();
        assert!(cross_validate(&data, &tree, &[1.0], 1, 0, &config).is_err());
        assert!(cross_validate(&data, &tree, &[1.0], 9, 0, &config).is_err());
        assert!(cross_validate(&data, &tree, &[], 3, 0, &config).is_err());
    }

    #[test]
    fn column_decoupling_with_frozen_duals() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((25, 3), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((25, 3), |_| rng.gen_range(-1.0..1.0));
        let mut y_perturbed = y.clone();
        for (i, v) in y_perturbed.column_mut(2).iter_mut().enumerate() {
            *v += 0.1 * i as f64;
        }
        let data = DataSet::centered(x.clone(), y).unwrap();
        let perturbed = DataSet::centered(x, y_perturbed).unwrap();

        let tree = example_tree(0.5, 0.5);
        let config = SolverConfig::new(1.5).unwrap();
        let b0 = Array2::ones((3, 3));
        let duals = update_duals(&b0.view(), &tree, &config);
        let b_a = update_beta(&data, &duals, &tree, 1.5).unwrap();
        let b_b = update_beta(&perturbed, &duals, &tree, 1.5).unwrap();
        for k in 0..2 {
            for j in 0..3 {
                assert!((b_a[(j, k)] - b_b[(j, k)]).abs() < 1e-10);
            }
        }
        assert!((0..3).any(|j| (b_a[(j, 2)] - b_b[(j, 2)]).abs() > 1e-6));
    }

    fn gauss_solve(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        let n = a.nrows();
        let m = b.ncols();
        let mut aug = Array2::zeros((n, n + m));
        aug.slice_mut(ndarray::s![.., ..n]).assign(a);
        aug.slice_mut(ndarray::s![.., n..]).assign(b);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| aug[(p, col)].abs().partial_cmp(&aug[(q, col)].abs()).unwrap())
                .unwrap();
            if pivot != col {
                for c in 0..n + m {
                    let tmp = aug[(col, c)];
                    aug[(col, c)] = aug[(pivot, c)];
                    aug[(pivot, c)] = tmp;
                }
            }
            let p = aug[(col, col)];
            for r in 0..n {
                if r != col {
                    let f = aug[(r, col)] / p;
                    for c in 0..n + m {
                        aug[(r, c)] -= f * aug[(col, c)];
                    }
                }
            }
        }
        let mut x = Array2::zeros((n, m));
        for r in 0..n {
            for c in 0..m {
                x[(r, c)] = aug[(r, n + c)] / aug[(r, r)];
            }
        }
        x
    }
}
