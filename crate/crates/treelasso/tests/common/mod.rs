//! Shared helpers for the integration suites: a random-tree generator and a
//! brute-force minimizer used as an independent oracle for the solver.
//!
//! Each integration target compiles its own copy, so not every helper is
//! used from every target.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treelasso::dataset::DataSet;
use treelasso::tree::OutputTree;

/// Random tree over `k` leaves: repeatedly merges 2..=4 remaining roots
/// under a fresh internal node with s drawn uniformly from [0, 1].
pub fn random_tree(k: usize, rng: &mut ChaCha8Rng) -> OutputTree {
    assert!(k >= 1);
    let mut parts: Vec<(Vec<usize>, f64, f64)> = (0..k).map(|_| (vec![], 1.0, 0.0)).collect();
    let mut roots: Vec<usize> = (0..k).collect();
    while roots.len() > 1 {
        let take = rng.gen_range(2..=4.min(roots.len()));
        let mut children = Vec::with_capacity(take);
        for _ in 0..take {
            let i = rng.gen_range(0..roots.len());
            children.push(roots.swap_remove(i));
        }
        let s: f64 = rng.gen_range(0.0..=1.0);
        let id = parts.len();
        parts.push((children, s, 1.0 - s));
        roots.push(id);
    }
    OutputTree::from_parts(k, parts).expect("generated tree is valid")
}

/// Random coefficient matrix with entries uniform in [-range, range].
pub fn random_b(j: usize, k: usize, range: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((j, k), |_| rng.gen_range(-range..=range))
}

/// The squared-penalty objective computed from scratch: residual sum of
/// squares plus lambda times the square of the weighted group-norm sum,
/// with each node's weight rebuilt from ancestor s-products.
pub fn oracle_objective(data: &DataSet, tree: &OutputTree, lambda: f64, b: &Array2<f64>) -> f64 {
    let resid = data.y() - &data.x().dot(b);
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let mut penalty = 0.0;
    for j in 0..b.nrows() {
        for node in tree.nodes() {
            // Ancestor s-product, times g for internal nodes.
            let mut w = if node.is_leaf() { 1.0 } else { node.g };
            let mut cur = node.id;
            while let Some(p) = tree.parent(cur) {
                w *= tree.node(p).s;
                cur = p;
            }
            let norm: f64 = node
                .group
                .iter()
                .map(|&k| b[(j, k)] * b[(j, k)])
                .sum::<f64>()
                .sqrt();
            penalty += w * norm;
        }
    }
    rss + lambda * penalty * penalty
}

/// Compass (pattern) search from one starting point: convex objective, so
/// shrinking the mesh to `min_step` lands within mesh size of the minimizer.
fn compass_search(
    data: &DataSet,
    tree: &OutputTree,
    lambda: f64,
    mut b: Array2<f64>,
    init_step: f64,
    min_step: f64,
) -> f64 {
    let mut best = oracle_objective(data, tree, lambda, &b);
    let coords: Vec<(usize, usize)> = (0..b.nrows())
        .flat_map(|j| (0..b.ncols()).map(move |k| (j, k)))
        .collect();
    let mut step = init_step;
    while step >= min_step {
        let mut improved = false;
        for &(j, k) in &coords {
            let orig = b[(j, k)];
            for cand in [orig + step, orig - step] {
                b[(j, k)] = cand;
                let val = oracle_objective(data, tree, lambda, &b);
                if val < best {
                    best = val;
                    improved = true;
                    break;
                }
                b[(j, k)] = orig;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Brute-force minimum of the squared-penalty objective over all of B,
/// independent of the solver: multi-start compass search.
pub fn oracle_minimum(data: &DataSet, tree: &OutputTree, lambda: f64, seed: u64) -> f64 {
    let j = data.num_inputs();
    let k = data.num_outputs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![Array2::zeros((j, k))];
    for _ in 0..3 {
        starts.push(random_b(j, k, 1.0, &mut rng));
    }
    starts
        .into_iter()
        .map(|b| compass_search(data, tree, lambda, b, 1.0, 1e-8))
        .fold(f64::INFINITY, f64::min)
}
