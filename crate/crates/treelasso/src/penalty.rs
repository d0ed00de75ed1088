//! Evaluation of the tree-guided group lasso penalty.
//!
//! Both forms exclude the regularization strength `lambda`, which multiplies
//! the penalty only in the objective. The flat form sums weighted group norms
//! directly; the recursive form expands the per-node (s, g) combination from
//! the root down. They agree to rounding for any valid tree.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::tree::OutputTree;

fn check_dims(b: &ArrayView2<f64>, tree: &OutputTree) -> Result<()> {
    if b.ncols() != tree.num_outputs() {
        return Err(Error::Dimension(format!(
            "coefficient matrix has {} columns but the tree has {} outputs",
            b.ncols(),
            tree.num_outputs()
        )));
    }
    Ok(())
}

fn group_norm(b: &ArrayView2<f64>, j: usize, group: &[usize]) -> f64 {
    let row = b.row(j);
    group.iter().map(|&k| row[k] * row[k]).sum::<f64>().sqrt()
}

/// `sum_j sum_v w_v * ||beta^j_{G_v}||_2` over all nodes of the tree.
pub fn penalty_flat(b: &ArrayView2<f64>, tree: &OutputTree) -> Result<f64> {
    check_dims(b, tree)?;
    let mut total = 0.0;
    for j in 0..b.nrows() {
        for node in tree.nodes() {
            if node.derived_w != 0.0 {
                total += node.derived_w * group_norm(b, j, &node.group);
            }
        }
    }
    Ok(total)
}

/// Same penalty through the root-down recursion
/// `W_j(v) = s_v * sum_c |W_j(c)| + g_v * ||beta^j_{G_v}||_2`,
/// with `W_j(leaf) = sum_{m in G_v} |beta^j_m|`.
pub fn penalty_recursive(b: &ArrayView2<f64>, tree: &OutputTree) -> Result<f64> {
    check_dims(b, tree)?;
    if tree.has_direct_weights() {
        return Err(Error::Config(
            "recursive form needs (s, g) weights, tree has direct weights".into(),
        ));
    }
    let mut total = 0.0;
    for j in 0..b.nrows() {
        total += w_rec(b, j, tree, tree.root());
    }
    Ok(total)
}

fn w_rec(b: &ArrayView2<f64>, j: usize, tree: &OutputTree, v: usize) -> f64 {
    let node = tree.node(v);
    if node.is_leaf() {
        node.group.iter().map(|&m| b[(j, m)].abs()).sum()
    } else {
        let child_sum: f64 = node
            .children
            .iter()
            .map(|&c| w_rec(b, j, tree, c).abs())
            .sum();
        node.s * child_sum + node.g * group_norm(b, j, &node.group)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tests::example_tree;
    use crate::tree::{make_l1l2_tree, make_lasso_tree};
    use ndarray::arr2;

    #[test]
    fn zero_matrix_zero_penalty() {
        let t = example_tree(0.5, 0.5);
        let b = arr2(&[[0.0, 0.0, 0.0]]);
        assert_eq!(penalty_flat(&b.view(), &t).unwrap(), 0.0);
        assert_eq!(penalty_recursive(&b.view(), &t).unwrap(), 0.0);
    }

    #[test]
    fn example_tree_hand_value() {
        // w = {leaf0: .25, leaf1: .25, leaf2: .5, v4: .25, root: .5};
        // beta = (3, 4, 0): .25*3 + .25*4 + .5*0 + .25*5 + .5*5 = 5.5
        let t = example_tree(0.5, 0.5);
        let b = arr2(&[[3.0, 4.0, 0.0]]);
        let flat = penalty_flat(&b.view(), &t).unwrap();
        assert!((flat - 5.5).abs() < 1e-12);
        let rec = penalty_recursive(&b.view(), &t).unwrap();
        assert!((rec - 5.5).abs() < 1e-12);
    }

    #[test]
    fn lasso_degenerate_is_l1() {
        let t = example_tree(1.0, 1.0);
        let b = arr2(&[[1.0, -2.0, 3.0]]);
        assert!((penalty_flat(&b.view(), &t).unwrap() - 6.0).abs() < 1e-12);
        let t = make_lasso_tree(3).unwrap();
        assert!((penalty_flat(&b.view(), &t).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn l1l2_degenerate_is_row_norm() {
        let t = make_l1l2_tree(3).unwrap();
        let b = arr2(&[[3.0, 4.0, 0.0]]);
        assert!((penalty_flat(&b.view(), &t).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_leaf_tree_is_elastic_net_form() {
        // s_root(|b1| + |b2|) + g_root * sqrt(b1^2 + b2^2)
        let (s, g) = (0.3, 0.7);
        let t = crate::tree::OutputTree::from_parts(
            2,
            vec![(vec![], 1.0, 0.0), (vec![], 1.0, 0.0), (vec![0, 1], s, g)],
        )
        .unwrap();
        let b = arr2(&[[1.5, -2.0]]);
        let expect = s * (1.5 + 2.0) + g * (1.5f64 * 1.5 + 4.0).sqrt();
        assert!((penalty_flat(&b.view(), &t).unwrap() - expect).abs() < 1e-12);
        assert!((penalty_recursive(&b.view(), &t).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let t = example_tree(0.5, 0.5);
        let b = arr2(&[[1.0, 2.0]]);
        assert!(penalty_flat(&b.view(), &t).is_err());
        assert!(penalty_recursive(&b.view(), &t).is_err());
    }

    #[test]
    fn multiple_inputs_sum() {
        let t = example_tree(0.5, 0.5);
        let b = arr2(&[[3.0, 4.0, 0.0], [3.0, 4.0, 0.0]]);
        assert!((penalty_flat(&b.view(), &t).unwrap() - 11.0).abs() < 1e-12);
    }
}
