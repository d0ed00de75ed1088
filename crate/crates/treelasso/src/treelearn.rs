//! Learning an output tree from data: Pearson correlation of the outputs,
//! average-linkage (UPGMA) agglomerative clustering of `1 - r` distances,
//! height normalization to put the root at one, and `(s, g)` assignment with
//! rho-pruning of weak-correlation nodes.
//!
//! Pruning neutralizes a node's joint-selection weight (`s = 1, g = 0`)
//! instead of deleting it, so the result is still a single tree whose group
//! weights sum to one for every output.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::tree::{OutputTree, TreeFile, TreeFileNode};

/// One agglomerative merge. `left`/`right` are cluster ids: original leaves
/// are `0..K`, the cluster created by merge `m` is `K + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// A stepwise dendrogram: `K - 1` merges with non-decreasing heights.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_count: usize,
    /// Merge heights divided by the root height; filled by
    /// [`normalize_and_assign`].
    pub normalized_heights: Option<Vec<f64>>,
}

impl Dendrogram {
    pub fn root_height(&self) -> f64 {
        self.merges.last().map(|m| m.height).unwrap_or(0.0)
    }
}

/// Pearson correlation matrix of the columns of `y` (N x K).
pub fn correlation_matrix(y: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = y.nrows();
    let k = y.ncols();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 samples, got {n}")));
    }
    let mut centered = y.to_owned();
    let mut sds = Vec::with_capacity(k);
    for (idx, mut col) in centered.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        if ss <= 0.0 {
            return Err(Error::Input(format!(
                "column {idx} is constant; its correlation is undefined"
            )));
        }
        sds.push(ss.sqrt());
    }
    let mut corr = centered.t().dot(&centered);
    for a in 0..k {
        for b in 0..k {
            corr[(a, b)] /= sds[a] * sds[b];
        }
    }
    // Clean up rounding on the diagonal and enforce exact symmetry.
    for a in 0..k {
        corr[(a, a)] = 1.0;
        for b in 0..a {
            let avg = 0.5 * (corr[(a, b)] + corr[(b, a)]);
            corr[(a, b)] = avg;
            corr[(b, a)] = avg;
        }
    }
    Ok(corr)
}

/// Distance transform used for tree learning: `1 - r`, in `[0, 2]`.
pub fn correlation_distance(corr: &ArrayView2<f64>) -> Array2<f64> {
    let mut dist = corr.mapv(|r| 1.0 - r);
    for a in 0..dist.nrows() {
        dist[(a, a)] = 0.0;
    }
    dist
}

/// Average-linkage (UPGMA) clustering of a symmetric non-negative distance
/// matrix with a zero diagonal. Minimum-distance ties are broken toward the
/// lexicographically smallest (cluster id, cluster id) pair, so the merge
/// sequence is reproducible.
pub fn agglomerative_cluster(dist: &ArrayView2<f64>) -> Result<Dendrogram> {
    let k = dist.nrows();
    if dist.ncols() != k || k == 0 {
        return Err(Error::Dimension(format!(
            "distance matrix must be square and non-empty, got {}x{}",
            k,
            dist.ncols()
        )));
    }
    for a in 0..k {
        if dist[(a, a)] != 0.0 {
            return Err(Error::Input(format!("distance diagonal entry {a} is not zero")));
        }
        for b in 0..k {
            let d = dist[(a, b)];
            if !(d >= 0.0) {
                return Err(Error::Input(format!(
                    "distance ({a}, {b}) is negative or NaN: {d}"
                )));
            }
            if (d - dist[(b, a)]).abs() > 1e-12 {
                return Err(Error::Input(format!("distance matrix is asymmetric at ({a}, {b})")));
            }
        }
    }

    // Working copy indexed by "slots"; a merged pair collapses into the lower
    // slot and the higher slot is retired.
    let mut d = dist.to_owned();
    let mut active: Vec<bool> = vec![true; k];
    let mut cluster_id: Vec<usize> = (0..k).collect();
    let mut size: Vec<f64> = vec![1.0; k];
    let mut merges = Vec::with_capacity(k.saturating_sub(1));

    for step in 0..k.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..k {
            if !active[i] {
                continue;
            }
            for j in i + 1..k {
                if !active[j] {
                    continue;
                }
                let dij = d[(i, j)];
                let (lo, hi) = if cluster_id[i] < cluster_id[j] {
                    (cluster_id[i], cluster_id[j])
                } else {
                    (cluster_id[j], cluster_id[i])
                };
                let candidate = (dij, lo, hi, i, j);
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        dij < *bd || (dij == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        let (height, lo, hi, i, j) = best.expect("at least two active clusters");
        merges.push(Merge { left: lo, right: hi, height });

        // UPGMA: size-weighted average of the merged clusters' distances.
        let (si, sj) = (size[i], size[j]);
        for m in 0..k {
            if m != i && m != j && active[m] {
                let avg = (si * d[(i, m)] + sj * d[(j, m)]) / (si + sj);
                d[(i, m)] = avg;
                d[(m, i)] = avg;
            }
        }
        active[j] = false;
        size[i] = si + sj;
        cluster_id[i] = k + step;
    }

    Ok(Dendrogram {
        merges,
        leaf_count: k,
        normalized_heights: None,
    })
}

/// Converts a dendrogram into an [`OutputTree`]: heights are divided by the
/// root height, internal node `v` gets `g_v = h'_v` and `s_v = 1 - h'_v`,
/// and internal nodes with `h'_v > rho` are neutralized (`s = 1, g = 0`) so
/// their joint-selection groups carry zero weight. The normalized heights
/// are recorded on the dendrogram.
pub fn normalize_and_assign(dend: &mut Dendrogram, rho: f64) -> Result<OutputTree> {
    if !(rho > 0.0) {
        return Err(Error::Config(format!("rho must be positive, got {rho}")));
    }
    let k = dend.leaf_count;
    if dend.merges.len() + 1 != k {
        return Err(Error::Input(format!(
            "dendrogram over {k} leaves must have {} merges, found {}",
            k - 1,
            dend.merges.len()
        )));
    }
    let mut nodes: Vec<TreeFileNode> = (0..k)
        .map(|id| TreeFileNode {
            id,
            children: vec![],
            s: Some(1.0),
            g: Some(0.0),
            w: None,
            group: None,
        })
        .collect();
    if k == 1 {
        dend.normalized_heights = Some(vec![]);
        return OutputTree::from_spec(&TreeFile { num_outputs: 1, nodes });
    }
    let root_height = dend.root_height();
    if !(root_height > 0.0) {
        return Err(Error::Input(
            "root height is zero; all outputs merged at distance zero".into(),
        ));
    }
    let normalized: Vec<f64> = dend.merges.iter().map(|m| m.height / root_height).collect();
    for (m, merge) in dend.merges.iter().enumerate() {
        let h = normalized[m];
        let (s, g) = if h > rho { (1.0, 0.0) } else { (1.0 - h, h) };
        nodes.push(TreeFileNode {
            id: k + m,
            children: vec![merge.left, merge.right],
            s: Some(s),
            g: Some(g),
            w: None,
            group: None,
        });
    }
    dend.normalized_heights = Some(normalized);
    OutputTree::from_spec(&TreeFile { num_outputs: k, nodes })
}
