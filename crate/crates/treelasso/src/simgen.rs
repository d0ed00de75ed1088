//! Synthetic benchmark generation: genotype-style inputs uniform over
//! {0, 1, 2}, a balanced output tree, block-sparse true coefficients whose
//! nonzero blocks follow the tree's groups, and Gaussian noise.
//!
//! All randomness flows through ChaCha8 seeded from the spec, with
//! per-purpose subseeds derived by a splitmix64 step (see [`subseed`] and
//! [`replicate_seed`]), so outputs are bit-reproducible.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::tree::OutputTree;
use crate::CoefficientMatrix;

/// Parameters of one simulation scenario.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub j_inputs: usize,
    pub k_outputs: usize,
    /// Children per node at each depth; the product is `k_outputs` and the
    /// length is the tree height.
    pub branching: Vec<usize>,
    /// Value written into every nonzero entry of the true coefficients.
    pub signal: f64,
    pub noise_sd: f64,
    /// How many input columns are causal for each selected group.
    pub causal_inputs_per_group: usize,
    /// Tree depths whose groups receive causal inputs (root = depth 0,
    /// leaves = depth `branching.len()`).
    pub active_levels: BTreeSet<usize>,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            n_train: 150,
            n_test: 50,
            j_inputs: 200,
            k_outputs: 60,
            branching: vec![3, 2, 5, 2],
            signal: 0.4,
            noise_sd: 1.0,
            causal_inputs_per_group: 2,
            active_levels: [1, 2, 3].into_iter().collect(),
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn check(&self) -> Result<()> {
        if self.branching.iter().product::<usize>() != self.k_outputs {
            return Err(Error::Config(format!(
                "branching {:?} does not multiply to k_outputs = {}",
                self.branching, self.k_outputs
            )));
        }
        if self.branching.iter().any(|&b| b < 1) {
            return Err(Error::Config("branching factors must be >= 1".into()));
        }
        if !(self.signal > 0.0) {
            return Err(Error::Config("signal must be > 0".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        if self.causal_inputs_per_group < 1 {
            return Err(Error::Config("causal_inputs_per_group must be >= 1".into()));
        }
        let height = self.branching.len();
        if self.active_levels.iter().any(|&d| d > height) {
            return Err(Error::Config(format!(
                "active levels {:?} exceed the tree height {height}",
                self.active_levels
            )));
        }
        if self.n_train < 2 || self.n_test < 1 || self.j_inputs < 1 {
            return Err(Error::Config("n_train >= 2, n_test >= 1, j_inputs >= 1 required".into()));
        }
        Ok(())
    }

    /// Copy of this spec with the seed replaced by the derived seed of one
    /// replicate.
    pub fn for_replicate(&self, replicate: u64) -> SimulationSpec {
        SimulationSpec {
            seed: replicate_seed(self.seed, replicate),
            ..self.clone()
        }
    }
}

/// splitmix64 finalizer over a seed/stream pair; the documented splitting
/// rule for all derived randomness in this crate.
pub fn subseed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `r`-th replicate of a run with base seed `base`.
pub fn replicate_seed(base: u64, replicate: u64) -> u64 {
    subseed(base.wrapping_add(1), replicate.wrapping_add(1))
}

/// N x J genotype matrix with entries independently uniform on {0, 1, 2}.
pub fn generate_genotypes(n: usize, j: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, j), |_| rng.gen_range(0..3u8) as f64)
}

/// Builds the balanced output tree (all internal nodes `s = g = 0.5`) and
/// the block-sparse true coefficient matrix: nodes at the active levels each
/// get a distinct block of `causal_inputs_per_group` inputs, disjoint across
/// groups, whose coefficients equal `signal` for every output in the group.
pub fn generate_true_structure(spec: &SimulationSpec) -> Result<(OutputTree, CoefficientMatrix)> {
    spec.check()?;
    let (tree, levels) = build_balanced_tree(spec.k_outputs, &spec.branching)?;

    let total_groups: usize = spec.active_levels.iter().map(|&d| levels[d].len()).sum();
    let needed = total_groups * spec.causal_inputs_per_group;
    if needed > spec.j_inputs {
        return Err(Error::Config(format!(
            "{total_groups} active groups x {} causal inputs need {needed} inputs, \
             only {} available",
            spec.causal_inputs_per_group, spec.j_inputs
        )));
    }

    let mut b_true = Array2::zeros((spec.j_inputs, spec.k_outputs));
    let mut next_input = 0;
    for &depth in &spec.active_levels {
        for &node_id in &levels[depth] {
            let group = &tree.node(node_id).group;
            for _ in 0..spec.causal_inputs_per_group {
                for &k in group {
                    b_true[(next_input, k)] = spec.signal;
                }
                next_input += 1;
            }
        }
    }
    Ok((tree, b_true))
}

/// Balanced tree plus node ids grouped by depth (depth 0 = root).
fn build_balanced_tree(
    k_outputs: usize,
    branching: &[usize],
) -> Result<(OutputTree, Vec<Vec<usize>>)> {
    let height = branching.len();
    // Nodes per internal level.
    let mut level_counts = vec![1usize];
    for &b in branching {
        level_counts.push(level_counts.last().unwrap() * b);
    }
    debug_assert_eq!(level_counts[height], k_outputs);

    // Leaves get ids 0..K in left-to-right order; internal nodes get ids
    // K.. in breadth-first order starting at the root.
    let mut level_ids: Vec<Vec<usize>> = Vec::with_capacity(height + 1);
    let mut next_id = k_outputs;
    for &count in level_counts[..height].iter() {
        level_ids.push((next_id..next_id + count).collect());
        next_id += count;
    }
    level_ids.push((0..k_outputs).collect());

    let total = next_id;
    let mut parts: Vec<(Vec<usize>, f64, f64)> = vec![(vec![], 1.0, 0.0); total];
    for depth in 0..height {
        let fan = branching[depth];
        for (i, &id) in level_ids[depth].iter().enumerate() {
            let children: Vec<usize> = (0..fan)
                .map(|c| level_ids[depth + 1][i * fan + c])
                .collect();
            parts[id] = (children, 0.5, 0.5);
        }
    }
    let tree = OutputTree::from_parts(k_outputs, parts)?;
    Ok((tree, level_ids))
}

/// Generates one replicate: train and test sets drawn independently from the
/// same true coefficients, `Y = X B_true + noise`.
pub fn generate_dataset(
    spec: &SimulationSpec,
) -> Result<(DataSet, DataSet, CoefficientMatrix, OutputTree)> {
    let (tree, b_true) = generate_true_structure(spec)?;
    let train = sample_split(spec, &b_true, spec.n_train, 1, 2)?;
    let test = sample_split(spec, &b_true, spec.n_test, 3, 4)?;
    Ok((train, test, b_true, tree))
}

fn sample_split(
    spec: &SimulationSpec,
    b_true: &CoefficientMatrix,
    n: usize,
    x_stream: u64,
    noise_stream: u64,
) -> Result<DataSet> {
    let x = generate_genotypes(n, spec.j_inputs, subseed(spec.seed, x_stream));
    let mut y = x.dot(b_true);
    if spec.noise_sd > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sd)
            .map_err(|e| Error::Config(format!("bad noise sd: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, noise_stream));
        y.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    DataSet::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genotype_frequencies_roughly_uniform() {
        let x = generate_genotypes(150, 200, 0);
        let total = (150 * 200) as f64;
        for level in [0.0, 1.0, 2.0] {
            let freq = x.iter().filter(|&&v| v == level).count() as f64 / total;
            assert!((freq - 1.0 / 3.0).abs() < 0.04, "freq of {level} = {freq}");
        }
    }

    #[test]
    fn genotypes_deterministic_and_in_range() {
        let a = generate_genotypes(10, 7, 99);
        let b = generate_genotypes(10, 7, 99);
        assert_eq!(a, b);
        let single = generate_genotypes(1, 1, 5);
        assert!([0.0, 1.0, 2.0].contains(&single[(0, 0)]));
    }

    #[test]
    fn default_tree_has_sixty_leaves_height_four() {
        let spec = SimulationSpec::default();
        let (tree, _) = generate_true_structure(&spec).unwrap();
        assert_eq!(tree.num_outputs(), 60);
        // 1 + 3 + 6 + 30 internal nodes above 60 leaves.
        assert_eq!(tree.num_nodes(), 100);
        // Height four: a leaf has four ancestors.
        assert_eq!(tree.path_to_root(0).len(), 5);
        assert!(tree.validate().is_empty());
    }

    #[test]
    fn signal_fills_all_nonzeros() {
        let spec = SimulationSpec { signal: 0.6, ..Default::default() };
        let (_, b_true) = generate_true_structure(&spec).unwrap();
        assert!(b_true.iter().filter(|&&v| v != 0.0).all(|&v| v == 0.6));
        // 3 groups of 20 + 6 of 10 + 30 of 2, two inputs each.
        let nonzeros = b_true.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzeros, 2 * (3 * 20 + 6 * 10 + 30 * 2));
    }

    #[test]
    fn causal_columns_are_disjoint_blocks() {
        let spec = SimulationSpec::default();
        let (tree, b_true) = generate_true_structure(&spec).unwrap();
        for j in 0..spec.j_inputs {
            let support: Vec<usize> = (0..spec.k_outputs)
                .filter(|&k| b_true[(j, k)] != 0.0)
                .collect();
            if support.is_empty() {
                continue;
            }
            // Each causal column matches exactly one node's group.
            assert!(
                tree.nodes().iter().any(|n| n.group == support),
                "column {j} support {support:?} is not a tree group"
            );
        }
    }

    #[test]
    fn too_many_causal_inputs_rejected() {
        let spec = SimulationSpec {
            causal_inputs_per_group: 10,
            ..Default::default()
        };
        assert!(matches!(generate_true_structure(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn bad_branching_rejected() {
        let spec = SimulationSpec {
            branching: vec![3, 2, 5],
            ..Default::default()
        };
        assert!(generate_true_structure(&spec).is_err());
    }

    #[test]
    fn dataset_generation_is_deterministic() {
        let spec = SimulationSpec::default();
        let (train_a, test_a, ..) = generate_dataset(&spec).unwrap();
        let (train_b, test_b, ..) = generate_dataset(&spec).unwrap();
        assert_eq!(train_a.y(), train_b.y());
        assert_eq!(test_a.x(), test_b.x());
        // Different replicates differ.
        let (train_c, ..) = generate_dataset(&spec.for_replicate(1)).unwrap();
        assert_ne!(train_a.y(), train_c.y());
    }

    #[test]
    fn noiseless_ols_recovers_truth() {
        let spec = SimulationSpec {
            n_train: 100,
            n_test: 10,
            j_inputs: 40,
            k_outputs: 12,
            branching: vec![3, 4],
            noise_sd: 0.0,
            active_levels: [1].into_iter().collect(),
            ..Default::default()
        };
        let (train, _, b_true, tree) = generate_dataset(&spec).unwrap();
        let centered = crate::dataset::center_columns(train).unwrap();
        let config = crate::solver::SolverConfig::new(0.0).unwrap();
        let result = crate::solver::fit(&centered, &tree, &config).unwrap();
        for (est, truth) in result.b.iter().zip(b_true.iter()) {
            assert!((est - truth).abs() < 1e-6);
        }
    }
}
