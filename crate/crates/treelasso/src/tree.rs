//! Output trees: topology, per-node selection weights `(s_v, g_v)` and the
//! derived group weights `w_v` used by the penalty.
//!
//! Leaves are identified with outputs: leaf id `k` carries output `k`, so a
//! tree over `K` outputs has leaf ids `0..K` and internal ids `K..`. Node ids
//! are dense (`0..nodes.len()`).
//!
//! The derived weight of a node is
//! `w_v = g_v * prod(s_m for m in ancestors(v))` for internal nodes and
//! `w_v = prod(s_m for m in ancestors(v))` for leaves (empty product = 1).
//! For any valid assignment with `s_v + g_v = 1`, the weights of all groups
//! containing a given output sum to exactly one, so every output is penalized
//! equally no matter how the groups overlap.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for `s + g = 1` when loading a tree from a file.
pub const SG_LOAD_TOL: f64 = 1e-12;

/// One node of an [`OutputTree`].
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: usize,
    /// Child node ids; empty iff this node is a leaf.
    pub children: Vec<usize>,
    /// Sorted output indices at the leaves of the subtree rooted here.
    pub group: Vec<usize>,
    /// Weight for selecting the children's outputs separately.
    pub s: f64,
    /// Weight for selecting the group jointly; `s + g = 1`.
    pub g: f64,
    /// Effective penalty weight of `group`, derived from the ancestor
    /// s-product (or supplied directly in direct-weight trees).
    pub derived_w: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// On-disk form of a tree node. `s`/`g` are the normal way to specify
/// weights; `w` bypasses the derivation for experimentation. An explicit
/// `group` is optional and cross-checked against the topology when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFileNode {
    pub id: usize,
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<usize>>,
}

/// On-disk form of an [`OutputTree`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub num_outputs: usize,
    pub nodes: Vec<TreeFileNode>,
}

/// A single invariant violation found by [`validate_spec`] or
/// [`OutputTree::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Node ids are not a dense 0..n range, or an id repeats.
    BadIds(String),
    /// Number of roots (nodes with no parent) differs from one.
    RootCount(usize),
    /// A node is referenced as a child by more than one parent.
    MultipleParents { node: usize },
    /// A node is unreachable from the root.
    Orphan { node: usize },
    /// The set of leaf ids is not exactly `0..num_outputs`.
    LeafIds(String),
    /// `s + g` differs from 1 beyond tolerance, or `s` is outside `[0, 1]`.
    SgConstraint { node: usize, s: f64, g: f64 },
    /// A node carries neither `(s, g)` nor a direct `w`.
    MissingWeights { node: usize },
    /// A stored group does not match the group recomputed from topology.
    GroupMismatch { node: usize },
    /// A stored derived weight disagrees with the closed form.
    DerivedWeightMismatch { node: usize, expected: f64, found: f64 },
    /// The weights of the groups containing some output do not sum to one.
    WeightSum { output: usize, sum: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BadIds(m) => write!(f, "bad node ids: {m}"),
            Violation::RootCount(n) => write!(f, "expected exactly one root, found {n}"),
            Violation::MultipleParents { node } => write!(f, "node {node} has multiple parents"),
            Violation::Orphan { node } => write!(f, "node {node} is unreachable from the root"),
            Violation::LeafIds(m) => write!(f, "leaf ids must equal output indices: {m}"),
            Violation::SgConstraint { node, s, g } => {
                write!(f, "node {node}: s+g != 1 (s={s}, g={g})")
            }
            Violation::MissingWeights { node } => {
                write!(f, "node {node} has neither (s, g) nor w")
            }
            Violation::GroupMismatch { node } => {
                write!(f, "node {node}: stored group does not match topology")
            }
            Violation::DerivedWeightMismatch { node, expected, found } => {
                write!(f, "node {node}: derived w {found} != {expected}")
            }
            Violation::WeightSum { output, sum } => {
                write!(f, "output {output}: group weights sum to {sum}, not 1")
            }
        }
    }
}

/// A rooted tree over `num_outputs` outputs with derived group weights.
///
/// Immutable after construction; all operations on it are pure.
#[derive(Debug, Clone)]
pub struct OutputTree {
    nodes: Vec<TreeNode>,
    parent: Vec<Option<usize>>,
    root: usize,
    num_outputs: usize,
    direct_weights: bool,
}

impl OutputTree {
    /// Builds a tree from its file form, rejecting any invariant violation
    /// (for direct-weight trees the unit per-leaf weight sum is advisory
    /// and not enforced).
    pub fn from_spec(spec: &TreeFile) -> Result<Self> {
        let violations = validate_spec(spec);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Config(format!("invalid tree: {}", msgs.join("; "))));
        }
        build_unchecked(spec)
    }

    /// Builds a tree from `(children, s, g)` triples; node id = position.
    pub fn from_parts(num_outputs: usize, parts: Vec<(Vec<usize>, f64, f64)>) -> Result<Self> {
        let nodes = parts
            .into_iter()
            .enumerate()
            .map(|(id, (children, s, g))| TreeFileNode {
                id,
                children,
                s: Some(s),
                g: Some(g),
                w: None,
                group: None,
            })
            .collect();
        Self::from_spec(&TreeFile { num_outputs, nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    /// True when weights were supplied directly, bypassing (s, g).
    pub fn has_direct_weights(&self) -> bool {
        self.direct_weights
    }

    /// Node ids on the path from leaf `k` up to the root, inclusive. These
    /// are exactly the nodes whose group contains output `k`.
    pub fn path_to_root(&self, k: usize) -> Vec<usize> {
        let mut path = vec![k];
        let mut cur = k;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path
    }

    /// Per-output sum of the derived weights of all groups containing that
    /// output. Equals one for every output of a valid (s, g)-weighted tree.
    pub fn weight_sum_per_leaf(&self) -> Array1<f64> {
        let mut sums = Array1::zeros(self.num_outputs);
        for node in &self.nodes {
            for &k in &node.group {
                sums[k] += node.derived_w;
            }
        }
        sums
    }

    /// Re-checks every construction invariant, reporting all violations.
    pub fn validate(&self) -> Vec<Violation> {
        let spec = self.to_spec();
        let mut violations = validate_spec(&spec);
        if violations.is_empty() && !self.direct_weights {
            // Derived weights must match the closed form.
            let rebuilt = build_unchecked(&spec).expect("validated spec must build");
            for (a, b) in self.nodes.iter().zip(rebuilt.nodes.iter()) {
                if (a.derived_w - b.derived_w).abs() > 1e-12 {
                    violations.push(Violation::DerivedWeightMismatch {
                        node: a.id,
                        expected: b.derived_w,
                        found: a.derived_w,
                    });
                }
            }
            for (k, sum) in self.weight_sum_per_leaf().iter().enumerate() {
                if (sum - 1.0).abs() > 1e-12 {
                    violations.push(Violation::WeightSum { output: k, sum: *sum });
                }
            }
        }
        violations
    }

    /// File form of this tree (weights serialized the way they were given).
    pub fn to_spec(&self) -> TreeFile {
        TreeFile {
            num_outputs: self.num_outputs,
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeFileNode {
                    id: n.id,
                    children: n.children.clone(),
                    s: (!self.direct_weights).then_some(n.s),
                    g: (!self.direct_weights).then_some(n.g),
                    w: self.direct_weights.then_some(n.derived_w),
                    group: Some(n.group.clone()),
                })
                .collect(),
        }
    }
}

/// Structural and weight checks on a raw tree file. Returns every violation
/// found; an empty report means the spec builds into a valid tree.
pub fn validate_spec(spec: &TreeFile) -> Vec<Violation> {
    let mut violations = Vec::new();
    let n = spec.nodes.len();
    if n == 0 {
        violations.push(Violation::BadIds("tree has no nodes".into()));
        return violations;
    }
    let mut seen = vec![false; n];
    for node in &spec.nodes {
        if node.id >= n {
            violations.push(Violation::BadIds(format!(
                "id {} out of range for {} nodes",
                node.id, n
            )));
            return violations;
        }
        if seen[node.id] {
            violations.push(Violation::BadIds(format!("duplicate id {}", node.id)));
            return violations;
        }
        seen[node.id] = true;
    }

    // Child references and parent counts.
    let mut by_id: Vec<&TreeFileNode> = vec![&spec.nodes[0]; n];
    for node in &spec.nodes {
        by_id[node.id] = node;
    }
    let mut parent_count = vec![0usize; n];
    for node in &spec.nodes {
        for &c in &node.children {
            if c >= n {
                violations.push(Violation::BadIds(format!(
                    "node {} references missing child {}",
                    node.id, c
                )));
                return violations;
            }
            parent_count[c] += 1;
        }
    }
    for (id, &count) in parent_count.iter().enumerate() {
        if count > 1 {
            violations.push(Violation::MultipleParents { node: id });
        }
    }
    let roots: Vec<usize> = (0..n).filter(|&id| parent_count[id] == 0).collect();
    if roots.len() != 1 {
        violations.push(Violation::RootCount(roots.len()));
    }
    if !violations.is_empty() {
        return violations;
    }
    let root = roots[0];

    // Reachability (also guards against cycles among non-root nodes).
    let mut reachable = vec![false; n];
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if reachable[id] {
            continue;
        }
        reachable[id] = true;
        stack.extend(by_id[id].children.iter().copied());
    }
    for (id, &r) in reachable.iter().enumerate() {
        if !r {
            violations.push(Violation::Orphan { node: id });
        }
    }
    if !violations.is_empty() {
        return violations;
    }

    // Leaf id convention: leaves carry outputs 0..K-1.
    let leaves: Vec<usize> = (0..n).filter(|&id| by_id[id].children.is_empty()).collect();
    let expected: Vec<usize> = (0..spec.num_outputs).collect();
    let mut sorted_leaves = leaves.clone();
    sorted_leaves.sort_unstable();
    if sorted_leaves != expected {
        violations.push(Violation::LeafIds(format!(
            "found leaf ids {:?} for {} outputs",
            sorted_leaves, spec.num_outputs
        )));
        return violations;
    }

    // Weights: either (s, g) with s+g=1, or a direct non-negative w.
    for node in &spec.nodes {
        match (node.s, node.g, node.w) {
            (Some(s), Some(g), _) => {
                if !(0.0..=1.0).contains(&s) || (s + g - 1.0).abs() > SG_LOAD_TOL {
                    violations.push(Violation::SgConstraint { node: node.id, s, g });
                }
            }
            (None, None, Some(w)) => {
                if !(w >= 0.0) {
                    violations.push(Violation::SgConstraint {
                        node: node.id,
                        s: f64::NAN,
                        g: f64::NAN,
                    });
                }
            }
            _ => violations.push(Violation::MissingWeights { node: node.id }),
        }
    }

    // Stored groups, if any, must match the topology.
    let derived = derive_groups(spec, root);
    for node in &spec.nodes {
        if let Some(stored) = &node.group {
            let mut stored = stored.clone();
            stored.sort_unstable();
            if stored != derived[node.id] {
                violations.push(Violation::GroupMismatch { node: node.id });
            }
        }
    }
    violations
}

/// Star tree realizing the plain lasso penalty: root with `s = 1, g = 0`.
pub fn make_lasso_tree(num_outputs: usize) -> Result<OutputTree> {
    make_star_tree(num_outputs, 1.0, 0.0)
}

/// Star tree realizing the L1/L2 multi-task penalty: root with `s = 0, g = 1`.
pub fn make_l1l2_tree(num_outputs: usize) -> Result<OutputTree> {
    make_star_tree(num_outputs, 0.0, 1.0)
}

fn make_star_tree(num_outputs: usize, s_root: f64, g_root: f64) -> Result<OutputTree> {
    if num_outputs == 0 {
        return Err(Error::Dimension("a tree needs at least one output".into()));
    }
    let mut parts: Vec<(Vec<usize>, f64, f64)> =
        (0..num_outputs).map(|_| (Vec::new(), 1.0, 0.0)).collect();
    parts.push(((0..num_outputs).collect(), s_root, g_root));
    OutputTree::from_parts(num_outputs, parts)
}

fn derive_groups(spec: &TreeFile, root: usize) -> Vec<Vec<usize>> {
    let n = spec.nodes.len();
    let mut by_id: Vec<&TreeFileNode> = vec![&spec.nodes[0]; n];
    for node in &spec.nodes {
        by_id[node.id] = node;
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Postorder without recursion.
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        order.push(id);
        stack.extend(by_id[id].children.iter().copied());
    }
    for &id in order.iter().rev() {
        if by_id[id].children.is_empty() {
            groups[id] = vec![id];
        } else {
            let mut g = Vec::new();
            for &c in &by_id[id].children {
                g.extend_from_slice(&groups[c]);
            }
            g.sort_unstable();
            groups[id] = g;
        }
    }
    groups
}

fn build_unchecked(spec: &TreeFile) -> Result<OutputTree> {
    let n = spec.nodes.len();
    let mut parent = vec![None; n];
    for node in &spec.nodes {
        for &c in &node.children {
            parent[c] = Some(node.id);
        }
    }
    let root = (0..n)
        .find(|&id| parent[id].is_none())
        .expect("validated spec has a root");
    let groups = derive_groups(spec, root);
    let direct_weights = spec.nodes.iter().any(|node| node.s.is_none());

    let mut nodes: Vec<TreeNode> = vec![
        TreeNode {
            id: 0,
            children: Vec::new(),
            group: Vec::new(),
            s: 1.0,
            g: 0.0,
            derived_w: 0.0,
        };
        n
    ];
    for node in &spec.nodes {
        // Re-derive g from s so the pair sums to 1 exactly.
        let (s, g) = match node.s {
            Some(s) => (s, 1.0 - s),
            None => (1.0, 0.0),
        };
        nodes[node.id] = TreeNode {
            id: node.id,
            children: node.children.clone(),
            group: groups[node.id].clone(),
            s,
            g,
            derived_w: node.w.unwrap_or(0.0),
        };
    }

    let mut tree = OutputTree {
        nodes,
        parent,
        root,
        num_outputs: spec.num_outputs,
        direct_weights,
    };
    if !direct_weights {
        compute_group_weights(&mut tree)?;
    }
    Ok(tree)
}

/// Fills `derived_w` on every node from the closed form
/// `w_v = [g_v] * prod(s_m over ancestors)`.
pub fn compute_group_weights(tree: &mut OutputTree) -> Result<()> {
    if tree.direct_weights {
        return Err(Error::Config(
            "tree has direct weights; (s, g) values are not set".into(),
        ));
    }
    // Preorder from the root, carrying the ancestor s-product.
    let mut stack = vec![(tree.root, 1.0f64)];
    while let Some((id, s_prod)) = stack.pop() {
        let node = &mut tree.nodes[id];
        node.derived_w = if node.is_leaf() { s_prod } else { node.g * s_prod };
        let s = node.s;
        for c in node.children.clone() {
            stack.push((c, s_prod * s));
        }
    }
    Ok(())
}
