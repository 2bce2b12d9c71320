//! Tree ensembles: structure, validation, routing and structural statistics.
//!
//! Samples are plain `f64` slices of length `num_features`; a `NaN` entry is a
//! missing value and follows the split's default side.

mod canonical;
mod generate;
mod xgboost;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{CanonicalModel, CanonicalTree, NodeSpec, SplitRule};
pub use generate::{generate_random_ensemble, generate_random_tree, generate_with, GeneratedTree, RandomTreeConfig};
pub use xgboost::{import_xgboost_dump, import_xgboost_dump_groups, XgboostImportOptions};

/// Relative slack allowed when a child's cover exceeds its parent's.
///
/// Dumped Hessian sums are printed with limited precision, so a child holding
/// all of its parent's samples can appear marginally larger.
const COVER_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Syntax(String),
    #[error("tree {tree}, node {node}: {message}")]
    Schema { tree: usize, node: usize, message: String },
    #[error("tree {tree}, node {node}: categorical splits unsupported")]
    CategoricalSplit { tree: usize, node: usize },
    #[error("tree {tree}: duplicate node id {node}")]
    DuplicateNode { tree: usize, node: usize },
    #[error("tree {tree}, node {node}: child id {child} does not exist")]
    DanglingChild { tree: usize, node: usize, child: usize },
    #[error("tree {tree}, node {node}: node has more than one parent")]
    MultipleParents { tree: usize, node: usize },
    #[error("tree {tree}: expected exactly one root, found {count}")]
    RootCount { tree: usize, count: usize },
    #[error("tree {tree}, node {node}: node unreachable from the root (cycle)")]
    Unreachable { tree: usize, node: usize },
    #[error("tree {tree}: empty tree")]
    EmptyTree { tree: usize },
    #[error("tree {tree}, node {node}: cover monotonicity violated (child {child} cover {child_cover} > parent cover {parent_cover})")]
    CoverMonotonicity {
        tree: usize,
        node: usize,
        child: usize,
        parent_cover: f64,
        child_cover: f64,
    },
    #[error("tree {tree}, node {node}: root cover must be positive, got {cover}")]
    NonPositiveRootCover { tree: usize, node: usize, cover: f64 },
    #[error("tree {tree}, node {node}: zero-cover child {child} gives an undefined edge weight")]
    ZeroCoverChild { tree: usize, node: usize, child: usize },
    #[error("tree {tree}, node {node}: invalid cover {cover}")]
    InvalidCover { tree: usize, node: usize, cover: f64 },
    #[error("tree {tree}, node {node}: feature index {feature} out of range (num_features = {num_features})")]
    FeatureOutOfRange {
        tree: usize,
        node: usize,
        feature: usize,
        num_features: usize,
    },
    #[error("tree {tree}, node {node}: non-finite {field}")]
    NonFinite { tree: usize, node: usize, field: &'static str },
    #[error("num_features must be at least 1")]
    NoFeatures,
}

impl ModelError {
    /// True for errors raised while reading the document (as opposed to a
    /// well-formed document describing an invalid model).
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            ModelError::Syntax(_) | ModelError::Schema { .. } | ModelError::CategoricalSplit { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub default_side: Side,
    /// Arena index of the left child.
    pub left: usize,
    /// Arena index of the right child.
    pub right: usize,
}

impl Split {
    /// The side a sample value is routed to: `value < threshold` goes left,
    /// missing (`NaN`) follows the default side.
    #[inline]
    pub fn route(&self, value: f64) -> Side {
        if value.is_nan() {
            self.default_side
        } else if value < self.threshold {
            Side::Left
        } else {
            Side::Right
        }
    }

    #[inline]
    pub fn child(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal(Split),
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Node id as written in the source document.
    pub id: usize,
    pub cover: f64,
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// A single validated tree stored as a node arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    root: usize,
}

/// One root-to-leaf path, summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSummary {
    pub leaf: usize,
    pub depth: usize,
    pub unique_features: usize,
}

impl Tree {
    /// Builds a tree from node specs, checking every structural invariant.
    pub fn from_specs(
        tree_index: usize,
        specs: &[NodeSpec],
        num_features: usize,
    ) -> Result<Self, ModelError> {
        let tree = tree_index;
        if specs.is_empty() {
            return Err(ModelError::EmptyTree { tree });
        }
        let mut index_of = HashMap::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            if index_of.insert(spec.id, idx).is_some() {
                return Err(ModelError::DuplicateNode { tree, node: spec.id });
            }
        }

        let mut nodes = Vec::with_capacity(specs.len());
        for spec in specs {
            let node = spec.id;
            if !spec.cover.is_finite() || spec.cover < 0.0 {
                return Err(ModelError::InvalidCover { tree, node, cover: spec.cover });
            }
            let kind = spec.to_kind(tree, num_features, |child| {
                index_of
                    .get(&child)
                    .copied()
                    .ok_or(ModelError::DanglingChild { tree, node, child })
            })?;
            nodes.push(TreeNode { id: node, cover: spec.cover, kind });
        }

        let mut parent_count = vec![0usize; nodes.len()];
        for node in &nodes {
            if let NodeKind::Internal(split) = &node.kind {
                for child in [split.left, split.right] {
                    parent_count[child] += 1;
                    if parent_count[child] > 1 {
                        return Err(ModelError::MultipleParents { tree, node: nodes[child].id });
                    }
                }
            }
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&i| parent_count[i] == 0).collect();
        if roots.len() != 1 {
            return Err(ModelError::RootCount { tree, count: roots.len() });
        }
        let root = roots[0];

        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            seen[idx] = true;
            if let NodeKind::Internal(split) = &nodes[idx].kind {
                stack.push(split.left);
                stack.push(split.right);
            }
        }
        if let Some(idx) = seen.iter().position(|s| !s) {
            return Err(ModelError::Unreachable { tree, node: nodes[idx].id });
        }

        if nodes[root].cover <= 0.0 {
            return Err(ModelError::NonPositiveRootCover {
                tree,
                node: nodes[root].id,
                cover: nodes[root].cover,
            });
        }
        for node in &nodes {
            if let NodeKind::Internal(split) = &node.kind {
                for child in [split.left, split.right] {
                    let child_cover = nodes[child].cover;
                    if child_cover > node.cover * (1.0 + COVER_SLACK) {
                        return Err(ModelError::CoverMonotonicity {
                            tree,
                            node: node.id,
                            child: nodes[child].id,
                            parent_cover: node.cover,
                            child_cover,
                        });
                    }
                    if child_cover <= 0.0 {
                        return Err(ModelError::ZeroCoverChild {
                            tree,
                            node: node.id,
                            child: nodes[child].id,
                        });
                    }
                }
            }
        }

        Ok(Tree { nodes, root })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edge weight `cover(child) / cover(parent)`, clamped to 1.
    #[inline]
    pub fn edge_weight(&self, parent: usize, child: usize) -> f64 {
        (self.nodes[child].cover / self.nodes[parent].cover).min(1.0)
    }

    /// Arena index of the leaf a sample reaches.
    pub fn leaf_for(&self, sample: &[f64]) -> usize {
        let mut idx = self.root;
        while let NodeKind::Internal(split) = &self.nodes[idx].kind {
            idx = split.child(split.route(sample[split.feature]));
        }
        idx
    }

    pub fn predict(&self, sample: &[f64]) -> f64 {
        match self.nodes[self.leaf_for(sample)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Internal(_) => unreachable!("leaf_for stops at a leaf"),
        }
    }

    /// Cover-weighted mean of the leaf values: Σ_v val(v) · Π_{e ∈ path(v)} w_e.
    pub fn expected_value(&self) -> f64 {
        let mut total = 0.0;
        let mut stack = vec![(self.root, 1.0)];
        while let Some((idx, weight)) = stack.pop() {
            match &self.nodes[idx].kind {
                NodeKind::Leaf { value } => total += value * weight,
                NodeKind::Internal(split) => {
                    stack.push((split.right, weight * self.edge_weight(idx, split.right)));
                    stack.push((split.left, weight * self.edge_weight(idx, split.left)));
                }
            }
        }
        total
    }

    /// Depth and distinct-feature count for every root-to-leaf path, in
    /// left-first depth-first order.
    pub fn paths(&self) -> Vec<PathSummary> {
        enum Step {
            Enter(usize, usize),
            Exit(usize),
        }
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let mut out = Vec::new();
        let mut stack = vec![Step::Enter(self.root, 0)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(idx, depth) => match &self.nodes[idx].kind {
                    NodeKind::Leaf { .. } => out.push(PathSummary {
                        leaf: idx,
                        depth,
                        unique_features: counts.len(),
                    }),
                    NodeKind::Internal(split) => {
                        *counts.entry(split.feature).or_insert(0) += 1;
                        stack.push(Step::Exit(split.feature));
                        stack.push(Step::Enter(split.right, depth + 1));
                        stack.push(Step::Enter(split.left, depth + 1));
                    }
                },
                Step::Exit(feature) => {
                    let count = counts.get_mut(&feature).expect("entered feature");
                    *count -= 1;
                    if *count == 0 {
                        counts.remove(&feature);
                    }
                }
            }
        }
        out
    }

    pub fn stats(&self) -> EnsembleStats {
        let paths = self.paths();
        EnsembleStats {
            max_depth: paths.iter().map(|p| p.depth).max().unwrap_or(0),
            max_unique_features: paths.iter().map(|p| p.unique_features).max().unwrap_or(0),
            node_count: self.nodes.len(),
            leaf_count: paths.len(),
        }
    }
}

/// Structural statistics. Depths are maxima over all trees; counts are totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EnsembleStats {
    /// `D`: edges on the longest root-to-leaf path.
    pub max_depth: usize,
    /// `d`: most distinct features on any root-to-leaf path.
    pub max_unique_features: usize,
    pub node_count: usize,
    pub leaf_count: usize,
}

/// An additive ensemble of trees over `num_features` features.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
    num_features: usize,
    base_score: f64,
}

impl TreeEnsemble {
    /// Trees must already have been validated against `num_features`.
    pub fn new(trees: Vec<Tree>, num_features: usize, base_score: f64) -> Result<Self, ModelError> {
        if num_features == 0 {
            return Err(ModelError::NoFeatures);
        }
        for (t, tree) in trees.iter().enumerate() {
            for node in tree.nodes() {
                if let NodeKind::Internal(split) = &node.kind {
                    if split.feature >= num_features {
                        return Err(ModelError::FeatureOutOfRange {
                            tree: t,
                            node: node.id,
                            feature: split.feature,
                            num_features,
                        });
                    }
                }
            }
        }
        Ok(TreeEnsemble { trees, num_features, base_score })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn predict(&self, sample: &[f64]) -> f64 {
        debug_assert_eq!(sample.len(), self.num_features);
        self.trees
            .iter()
            .fold(self.base_score, |acc, tree| acc + tree.predict(sample))
    }

    /// `base_score` plus every tree's cover-weighted expected value.
    pub fn expected_value(&self) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, tree| acc + tree.expected_value())
    }

    pub fn stats(&self) -> EnsembleStats {
        self.trees.iter().fold(EnsembleStats::default(), |acc, tree| {
            let s = tree.stats();
            EnsembleStats {
                max_depth: acc.max_depth.max(s.max_depth),
                max_unique_features: acc.max_unique_features.max(s.max_unique_features),
                node_count: acc.node_count + s.node_count,
                leaf_count: acc.leaf_count + s.leaf_count,
            }
        })
    }

    /// Splits an ensemble into single-tree ensembles sharing `num_features`;
    /// the base score stays with the first.
    pub fn split_trees(&self) -> Vec<TreeEnsemble> {
        self.trees
            .iter()
            .enumerate()
            .map(|(i, tree)| TreeEnsemble {
                trees: vec![tree.clone()],
                num_features: self.num_features,
                base_score: if i == 0 { self.base_score } else { 0.0 },
            })
            .collect()
    }
}

/// Parses a canonical JSON model document.
pub fn parse_canonical(document: &str) -> Result<TreeEnsemble, ModelError> {
    let model: CanonicalModel =
        serde_json::from_str(document).map_err(|e| ModelError::Syntax(e.to_string()))?;
    model.into_ensemble()
}

/// Serialises an ensemble as a canonical JSON model document.
pub fn emit_canonical(ensemble: &TreeEnsemble) -> String {
    serde_json::to_string_pretty(&CanonicalModel::from_ensemble(ensemble))
        .expect("canonical model serialises")
}
