use serde::{Deserialize, Serialize};

use super::{ModelError, NodeKind, Side, Split, Tree, TreeEnsemble};

/// Comparison convention for numeric splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `value < threshold` goes left.
    #[default]
    LessThanGoesLeft,
    /// `value <= threshold` goes left. Accepted on input only; converted to
    /// the strict rule by nudging thresholds up one ulp.
    LessOrEqualGoesLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKindTag {
    Internal,
    Leaf,
}

/// One node as written in a canonical document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: NodeKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    pub cover: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl NodeSpec {
    pub fn leaf(id: usize, cover: f64, value: f64) -> Self {
        NodeSpec {
            id,
            kind: NodeKindTag::Leaf,
            feature: None,
            threshold: None,
            default_side: None,
            left: None,
            right: None,
            cover,
            value: Some(value),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn split(
        id: usize,
        feature: usize,
        threshold: f64,
        default_side: Side,
        left: usize,
        right: usize,
        cover: f64,
    ) -> Self {
        NodeSpec {
            id,
            kind: NodeKindTag::Internal,
            feature: Some(feature),
            threshold: Some(threshold),
            default_side: Some(default_side),
            left: Some(left),
            right: Some(right),
            cover,
            value: None,
        }
    }

    pub(super) fn to_kind(
        &self,
        tree: usize,
        num_features: usize,
        mut resolve: impl FnMut(usize) -> Result<usize, ModelError>,
    ) -> Result<NodeKind, ModelError> {
        let node = self.id;
        let missing = |field: &str| ModelError::Schema {
            tree,
            node,
            message: format!("{} node is missing field `{field}`", self.kind_name()),
        };
        match self.kind {
            NodeKindTag::Leaf => {
                let value = self.value.ok_or_else(|| missing("value"))?;
                if !value.is_finite() {
                    return Err(ModelError::NonFinite { tree, node, field: "value" });
                }
                Ok(NodeKind::Leaf { value })
            }
            NodeKindTag::Internal => {
                let feature = self.feature.ok_or_else(|| missing("feature"))?;
                let threshold = self.threshold.ok_or_else(|| missing("threshold"))?;
                let default_side = self.default_side.ok_or_else(|| missing("default_side"))?;
                let left = self.left.ok_or_else(|| missing("left"))?;
                let right = self.right.ok_or_else(|| missing("right"))?;
                if feature >= num_features {
                    return Err(ModelError::FeatureOutOfRange { tree, node, feature, num_features });
                }
                if threshold.is_nan() {
                    return Err(ModelError::NonFinite { tree, node, field: "threshold" });
                }
                Ok(NodeKind::Internal(Split {
                    feature,
                    threshold,
                    default_side,
                    left: resolve(left)?,
                    right: resolve(right)?,
                }))
            }
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            NodeKindTag::Internal => "internal",
            NodeKindTag::Leaf => "leaf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalTree {
    pub nodes: Vec<NodeSpec>,
}

/// The canonical on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalModel {
    pub num_features: usize,
    pub base_score: f64,
    #[serde(default)]
    pub split_rule: SplitRule,
    pub trees: Vec<CanonicalTree>,
}

impl CanonicalModel {
    pub fn into_ensemble(mut self) -> Result<TreeEnsemble, ModelError> {
        if self.num_features == 0 {
            return Err(ModelError::NoFeatures);
        }
        if self.split_rule == SplitRule::LessOrEqualGoesLeft {
            for node in self.trees.iter_mut().flat_map(|t| t.nodes.iter_mut()) {
                if let Some(th) = node.threshold.as_mut() {
                    *th = next_up(*th);
                }
            }
        }
        let trees = self
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| Tree::from_specs(t, &tree.nodes, self.num_features))
            .collect::<Result<Vec<_>, _>>()?;
        TreeEnsemble::new(trees, self.num_features, self.base_score)
    }

    pub fn from_ensemble(ensemble: &TreeEnsemble) -> Self {
        let trees = ensemble
            .trees()
            .iter()
            .map(|tree| CanonicalTree {
                nodes: tree
                    .nodes()
                    .iter()
                    .map(|node| match &node.kind {
                        NodeKind::Leaf { value } => NodeSpec::leaf(node.id, node.cover, *value),
                        NodeKind::Internal(split) => NodeSpec::split(
                            node.id,
                            split.feature,
                            split.threshold,
                            split.default_side,
                            tree.node(split.left).id,
                            tree.node(split.right).id,
                            node.cover,
                        ),
                    })
                    .collect(),
            })
            .collect();
        CanonicalModel {
            num_features: ensemble.num_features(),
            base_score: ensemble.base_score(),
            split_rule: SplitRule::LessThanGoesLeft,
            trees,
        }
    }
}

/// Smallest double strictly greater than `x` (for finite `x`).
fn next_up(x: f64) -> f64 {
    if x.is_infinite() && x > 0.0 {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}
