//! Seeded random trees standing in for trained models in stability studies.
//!
//! Trees are fitted to an implicit training set drawn uniformly from the unit
//! cube: every threshold falls inside the node's box along its feature and
//! each child's cover is the data mass on its side. A spine is grown first,
//! always into the heavier child, so the realised depth equals the request;
//! then frontier leaves are split with probability proportional to their
//! cover until the leaf cap is reached, mimicking leaf-capped depth-first
//! growth. Samples drawn from the same cube are therefore typical inputs.
//! Covers are rescaled so the lightest leaf has cover 1.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnsembleStats, NodeSpec, Side, Tree, TreeEnsemble};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTreeConfig {
    pub depth: usize,
    pub num_features: usize,
    /// Probability of reusing a feature already split on along the path.
    pub repeat_prob: f64,
    /// Leaf cap; raised to `depth + 1` when smaller.
    pub max_leaves: usize,
    /// Each split sends a fraction of its node's data left drawn uniformly
    /// from `[min_split_fraction, 1 - min_split_fraction]`.
    pub min_split_fraction: f64,
    pub seed: u64,
}

impl RandomTreeConfig {
    pub fn new(depth: usize, num_features: usize, repeat_prob: f64, seed: u64) -> Self {
        RandomTreeConfig {
            depth,
            num_features,
            repeat_prob,
            max_leaves: 512,
            min_split_fraction: 0.05,
            seed,
        }
    }
}

/// A generated single-tree ensemble with the statistics the generator
/// tracked while building it.
#[derive(Debug, Clone)]
pub struct GeneratedTree {
    pub ensemble: TreeEnsemble,
    pub stats: EnsembleStats,
}

struct GenNode {
    parent: Option<usize>,
    depth: usize,
    /// Fraction of the implicit training set reaching this node.
    mass: f64,
    /// Feature and children once split.
    split: Option<(usize, usize, usize)>,
    threshold: f64,
    default_side: Side,
    distinct: usize,
}

pub fn generate_random_tree(depth: usize, num_features: usize, repeat_prob: f64, seed: u64) -> GeneratedTree {
    generate_with(&RandomTreeConfig::new(depth, num_features, repeat_prob, seed))
}

/// `num_trees` independent trees; tree `i` uses seed `config.seed + i`.
pub fn generate_random_ensemble(config: &RandomTreeConfig, num_trees: usize) -> TreeEnsemble {
    let trees: Vec<Tree> = (0..num_trees as u64)
        .map(|i| {
            let cfg = RandomTreeConfig { seed: config.seed.wrapping_add(i), ..config.clone() };
            generate_with(&cfg).ensemble.trees()[0].clone()
        })
        .collect();
    TreeEnsemble::new(trees, config.num_features, 0.0).expect("generated trees are valid")
}

pub fn generate_with(config: &RandomTreeConfig) -> GeneratedTree {
    assert!(config.num_features >= 1, "num_features must be at least 1");
    assert!((0.0..=1.0).contains(&config.repeat_prob), "repeat_prob must lie in [0, 1]");
    assert!(
        config.min_split_fraction > 0.0 && config.min_split_fraction <= 0.5,
        "min_split_fraction must lie in (0, 0.5]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let max_leaves = config.max_leaves.max(config.depth + 1);

    let mut nodes = vec![GenNode {
        parent: None,
        depth: 0,
        mass: 1.0,
        split: None,
        threshold: 0.0,
        default_side: Side::Left,
        distinct: 0,
    }];
    let mut leaves = 1usize;

    let mut current = 0;
    while nodes[current].depth < config.depth {
        let (l, r) = split_node(&mut nodes, current, config, &mut rng);
        leaves += 1;
        current = if nodes[l].mass >= nodes[r].mass { l } else { r };
    }

    let mut frontier: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].split.is_none() && nodes[i].depth < config.depth)
        .collect();
    while leaves < max_leaves && !frontier.is_empty() {
        let total: f64 = frontier.iter().map(|&i| nodes[i].mass).sum();
        let mut target = rng.gen_range(0.0..total);
        let mut pick = frontier.len() - 1;
        for (k, &i) in frontier.iter().enumerate() {
            if target < nodes[i].mass {
                pick = k;
                break;
            }
            target -= nodes[i].mass;
        }
        let idx = frontier.swap_remove(pick);
        let (l, r) = split_node(&mut nodes, idx, config, &mut rng);
        leaves += 1;
        for child in [l, r] {
            if nodes[child].depth < config.depth {
                frontier.push(child);
            }
        }
    }

    let lightest = nodes
        .iter()
        .filter(|n| n.split.is_none())
        .map(|n| n.mass)
        .fold(f64::INFINITY, f64::min);
    let mut covers = vec![0.0; nodes.len()];
    let mut values = vec![0.0; nodes.len()];
    for (idx, node) in nodes.iter().enumerate() {
        if node.split.is_none() {
            covers[idx] = node.mass / lightest;
            values[idx] = rng.gen_range(-1.0..=1.0);
        }
    }
    // Children always have larger indices than their parent.
    for idx in (0..nodes.len()).rev() {
        if let Some((_, l, r)) = nodes[idx].split {
            covers[idx] = covers[l] + covers[r];
        }
    }

    let specs: Vec<NodeSpec> = nodes
        .iter()
        .enumerate()
        .map(|(idx, node)| match node.split {
            None => NodeSpec::leaf(idx, covers[idx], values[idx]),
            Some((feature, l, r)) => {
                NodeSpec::split(idx, feature, node.threshold, node.default_side, l, r, covers[idx])
            }
        })
        .collect();

    let stats = EnsembleStats {
        max_depth: nodes.iter().map(|n| n.depth).max().unwrap_or(0),
        max_unique_features: nodes
            .iter()
            .filter(|n| n.split.is_none())
            .map(|n| n.distinct)
            .max()
            .unwrap_or(0),
        node_count: nodes.len(),
        leaf_count: leaves,
    };
    let tree = Tree::from_specs(0, &specs, config.num_features).expect("generated tree is valid");
    let ensemble = TreeEnsemble::new(vec![tree], config.num_features, 0.0).expect("valid ensemble");
    GeneratedTree { ensemble, stats }
}

/// Distinct features on the path to `idx`, sorted.
fn path_features(nodes: &[GenNode], mut idx: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(parent) = nodes[idx].parent {
        if let Some((feature, _, _)) = nodes[parent].split {
            out.push(feature);
        }
        idx = parent;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// The interval of `feature` values that reach `idx`.
fn feature_box(nodes: &[GenNode], mut idx: usize, feature: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while let Some(parent) = nodes[idx].parent {
        if let Some((f, l, _)) = nodes[parent].split {
            if f == feature {
                if idx == l {
                    hi = hi.min(nodes[parent].threshold);
                } else {
                    lo = lo.max(nodes[parent].threshold);
                }
            }
        }
        idx = parent;
    }
    (lo, hi)
}

fn split_node(
    nodes: &mut Vec<GenNode>,
    idx: usize,
    config: &RandomTreeConfig,
    rng: &mut ChaCha8Rng,
) -> (usize, usize) {
    let used = path_features(nodes, idx);
    let reuse = !used.is_empty() && (used.len() >= config.num_features || rng.gen_bool(config.repeat_prob));
    let feature = if reuse {
        *used.choose(rng).expect("non-empty")
    } else {
        loop {
            let f = rng.gen_range(0..config.num_features);
            if used.binary_search(&f).is_err() {
                break f;
            }
        }
    };
    let distinct = used.len() + usize::from(!reuse);
    let (lo, hi) = feature_box(nodes, idx, feature);
    let fraction = rng.gen_range(config.min_split_fraction..=1.0 - config.min_split_fraction);
    let threshold = lo + fraction * (hi - lo);
    let depth = nodes[idx].depth + 1;
    let mass = nodes[idx].mass;
    let l = nodes.len();
    for share in [fraction, 1.0 - fraction] {
        nodes.push(GenNode {
            parent: Some(idx),
            depth,
            mass: mass * share,
            split: None,
            threshold: 0.0,
            default_side: Side::Left,
            distinct,
        });
    }
    let node = &mut nodes[idx];
    node.split = Some((feature, l, l + 1));
    node.threshold = threshold;
    node.default_side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
    (l, l + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::emit_canonical;

    #[test]
    fn depth_zero_is_single_leaf() {
        let g = generate_random_tree(0, 3, 0.0, 1);
        assert_eq!(g.ensemble.stats().node_count, 1);
        assert_eq!(g.stats.leaf_count, 1);
    }

    #[test]
    fn self_reported_stats_match() {
        let g = generate_random_tree(10, 6, 0.3, 7);
        assert_eq!(g.ensemble.stats(), g.stats);
        assert_eq!(g.stats.max_depth, 10);
        assert!(g.stats.max_unique_features <= 6);
    }

    #[test]
    fn no_repeats_means_unique_depth_tracks_depth() {
        let g = generate_random_tree(40, 800, 0.0, 5);
        assert_eq!(g.stats.max_depth, 40);
        assert_eq!(g.stats.max_unique_features, 40);
        for path in g.ensemble.trees()[0].paths() {
            assert_eq!(path.unique_features, path.depth);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = emit_canonical(&generate_random_tree(12, 20, 0.2, 99).ensemble);
        let b = emit_canonical(&generate_random_tree(12, 20, 0.2, 99).ensemble);
        let c = emit_canonical(&generate_random_tree(12, 20, 0.2, 100).ensemble);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn leaf_cap_respected() {
        let g = generate_random_tree(30, 50, 0.1, 3);
        assert!(g.stats.leaf_count <= 512);
        let small = generate_random_tree(3, 5, 0.0, 3);
        // Below the cap the tree is full.
        assert_eq!(small.stats.leaf_count, 8);
    }
}
