#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treequad::model::{generate_with, RandomTreeConfig, Tree, TreeEnsemble};
use treequad::oracle::ExactInteraction;

/// Small random ensemble for oracle comparisons: 1–4 trees, at most 127
/// leaves each, depth at most `max_depth`, frequent repeated features.
pub fn small_ensemble(seed: u64, max_depth: usize) -> TreeEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_features = rng.gen_range(3..=14);
    let num_trees = rng.gen_range(1..=4);
    let trees: Vec<Tree> = (0..num_trees)
        .map(|t| {
            let config = RandomTreeConfig {
                max_leaves: rng.gen_range(2..=128),
                min_split_fraction: rng.gen_range(0.02..0.5),
                ..RandomTreeConfig::new(
                    rng.gen_range(1..=max_depth),
                    num_features,
                    rng.gen_range(0.0..0.6),
                    seed * 31 + t,
                )
            };
            generate_with(&config).ensemble.trees()[0].clone()
        })
        .collect();
    TreeEnsemble::new(trees, num_features, rng.gen_range(-1.0..1.0)).unwrap()
}

/// Uniform samples with roughly 10% missing entries.
pub fn samples_with_missing(num_features: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..num_features)
                .map(|_| if rng.gen_bool(0.1) { f64::NAN } else { rng.gen_range(0.0..1.0) })
                .collect()
        })
        .collect()
}

/// Largest relative disagreement, measured against the larger of the exact
/// value and the sum of per-leaf magnitudes. Keys present on only one side
/// count against the other side's magnitude.
pub fn max_relative_gap(
    engine: &BTreeMap<Vec<usize>, f64>,
    oracle: &BTreeMap<Vec<usize>, ExactInteraction>,
) -> f64 {
    let mut worst = 0.0f64;
    for (key, exact) in oracle {
        let got = engine.get(key).copied().unwrap_or(0.0);
        let scale = exact.value.abs().max(exact.abs_leaf_sum).max(f64::MIN_POSITIVE);
        if exact.abs_leaf_sum == 0.0 && got == 0.0 {
            continue;
        }
        worst = worst.max((got - exact.value).abs() / scale);
    }
    for (key, &got) in engine {
        if !oracle.contains_key(key) && got != 0.0 {
            worst = f64::INFINITY;
        }
    }
    worst
}
