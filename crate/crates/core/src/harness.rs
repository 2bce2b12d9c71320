//! Desk-scale experiments: efficiency stability against tree depth and
//! runtime against interaction order, emitted as plot-ready CSV.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{EngineError, QuadratureExplainer};
use crate::model::{generate_random_ensemble, RandomTreeConfig, TreeEnsemble};
use crate::quadrature::{gauss_legendre, QuadratureError, QuadratureRule};

pub const MAX_STABILITY_DEPTH: usize = 64;

const PREAMBLE: &str = "# Synthetic desk-scale study. Runtime tables for trained benchmark models and \
competitor implementations are not reproduced here.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("depth {0} exceeds the supported maximum {MAX_STABILITY_DEPTH}")]
    DepthTooLarge(usize),
    #[error("orders must be non-empty and strictly increasing")]
    Orders,
    #[error("order {order} exceeds the ensemble's unique-feature depth {depth}")]
    OrderTooLarge { order: usize, depth: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Median wall time of `repetitions` runs after `warmups` discarded ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub warmups: usize,
    pub repetitions: usize,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { warmups: 1, repetitions: 5 }
    }
}

impl Timing {
    fn measure(&self, mut run: impl FnMut()) -> f64 {
        for _ in 0..self.warmups {
            run();
        }
        let mut times: Vec<f64> = (0..self.repetitions.max(1))
            .map(|_| {
                let start = Instant::now();
                run();
                start.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        if times.len() % 2 == 1 {
            times[mid]
        } else {
            0.5 * (times[mid - 1] + times[mid])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub depths: Vec<usize>,
    pub rule_sizes: Vec<usize>,
    pub num_features: usize,
    pub samples_per_depth: usize,
    pub trees: usize,
    pub repeat_prob: f64,
    pub max_leaves: usize,
    pub seed: u64,
    pub threads: usize,
    pub timing: Timing,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            depths: vec![8, 16, 24, 32, 40, 48],
            rule_sizes: vec![6, 8, 16],
            num_features: 784,
            samples_per_depth: 100,
            trees: 4,
            repeat_prob: 0.05,
            max_leaves: 512,
            seed: 0,
            threads: 1,
            timing: Timing::default(),
        }
    }
}

impl StabilityConfig {
    pub fn model_seed(&self, depth: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(depth as u64 * 7919)
    }

    pub fn sample_seed(&self, depth: usize) -> u64 {
        self.model_seed(depth) ^ 0x5eed_5eed
    }

    pub fn ensemble(&self, depth: usize) -> TreeEnsemble {
        let config = RandomTreeConfig {
            max_leaves: self.max_leaves,
            ..RandomTreeConfig::new(depth, self.num_features, self.repeat_prob, self.model_seed(depth))
        };
        generate_random_ensemble(&config, self.trees)
    }

    pub fn samples(&self, depth: usize) -> Vec<Vec<f64>> {
        uniform_samples(self.num_features, self.samples_per_depth, self.sample_seed(depth))
    }
}

/// Samples with features drawn uniformly from `[0, 1)`, the threshold range
/// of generated trees.
pub fn uniform_samples(num_features: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..num_features).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub depth: usize,
    pub points: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub wall_time_s: f64,
    pub model_seed: u64,
    pub sample_seed: u64,
    pub trees: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
}

pub const STABILITY_HEADER: &str =
    "depth,points,max_efficiency_error,mean_efficiency_error,wall_time_s,model_seed,sample_seed,trees,threads";

impl StabilityReport {
    pub fn to_csv(&self, preamble: bool) -> String {
        let mut out = String::new();
        if preamble {
            writeln!(out, "{PREAMBLE}").unwrap();
            writeln!(out, "# Efficiency error is |sum of Shapley values + bias - prediction| over the samples.").unwrap();
        }
        writeln!(out, "{STABILITY_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{},{},{},{}",
                r.depth, r.points, r.max_error, r.mean_error, r.wall_time_s, r.model_seed, r.sample_seed, r.trees, r.threads
            )
            .unwrap();
        }
        out
    }

    /// Rows for one rule size, in depth order.
    pub fn series(&self, points: usize) -> Vec<&StabilityRow> {
        self.rows.iter().filter(|r| r.points == points).collect()
    }
}

/// Efficiency residuals of a generated ensemble at each depth and rule size.
pub fn run_stability(config: &StabilityConfig) -> Result<StabilityReport, HarnessError> {
    if let Some(&d) = config.depths.iter().find(|&&d| d > MAX_STABILITY_DEPTH) {
        return Err(HarnessError::DepthTooLarge(d));
    }
    let rules = config
        .rule_sizes
        .iter()
        .map(|&n| gauss_legendre(n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for &depth in &config.depths {
        let ensemble = config.ensemble(depth);
        let samples = config.samples(depth);
        for rule in &rules {
            let explainer = QuadratureExplainer::new(rule.clone()).with_threads(config.threads);
            let residuals = explainer.efficiency_residuals(&ensemble, &samples)?;
            let errors: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
            let wall_time_s = config.timing.measure(|| {
                explainer.explain_values(&ensemble, &samples).expect("validated above");
            });
            rows.push(StabilityRow {
                depth,
                points: rule.points(),
                max_error: errors.iter().fold(0.0, |m, &e| m.max(e)),
                mean_error: if errors.is_empty() { 0.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 },
                wall_time_s,
                model_seed: config.model_seed(depth),
                sample_seed: config.sample_seed(depth),
                trees: config.trees,
                threads: config.threads,
            });
        }
    }
    Ok(StabilityReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub order: usize,
    pub points: usize,
    pub wall_time_s: f64,
    pub nonzero_keys: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

pub const SCALING_HEADER: &str = "order,points,wall_time_s,nonzero_keys,threads";

impl ScalingReport {
    pub fn to_csv(&self, preamble: bool) -> String {
        let mut out = String::new();
        if preamble {
            writeln!(out, "{PREAMBLE}").unwrap();
            writeln!(out, "# Wall time is the median of repeated runs explaining a single row.").unwrap();
        }
        writeln!(out, "{SCALING_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(out, "{},{},{:e},{},{}", r.order, r.points, r.wall_time_s, r.nonzero_keys, r.threads).unwrap();
        }
        out
    }
}

/// Times `explain` on one sample for each interaction order.
pub fn run_scaling(
    orders: &[usize],
    ensemble: &TreeEnsemble,
    sample: &[f64],
    rule: &QuadratureRule,
    threads: usize,
    timing: Timing,
) -> Result<ScalingReport, HarnessError> {
    if orders.is_empty() || orders.windows(2).any(|w| w[0] >= w[1]) || orders[0] == 0 {
        return Err(HarnessError::Orders);
    }
    let depth = ensemble.stats().max_unique_features;
    let max = *orders.last().expect("non-empty");
    if max > depth {
        return Err(HarnessError::OrderTooLarge { order: max, depth });
    }
    let explainer = QuadratureExplainer::new(rule.clone()).with_threads(threads);
    let samples = [sample];
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        let explanation = explainer.explain(ensemble, &samples, order)?;
        let nonzero_keys = explanation.results[0].values.values().filter(|v| **v != 0.0).count();
        let wall_time_s = timing.measure(|| {
            explainer.explain(ensemble, &samples, order).expect("validated above");
        });
        rows.push(ScalingRow { order, points: rule.points(), wall_time_s, nonzero_keys, threads });
    }
    Ok(ScalingReport { rows })
}
