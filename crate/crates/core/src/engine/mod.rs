//! Shapley values and order-`s` Shapley interaction indices in one
//! depth-first pass per tree.
//!
//! Each leaf's index for a set `S` is the integral over `p ∈ [0, 1]` of its
//! weighted Banzhaf polynomial, evaluated with a fixed Gauss–Legendre rule.
//! The traversal carries the path polynomial at every quadrature node and, at
//! each edge, credits the child subtree's summed polynomial to every
//! interaction that ends with the edge's feature. Features that reappear on
//! a path are handled by telescoping: the ancestor edge's rational term is
//! subtracted so each feature contributes once, with its final multiplier.

mod traversal;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::TreeEnsemble;
use crate::quadrature::{min_points, QuadratureRule};

use traversal::{Key, Sink, Traversal};

/// `|p - 1|` at or below this skips the telescoping division; the factor is
/// then 1 to working precision.
pub const DIVISION_GUARD: f64 = 1e-12;

/// Trees per work unit. Fixed so results do not depend on the worker count.
const TREE_BLOCK: usize = 16;

const WORKER_STACK: usize = 64 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("interaction order must be at least 1")]
    ZeroOrder,
    #[error("sample {index} has {got} entries, model expects {expected}")]
    SampleLength { index: usize, expected: usize, got: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Attributions for one explained sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributionResult {
    /// Sorted feature tuples of length `order` → interaction index. Tuples no
    /// path can produce are absent (their index is exactly zero).
    pub values: BTreeMap<Vec<usize>, f64>,
    /// `base_score` plus the cover-weighted expected value of every tree.
    pub bias: f64,
}

/// Output of one `explain` call.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub order: usize,
    pub points: usize,
    /// Rule size guaranteeing exactness, when the order is attainable.
    pub required_points: Option<usize>,
    /// Set when `points < required_points`; values are still computed.
    pub inexact_rule: bool,
    /// Set when the order exceeds every path's distinct-feature count.
    pub diagnostic: Option<String>,
    pub results: Vec<AttributionResult>,
}

/// Dense first-order output: `F` Shapley values followed by the bias.
pub type DenseAttribution = Vec<f64>;

/// Packed pairwise output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub num_features: usize,
    /// Row-major `F × F`. Off-diagonal `(i, j) = SII({i, j}) / 2`; the
    /// diagonal holds `φ_i − Σ_{j≠i} SII({i, j}) / 2`.
    pub values: Vec<f64>,
    pub bias: f64,
}

impl InteractionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.num_features + j]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Packs first-order values and pairwise indices of one sample into an
/// `F × F` matrix whose entries sum to `predict − bias`.
pub fn pack_interactions(num_features: usize, first: &AttributionResult, pairs: &AttributionResult) -> InteractionMatrix {
    let f = num_features;
    let mut values = vec![0.0; f * f];
    let mut off_diagonal = vec![0.0; f];
    for (key, &v) in &pairs.values {
        let (i, j) = (key[0], key[1]);
        values[i * f + j] = 0.5 * v;
        values[j * f + i] = 0.5 * v;
        off_diagonal[i] += 0.5 * v;
        off_diagonal[j] += 0.5 * v;
    }
    for (i, extra) in off_diagonal.iter().enumerate() {
        let phi = first.values.get(&vec![i]).copied().unwrap_or(0.0);
        values[i * f + i] = phi - extra;
    }
    InteractionMatrix { num_features: f, values, bias: first.bias }
}

/// The quadrature engine with its rule and worker count.
#[derive(Debug, Clone)]
pub struct QuadratureExplainer {
    rule: QuadratureRule,
    threads: usize,
}

impl Default for QuadratureExplainer {
    fn default() -> Self {
        QuadratureExplainer::new(QuadratureRule::default())
    }
}

enum Accum {
    Dense { values: Vec<f64>, touched: Vec<bool>, list: Vec<usize> },
    Sparse(HashMap<Key, f64>),
}

impl Accum {
    fn new(order: usize, num_features: usize) -> Self {
        if order == 1 {
            Accum::Dense { values: vec![0.0; num_features], touched: vec![false; num_features], list: Vec::new() }
        } else {
            Accum::Sparse(HashMap::new())
        }
    }

    /// Adds `other` into `self` and leaves `other` empty.
    fn absorb(&mut self, other: &mut Accum) {
        match (self, other) {
            (
                Accum::Dense { values, touched, list },
                Accum::Dense { values: ov, touched: ot, list: ol },
            ) => {
                for &f in ol.iter() {
                    values[f] += ov[f];
                    if !touched[f] {
                        touched[f] = true;
                        list.push(f);
                    }
                    ov[f] = 0.0;
                    ot[f] = false;
                }
                ol.clear();
            }
            (Accum::Sparse(map), Accum::Sparse(other)) => {
                for (k, v) in other.drain() {
                    *map.entry(k).or_insert(0.0) += v;
                }
            }
            _ => unreachable!("accumulators share an order"),
        }
    }

    fn into_values(self) -> BTreeMap<Vec<usize>, f64> {
        match self {
            Accum::Dense { values, touched, .. } => touched
                .iter()
                .enumerate()
                .filter(|(_, &t)| t)
                .map(|(f, _)| (vec![f], values[f]))
                .collect(),
            Accum::Sparse(map) => map.into_iter().map(|(k, v)| (k.to_vec(), v)).collect(),
        }
    }
}

impl Sink for Accum {
    #[inline]
    fn add_single(&mut self, feature: usize, value: f64) {
        match self {
            Accum::Dense { values, touched, list } => {
                values[feature] += value;
                if !touched[feature] {
                    touched[feature] = true;
                    list.push(feature);
                }
            }
            Accum::Sparse(map) => *map.entry(Key::from_slice(&[feature])).or_insert(0.0) += value,
        }
    }

    #[inline]
    fn add(&mut self, key: &[usize], value: f64) {
        match self {
            Accum::Sparse(map) => {
                if let Some(slot) = map.get_mut(key) {
                    *slot += value;
                } else {
                    map.insert(Key::from_slice(key), value);
                }
            }
            Accum::Dense { .. } => {
                debug_assert_eq!(key.len(), 1);
                self.add_single(key[0], value);
            }
        }
    }
}

impl QuadratureExplainer {
    pub fn new(rule: QuadratureRule) -> Self {
        QuadratureExplainer { rule, threads: 1 }
    }

    /// Worker count; 0 means one per available core.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// All order-`order` Shapley interaction indices for every sample.
    pub fn explain<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
        order: usize,
    ) -> Result<Explanation, EngineError> {
        if order == 0 {
            return Err(EngineError::ZeroOrder);
        }
        check_samples(ensemble, samples)?;
        let stats = ensemble.stats();
        let depth = stats.max_unique_features;
        let bias = ensemble.expected_value();
        let points = self.rule.points();
        let required_points = min_points(depth, order).ok();

        if order > depth {
            return Ok(Explanation {
                order,
                points,
                required_points: None,
                inexact_rule: false,
                diagnostic: Some(format!(
                    "order {order} exceeds the unique-feature depth {depth}; every index is zero"
                )),
                results: vec![AttributionResult { values: BTreeMap::new(), bias }; samples.len()],
            });
        }

        let accums = self.run(ensemble, samples, order)?;
        Ok(Explanation {
            order,
            points,
            required_points,
            inexact_rule: required_points.is_some_and(|r| points < r),
            diagnostic: None,
            results: accums
                .into_iter()
                .map(|acc| AttributionResult { values: acc.into_values(), bias })
                .collect(),
        })
    }

    /// Shapley values, dense: `F` values followed by the bias.
    pub fn explain_values<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
    ) -> Result<Vec<DenseAttribution>, EngineError> {
        check_samples(ensemble, samples)?;
        let f = ensemble.num_features();
        let bias = ensemble.expected_value();
        let accums = self.run(ensemble, samples, 1)?;
        Ok(accums
            .into_iter()
            .map(|acc| {
                let mut row = match acc {
                    Accum::Dense { values, .. } => values,
                    Accum::Sparse(_) => unreachable!("order 1 is dense"),
                };
                debug_assert_eq!(row.len(), f);
                row.push(bias);
                row
            })
            .collect())
    }

    /// Pairwise interactions packed into an `F × F` matrix per sample.
    pub fn explain_interactions_matrix<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
    ) -> Result<Vec<InteractionMatrix>, EngineError> {
        let first = self.explain(ensemble, samples, 1)?;
        let pairs = self.explain(ensemble, samples, 2)?;
        let f = ensemble.num_features();
        Ok(first.results.iter().zip(&pairs.results).map(|(phi, pair)| pack_interactions(f, phi, pair)).collect())
    }

    /// Signed `Σ φ + bias − predict` per sample.
    pub fn efficiency_residuals<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
    ) -> Result<Vec<f64>, EngineError> {
        let rows = self.explain_values(ensemble, samples)?;
        Ok(rows
            .iter()
            .zip(samples)
            .map(|(row, sample)| row.iter().sum::<f64>() - ensemble.predict(sample.as_ref()))
            .collect())
    }

    /// Largest absolute efficiency residual over the samples.
    pub fn efficiency_error<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
    ) -> Result<f64, EngineError> {
        Ok(self
            .efficiency_residuals(ensemble, samples)?
            .into_iter()
            .fold(0.0, |m, r| m.max(r.abs())))
    }

    fn run<S: AsRef<[f64]> + Sync>(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[S],
        order: usize,
    ) -> Result<Vec<Accum>, EngineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .stack_size(WORKER_STACK)
            .build()
            .map_err(|e| EngineError::ThreadPool(e.to_string()))?;
        let depths: Vec<usize> = ensemble.trees().iter().map(|t| t.stats().max_depth).collect();
        let blocks: Vec<usize> = (0..ensemble.trees().len()).step_by(TREE_BLOCK).collect();
        let f = ensemble.num_features();

        Ok(pool.install(|| {
            samples
                .par_iter()
                .map(|sample| {
                    let partials: Vec<Accum> = blocks
                        .par_iter()
                        .map(|&start| {
                            let end = (start + TREE_BLOCK).min(ensemble.trees().len());
                            let mut traversal =
                                Traversal::new(f, order, self.rule.nodes(), self.rule.weights());
                            let mut block = Accum::new(order, f);
                            let mut per_tree = Accum::new(order, f);
                            for t in start..end {
                                traversal.run(&ensemble.trees()[t], sample.as_ref(), depths[t], &mut per_tree);
                                block.absorb(&mut per_tree);
                            }
                            block
                        })
                        .collect();
                    let mut total = Accum::new(order, f);
                    for mut partial in partials {
                        total.absorb(&mut partial);
                    }
                    total
                })
                .collect()
        }))
    }
}

fn check_samples<S: AsRef<[f64]>>(ensemble: &TreeEnsemble, samples: &[S]) -> Result<(), EngineError> {
    let expected = ensemble.num_features();
    for (index, sample) in samples.iter().enumerate() {
        let got = sample.as_ref().len();
        if got != expected {
            return Err(EngineError::SampleLength { index, expected, got });
        }
    }
    Ok(())
}

/// Single-threaded shorthand for [`QuadratureExplainer::explain`].
pub fn explain<S: AsRef<[f64]> + Sync>(
    ensemble: &TreeEnsemble,
    samples: &[S],
    order: usize,
    rule: &QuadratureRule,
) -> Result<Explanation, EngineError> {
    QuadratureExplainer::new(rule.clone()).explain(ensemble, samples, order)
}

pub fn explain_values<S: AsRef<[f64]> + Sync>(
    ensemble: &TreeEnsemble,
    samples: &[S],
    rule: &QuadratureRule,
) -> Result<Vec<DenseAttribution>, EngineError> {
    QuadratureExplainer::new(rule.clone()).explain_values(ensemble, samples)
}

pub fn explain_interactions_matrix<S: AsRef<[f64]> + Sync>(
    ensemble: &TreeEnsemble,
    samples: &[S],
    rule: &QuadratureRule,
) -> Result<Vec<InteractionMatrix>, EngineError> {
    QuadratureExplainer::new(rule.clone()).explain_interactions_matrix(ensemble, samples)
}

pub fn efficiency_error<S: AsRef<[f64]> + Sync>(
    ensemble: &TreeEnsemble,
    samples: &[S],
    rule: &QuadratureRule,
) -> Result<f64, EngineError> {
    QuadratureExplainer::new(rule.clone()).efficiency_error(ensemble, samples)
}
