//! Attribution methods behind a common trait, looked up by name.
//!
//! Built-ins are `quadrature` (the production engine) and `brute-force`
//! (exact enumeration, small models only).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{AttributionResult, EngineError, Explanation, QuadratureExplainer};
use crate::model::TreeEnsemble;
use crate::oracle::{extract_path_games, sii_exact_all, OracleError};
use crate::quadrature::{gauss_legendre, min_points, QuadratureError, DEFAULT_POINTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MethodError {
    #[error("unknown attribution method `{name}` (available: {available})")]
    Unknown { name: String, available: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodConfig {
    pub points: usize,
    pub threads: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig { points: DEFAULT_POINTS, threads: 1 }
    }
}

pub trait AttributionMethod: Send + Sync {
    fn name(&self) -> &'static str;

    fn explain(
        &self,
        ensemble: &TreeEnsemble,
        samples: &[Vec<f64>],
        order: usize,
    ) -> Result<Explanation, MethodError>;
}

pub type MethodFactory = fn(&MethodConfig) -> Result<Box<dyn AttributionMethod>, MethodError>;

struct Entry {
    description: &'static str,
    factory: MethodFactory,
}

#[derive(Default)]
pub struct MethodRegistry {
    entries: BTreeMap<&'static str, Entry>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(
            "quadrature",
            "single-traversal Gauss-Legendre engine",
            |config| Ok(Box::new(QuadratureMethod::new(config)?)),
        );
        registry.register(
            "brute-force",
            "exact enumeration over every leaf game (small models only)",
            |_| Ok(Box::new(BruteForceMethod)),
        );
        registry
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, description: &'static str, factory: MethodFactory) {
        self.entries.insert(name, Entry { description, factory });
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|(k, e)| (*k, e.description)).collect()
    }

    pub fn create(&self, name: &str, config: &MethodConfig) -> Result<Box<dyn AttributionMethod>, MethodError> {
        let entry = self.entries.get(name).ok_or_else(|| MethodError::Unknown {
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })?;
        (entry.factory)(config)
    }
}

pub struct QuadratureMethod {
    explainer: QuadratureExplainer,
}

impl QuadratureMethod {
    pub fn new(config: &MethodConfig) -> Result<Self, MethodError> {
        let rule = gauss_legendre(config.points)?;
        Ok(QuadratureMethod { explainer: QuadratureExplainer::new(rule).with_threads(config.threads) })
    }
}

impl AttributionMethod for QuadratureMethod {
    fn name(&self) -> &'static str {
        "quadrature"
    }

    fn explain(&self, ensemble: &TreeEnsemble, samples: &[Vec<f64>], order: usize) -> Result<Explanation, MethodError> {
        Ok(self.explainer.explain(ensemble, samples, order)?)
    }
}

pub struct BruteForceMethod;

impl AttributionMethod for BruteForceMethod {
    fn name(&self) -> &'static str {
        "brute-force"
    }

    fn explain(&self, ensemble: &TreeEnsemble, samples: &[Vec<f64>], order: usize) -> Result<Explanation, MethodError> {
        if order == 0 {
            return Err(EngineError::ZeroOrder.into());
        }
        let depth = ensemble.stats().max_unique_features;
        let bias = ensemble.expected_value();
        let mut results = Vec::with_capacity(samples.len());
        for sample in samples {
            let games = extract_path_games(ensemble, sample)?;
            let values = sii_exact_all(&games, order)?
                .into_iter()
                .map(|(k, v)| (k, v.value))
                .collect();
            results.push(AttributionResult { values, bias });
        }
        Ok(Explanation {
            order,
            points: 0,
            required_points: min_points(depth, order).ok(),
            inexact_rule: false,
            diagnostic: (order > depth)
                .then(|| format!("order {order} exceeds the unique-feature depth {depth}; every index is zero")),
            results,
        })
    }
}
