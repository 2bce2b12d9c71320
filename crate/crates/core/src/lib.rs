//! Path-dependent Shapley values and Shapley interaction indices for tree
//! ensembles, computed by Gauss–Legendre quadrature over weighted Banzhaf
//! interaction polynomials.
//!
//! * [`model`] parses, validates and generates tree ensembles.
//! * [`quadrature`] builds Gauss–Legendre rules on `[0, 1]`.
//! * [`oracle`] holds exact brute-force references.
//! * [`engine`] is the single-traversal production algorithm.
//! * [`methods`] registers attribution methods by name.
//! * [`harness`] runs the stability and scaling studies.

pub mod engine;
pub mod harness;
pub mod methods;
pub mod model;
pub mod oracle;
pub mod quadrature;

pub use engine::{pack_interactions, AttributionResult, Explanation, QuadratureExplainer};
pub use model::{EnsembleStats, TreeEnsemble};
pub use quadrature::{gauss_legendre, min_points, QuadratureRule};
