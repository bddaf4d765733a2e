//! Invariant tori of linear inhomogeneous skew-product systems in the
//! critical case of exponential dichotomy.
//!
//! The variational equation along the base flow is assumed exponentially
//! dichotomous on each semi-axis separately. The library evaluates the
//! generalized Green operator of the problem, checks the associated
//! solvability conditions, and samples the resulting bounded invariant
//! section over a phase grid.
//!
//! Module map:
//! * [`expr`]      — expression grammar for system definitions
//! * [`system`]    — system configs and the built-in catalog
//! * [`flow`]      — dense-output integration, matriciant oracle
//! * [`dichotomy`] — projector fields and dichotomy certificates
//! * [`critical`]  — mismatch matrix, pseudoinverse, orthoprojectors
//! * [`green`]     — generalized Green operator and solvability
//! * [`torus`]     — grid sampling, gluing, invariance verification
//! * [`cli`]       — command-line front end
//!
//! See `examples/` for runnable entry points into each capability.

pub mod cli;
pub mod critical;
pub mod dichotomy;
pub mod expr;
pub mod flow;
pub mod green;
pub mod system;
pub mod torus;

pub use critical::{critical_data, CriticalData};
pub use dichotomy::{verify_dichotomy, DichotomyCertificate, ProjectorField, Side};
pub use expr::Expression;
pub use flow::{FlowTrajectory, FundamentalMatrixOracle, Span, Tolerances};
pub use green::{GreenEvaluator, QuadratureScheme, SolvabilityReport, Variant};
pub use system::{catalog, load_config, CatalogEntry, ProjectorPair, SystemDefinition};
pub use torus::{sample_torus, verify_invariance, GlueSpec, TorusPoint, TorusSample};
