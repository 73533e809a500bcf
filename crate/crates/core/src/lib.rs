//! Audit bias-mitigation methods for classification.
//!
//! A baseline scorer ranks instances; mitigation methods either repair the
//! features, re-threshold, or relabel; the decision layer turns any scores
//! into labels under an explicit policy; the audit measures between-group
//! fairness next to within-group ranking disruption. The [`theory`] module
//! checks on weighted grids when fair optimal decisions reduce to
//! per-group thresholds on a biased score.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! equalized-odds program is solved in exact rational arithmetic.

pub mod audit;
pub mod dataset;
pub mod decide;
pub mod error;
pub mod mitigate;
pub mod scalar;
pub mod scorer;
pub mod scores;
pub mod synthetic;
pub mod theory;

pub use dataset::{ingest, registry, split, verify_base_rate, Dataset, DatasetSpec, Group, InstanceId, Split, SplitRole};
pub use decide::{decide, equalize_rates, DecisionContext, DecisionPolicy, DecisionSet};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use scores::{ingest_external_scores, ScoreSet};

/// Exact rational used by the equalized-odds solver.
pub type Rational = num_rational::BigRational;

pub type ScoreSet64 = ScoreSet<f64>;
pub type ScoreSet32 = ScoreSet<f32>;
pub type DecisionSet64 = DecisionSet<f64>;
pub type DecisionSet32 = DecisionSet<f32>;
pub type DecisionPolicy64 = DecisionPolicy<f64>;
pub type GroupThresholds64 = mitigate::GroupThresholds<f64>;
pub type CriticalRegion64 = mitigate::CriticalRegion<f64>;
pub type AuditReport64 = audit::AuditReport<f64>;
pub type AuditReport32 = audit::AuditReport<f32>;
pub type FairWorld64 = theory::FairWorld<f64>;
pub type FairWorld32 = theory::FairWorld<f32>;
