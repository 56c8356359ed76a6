//! Extraction of pairwise bacterial interactions from biomedical text.
//!
//! The crate covers the whole path from annotated corpora to evaluated
//! predictions:
//!
//! * [`corpus`] reads and writes BRAT standoff annotations,
//! * [`segment`] splits passages into sentences without cutting entities,
//! * [`transform`] turns each sentence into marker-tagged entity-pair
//!   instances with binary labels,
//! * [`harmonize`] folds external relation corpora into the same schema,
//! * [`ner`] and [`classify`] tag taxa and score candidate pairs, either
//!   locally (gazetteer, logistic baseline) or through a model server,
//! * [`pipeline`] chains the stages with gold-input ablation modes,
//! * [`eval`] implements the metrics and repeated-run protocol,
//! * [`casestudy`] checks an association network against literature.
//!
//! Numeric code is generic over [`scalar::Scalar`] so metrics can be
//! computed in floating point or exactly over rationals. The aliases below
//! fix the usual choices.

pub mod casestudy;
pub mod classify;
pub mod corpus;
pub mod eval;
pub mod harmonize;
pub mod ner;
pub mod pipeline;
pub mod remote;
pub mod scalar;
pub mod segment;
pub mod synthetic;
pub mod transform;

pub use scalar::Rational;

pub type Metrics = eval::Metrics<f64>;
pub type ExactMetrics = eval::Metrics<Rational>;
pub type RunAggregate = eval::RunAggregate<f64>;
pub type RunReport = classify::RunReport<f64>;
pub type BaselineModel = classify::BaselineModel<f64>;
pub type Threshold = classify::Threshold<f64>;
pub type Components<'a> = pipeline::Components<'a, f64>;
pub type PredictedInteraction = pipeline::PredictedInteraction<f64>;
pub type ValidationReport = casestudy::ValidationReport<f64>;
pub type AuditSummary = casestudy::AuditSummary<Rational>;
