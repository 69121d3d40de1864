//! Diagnostic evaluation for named-entity recognition systems.
//!
//! Instead of reporting a single corpus-level F1, this crate scores systems on
//! *buckets* of test entities grouped by measurable attributes (entity length,
//! label consistency, surface frequency, ...), then summarises how performance
//! moves across those buckets:
//!
//! * [`corpus`] — column-format file parsing and entity-span decoding,
//! * [`attributes`] — the eight attribute functions and training-set counts,
//! * [`bucketing`] — interval planning and bucket assignment,
//! * [`metrics`] — exact-match precision / recall / F1, overall and per bucket,
//! * [`stats`] — rank correlation and nonparametric significance tests,
//! * [`analysis`] — the (system x attribute x bucket) performance tensor and
//!   the measures and diagnoses derived from it,
//! * [`report`] — JSON / markdown / chart-data emission,
//! * [`pipeline`] — end-to-end runs shared by the CLI and the C bindings.

pub mod analysis;
pub mod attributes;
pub mod bucketing;
pub mod corpus;
pub mod metrics;
mod numfmt;
pub mod pipeline;
pub mod report;
pub mod stats;

pub use analysis::PerformanceTensor;
pub use attributes::{AttributeId, TrainingStats};
pub use bucketing::{BucketPlan, Partition};
pub use corpus::{Corpus, Scheme, Span};
pub use metrics::Prf;
pub use pipeline::RunConfig;
pub use report::ReportBundle;
