//! Composable differential privacy over in-memory tables.
//!
//! The crate is layered:
//!
//! * [`tabledata`] holds typed, multiset-semantics tables and CSV ingestion.
//! * [`metrics`] defines dataset metrics, output measures, monotone
//!   [`DistanceMap`]s and exact divergence oracles for testing.
//! * [`transformations`] are deterministic dataset-to-dataset components
//!   carrying a stability map.
//! * [`measurements`] are randomized components carrying a privacy map, plus
//!   composition operators and the budget-tracked [`Queryable`].
//! * [`session`] is the analyst-facing layer: a [`Session`] owns private
//!   tables and a budget, and compiles fluent [`QueryExpr`] trees into
//!   transformation chains feeding a measurement.
//!
//! Privacy guarantees are never asserted by hand: every composite component
//! derives its stability or privacy map from those of its parts.

pub mod error;
pub mod exact;
pub mod expr;
pub mod measurements;
pub mod metrics;
pub mod session;
pub mod tabledata;
pub mod transformations;

pub use error::{Error, Result};
pub use exact::ExtRational;
pub use expr::{col, lit, Expr};
pub use measurements::{
    Measurement, NoisePrimitive, Output, OutputKind, Queryable, RngStream,
};
pub use metrics::{
    dataset_distance, pure_dp_divergence, zcdp_divergence, Dataset, DistanceMap, Domain,
    Measure, Metric, Shape,
};
pub use session::{
    Aggregation, KeySet, PrivacyBudget, PrivacyUnit, QueryBuilder, QueryExpr, Session,
};
pub use tabledata::{ColumnType, Row, Schema, Table, TableDomain, Value};
pub use transformations::Transformation;
