//! Leakage-aware evaluation toolkit for windowed activity classification.
//!
//! The pipeline runs ingestion, sliding-window segmentation, feature
//! extraction, partitioning, random-forest classification and metrics, with a
//! raw-sample leakage auditor that quantifies train/test contamination and a
//! synthetic generator for controlled experiments. The [`pipeline`] module
//! ties the stages together behind a single JSON config.

pub mod audit;
pub mod error;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod segment;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    Annotation, ClassId, ClassTable, FoldAssignment, LabeledInstance, Marker, Partition,
    SampleRow, SensorEvent, SensorKind, SensorValue, Span, SplitScheme, Window,
};
