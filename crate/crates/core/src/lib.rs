//! Citation analytics: h-index and o-index, least-squares fits of
//! `h / sqrt(C)`, synthetic researcher populations, rankings and
//! figure-data tables.

pub mod fit;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod synth;

pub use metrics::{h_index, o_index, summarize, CitationRecord, MetricSummary};
