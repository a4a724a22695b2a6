//! Loading citation records from files, a works API, and a local cache.
//!
//! File schemas:
//!
//! * CSV: header `id,citations`, one row per paper. A row with an empty
//!   `citations` field declares a researcher without adding a paper, which
//!   is how records with no papers are written.
//! * JSON: an array of `{"id": string, "counts": [non-negative integers]}`.
//! * Cache: JSON lines, `{"id", "counts", "fetched_at"}` with an RFC 3339
//!   timestamp; the last line for an id wins.
//!
//! Records sharing an id are merged (their counts are pooled) and returned
//! in order of first appearance.

mod cache;
mod fetch;
mod formats;

use std::io;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_load, Cache, CacheEntry, CacheScan, CompactReport};
pub use fetch::{fetch_author, Fetcher, RateLimiter};
pub use formats::{parse_csv, parse_json, write_csv, write_json};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: negative citation count")]
    NegativeCount { line: u64 },
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("author `{0}` not found")]
    AuthorNotFound(String),
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("unexpected response shape: {0}")]
    SchemaMismatch(String),
    #[error("cache line {line} is corrupt")]
    CacheCorrupt { line: usize },
    #[error("invalid source config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Connection settings for a works-with-citation-counts API.
///
/// Field names follow OpenAlex: works are listed under
/// `{base_url}/works?filter=author.id:{id}` with cursor pagination, and each
/// work's citation count sits at `count_field` (a dotted path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub base_url: String,
    /// Requests per second.
    pub rate_limit: f64,
    pub max_retries: u32,
    /// Per-request timeout, seconds.
    pub timeout: f64,
    pub cache_path: PathBuf,
    pub contact_email: Option<String>,
    pub count_field: String,
    pub per_page: u32,
    /// First retry delay, seconds; doubles on each further retry.
    pub backoff_base: f64,
    /// Seed for the backoff jitter.
    pub jitter_seed: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openalex.org".to_owned(),
            rate_limit: 5.0,
            max_retries: 3,
            timeout: 30.0,
            cache_path: PathBuf::from("citerank-cache.jsonl"),
            contact_email: None,
            count_field: "cited_by_count".to_owned(),
            per_page: 200,
            backoff_base: 1.0,
            jitter_seed: 0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidConfig(m));
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return bad(format!("rate_limit must be positive, got {}", self.rate_limit));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout));
        }
        if !(self.backoff_base.is_finite() && self.backoff_base >= 0.0) {
            return bad(format!("backoff_base must be non-negative, got {}", self.backoff_base));
        }
        if self.per_page == 0 {
            return bad("per_page must be at least 1".to_owned());
        }
        if self.base_url.is_empty() {
            return bad("base_url is empty".to_owned());
        }
        if self.count_field.is_empty() {
            return bad("count_field is empty".to_owned());
        }
        Ok(())
    }

    pub fn timeout_duration(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SourceConfig::default().validate().is_ok());
        let zero_rate = SourceConfig { rate_limit: 0.0, ..Default::default() };
        assert!(matches!(zero_rate.validate(), Err(IngestError::InvalidConfig(_))));
        let zero_timeout = SourceConfig { timeout: 0.0, ..Default::default() };
        assert!(zero_timeout.validate().is_err());
        let no_page = SourceConfig { per_page: 0, ..Default::default() };
        assert!(no_page.validate().is_err());
    }
}
