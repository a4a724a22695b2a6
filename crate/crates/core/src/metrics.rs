//! Per-researcher citation metrics.
//!
//! A [`CitationRecord`] holds one researcher's per-paper citation counts in
//! descending order (`c_1 >= c_2 >= ... >= c_N`). Everything else here is a
//! pure function of that record:
//!
//! * `h`, the Hirsch index: the largest rank `r` with `c_r >= r`;
//! * `m`, citations of the most cited paper;
//! * `o = sqrt(m * h)`, the geometric mean of `m` and `h`;
//! * the totals `N`, `C` and the mean `<c> = C / N`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("negative citation count at index {0}")]
    NegativeCount(usize),
}

/// One researcher's citation counts, sorted in descending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CitationRecord {
    id: String,
    counts: Vec<u64>,
}

impl CitationRecord {
    /// Builds a record from unsigned counts in any order.
    pub fn new(id: impl Into<String>, mut counts: Vec<u64>) -> Self {
        counts.sort_unstable_by(|a, b| b.cmp(a));
        Self {
            id: id.into(),
            counts,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Counts in descending order; `counts()[r - 1]` is `c_r`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_papers(&self) -> usize {
        self.counts.len()
    }

    pub fn total_citations(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Citations of the most cited paper, 0 for an empty record.
    pub fn max_citations(&self) -> u64 {
        self.counts.first().copied().unwrap_or(0)
    }

    pub fn into_parts(self) -> (String, Vec<u64>) {
        (self.id, self.counts)
    }

    /// Adds one paper, keeping the descending order.
    pub fn push(&mut self, count: u64) {
        let at = self.counts.partition_point(|&c| c >= count);
        self.counts.insert(at, count);
    }
}

/// Validates raw (possibly signed) counts and returns the ranked record.
pub fn normalize_record(
    id: impl Into<String>,
    raw_counts: &[i64],
) -> Result<CitationRecord, MetricsError> {
    let counts = raw_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| u64::try_from(c).map_err(|_| MetricsError::NegativeCount(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CitationRecord::new(id, counts))
}

/// Hirsch index of a ranked record.
///
/// `c_r >= r` holds for a prefix of ranks because `c_r` is non-increasing
/// while `r` increases, so the answer is the length of that prefix.
pub fn h_index(record: &CitationRecord) -> u64 {
    let counts = record.counts();
    let (mut lo, mut hi) = (0usize, counts.len());
    // invariant: ranks 1..=lo satisfy c_r >= r, ranks > hi do not
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if counts[mid - 1] >= mid as u64 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo as u64
}

/// `sqrt(m * h)`; zero when either factor is zero.
pub fn o_index(record: &CitationRecord) -> f64 {
    o_from_parts(record.max_citations(), h_index(record))
}

pub(crate) fn o_from_parts(max_citations: u64, h: u64) -> f64 {
    ((max_citations as f64) * (h as f64)).sqrt()
}

/// Rounds half up, the convention for displaying `o` as an integer.
pub fn round_half_up(value: f64) -> u64 {
    (value + 0.5).floor() as u64
}

/// All derived scalars for one researcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub id: String,
    pub n_papers: u64,
    pub total_citations: u64,
    pub max_citations: u64,
    pub mean_citations: f64,
    pub h_index: u64,
    pub o_index: f64,
    pub h_ratio: f64,
}

impl MetricSummary {
    pub fn sqrt_total(&self) -> f64 {
        (self.total_citations as f64).sqrt()
    }
}

/// Computes every metric of a record.
///
/// Empty records and records without citations produce zero for `<c>` and
/// `h / sqrt(C)` instead of dividing by zero.
pub fn summarize(record: &CitationRecord) -> MetricSummary {
    let n = record.n_papers() as u64;
    let total = record.total_citations();
    let max = record.max_citations();
    let h = h_index(record);
    let mean = if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let h_ratio = if total == 0 {
        0.0
    } else {
        h as f64 / (total as f64).sqrt()
    };
    MetricSummary {
        id: record.id().to_owned(),
        n_papers: n,
        total_citations: total,
        max_citations: max,
        mean_citations: mean,
        h_index: h,
        o_index: o_from_parts(max, h),
        h_ratio,
    }
}
