//! Rankings, rank comparison and figure-data tables.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricSummary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("rankings cover different researchers: {}", .0.join(", "))]
    MismatchedSets(Vec<String>),
    #[error("unknown metric `{0}` (expected one of h, o, C, m, mean_c)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "o")]
    O,
    #[serde(rename = "C")]
    Total,
    #[serde(rename = "m")]
    Max,
    #[serde(rename = "mean_c")]
    MeanCitations,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::H,
        Metric::O,
        Metric::Total,
        Metric::Max,
        Metric::MeanCitations,
    ];

    pub fn value(self, s: &MetricSummary) -> f64 {
        match self {
            Metric::H => s.h_index as f64,
            Metric::O => s.o_index,
            Metric::Total => s.total_citations as f64,
            Metric::Max => s.max_citations as f64,
            Metric::MeanCitations => s.mean_citations,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::H => "h",
            Metric::O => "o",
            Metric::Total => "C",
            Metric::Max => "m",
            Metric::MeanCitations => "mean_c",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| ReportError::UnknownMetric(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub metric: Metric,
    pub entries: Vec<RankEntry>,
}

impl RankingTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Orders researchers by `metric`, best first, with ranks `1..=n`.
///
/// Equal metric values are broken by higher `C`, then higher `m`, then
/// ascending id, so the order is total and independent of input order.
pub fn rank_by(summaries: &[MetricSummary], metric: Metric) -> RankingTable {
    let mut order: Vec<&MetricSummary> = summaries.iter().collect();
    order.sort_by(|a, b| {
        metric
            .value(b)
            .total_cmp(&metric.value(a))
            .then_with(|| b.total_citations.cmp(&a.total_citations))
            .then_with(|| b.max_citations.cmp(&a.max_citations))
            .then_with(|| a.id.cmp(&b.id))
    });
    RankingTable {
        metric,
        entries: order
            .into_iter()
            .enumerate()
            .map(|(i, s)| RankEntry {
                rank: i + 1,
                id: s.id.clone(),
                value: metric.value(s),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub id: String,
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_a - rank_b`; positive when the researcher ranks higher in `b`.
    pub shift: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    /// Kendall tau-a; `None` with fewer than two researchers.
    pub kendall_tau: Option<f64>,
    /// One entry per researcher, in the order of table `a`.
    pub displacements: Vec<Displacement>,
}

impl RankComparison {
    /// The `k` largest absolute shifts, ties in table-`a` order.
    pub fn largest_shifts(&self, k: usize) -> Vec<&Displacement> {
        let mut all: Vec<&Displacement> = self.displacements.iter().collect();
        all.sort_by_key(|d| std::cmp::Reverse(d.shift.unsigned_abs()));
        all.truncate(k);
        all
    }
}

pub fn compare_rankings(a: &RankingTable, b: &RankingTable) -> Result<RankComparison, ReportError> {
    let rank_b: HashMap<&str, usize> = b.entries.iter().map(|e| (e.id.as_str(), e.rank)).collect();
    let ids_a: BTreeSet<&str> = a.entries.iter().map(|e| e.id.as_str()).collect();
    let ids_b: BTreeSet<&str> = rank_b.keys().copied().collect();
    if ids_a != ids_b || ids_a.len() != a.len() || ids_b.len() != b.len() {
        let mut diff: Vec<String> = ids_a
            .symmetric_difference(&ids_b)
            .map(|s| s.to_string())
            .collect();
        if diff.is_empty() {
            diff.push("duplicate ids".to_owned());
        }
        return Err(ReportError::MismatchedSets(diff));
    }

    let displacements: Vec<Displacement> = a
        .entries
        .iter()
        .map(|e| {
            let rb = rank_b[e.id.as_str()];
            Displacement {
                id: e.id.clone(),
                rank_a: e.rank,
                rank_b: rb,
                shift: e.rank as i64 - rb as i64,
            }
        })
        .collect();

    let n = displacements.len();
    let kendall_tau = (n >= 2).then(|| {
        // b-ranks listed in a-order; each inversion is a discordant pair
        let mut seq: Vec<usize> = displacements.iter().map(|d| d.rank_b).collect();
        let discordant = count_inversions(&mut seq) as f64;
        let pairs = (n * (n - 1) / 2) as f64;
        1.0 - 2.0 * discordant / pairs
    });
    Ok(RankComparison {
        kendall_tau,
        displacements,
    })
}

/// Number of pairs `i < j` with `v[i] > v[j]`; sorts `v` as a side effect.
fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// Kendall tau-b between two samples, correcting for ties in either one.
///
/// Returns `None` when fewer than two points are given or either sample is
/// constant. Quadratic in the sample size.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "samples must have equal length");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]);
            let dy = y[i].total_cmp(&y[j]);
            match (dx, dy) {
                (Ordering::Equal, Ordering::Equal) => {}
                (Ordering::Equal, _) => tied_x += 1,
                (_, Ordering::Equal) => tied_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = concordant + discordant;
    let denom = (((n0 + tied_x) as f64) * ((n0 + tied_y) as f64)).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Writes `id,sqrt_C,h_ratio,mean_c` for every researcher with `C > 0`,
/// sorted by `sqrt_C` ascending.
pub fn emit_fig1_data<W: io::Write>(summaries: &[MetricSummary], out: W) -> csv::Result<()> {
    let mut rows: Vec<&MetricSummary> = summaries.iter().filter(|s| s.total_citations > 0).collect();
    rows.sort_by(|a, b| a.total_citations.cmp(&b.total_citations).then_with(|| a.id.cmp(&b.id)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "sqrt_C", "h_ratio", "mean_c"])?;
    for s in rows {
        w.write_record([
            s.id.as_str(),
            &s.sqrt_total().to_string(),
            &s.h_ratio.to_string(),
            &s.mean_citations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `id,h,o` for every researcher, sorted by `h` ascending.
pub fn emit_fig2_data<W: io::Write>(summaries: &[MetricSummary], out: W) -> csv::Result<()> {
    let mut rows: Vec<&MetricSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| {
        a.h_index
            .cmp(&b.h_index)
            .then_with(|| a.o_index.total_cmp(&b.o_index))
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "h", "o"])?;
    for s in rows {
        w.write_record([s.id.as_str(), &s.h_index.to_string(), &s.o_index.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
