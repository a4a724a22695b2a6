//! Seeded synthetic researcher populations.
//!
//! Every record is a pure function of `(seed, researcher index)`: the
//! generator is ChaCha8 keyed by `seed` (expanded with `seed_from_u64`) and
//! switched to stream number `index`, so records can be produced in any order
//! or in parallel and still come out bit-identical.
//!
//! Floating draws use fixed transforms of the raw 64-bit output:
//!
//! * uniform: `(x >> 11) * 2^-53`, in `[0, 1)`;
//! * standard normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`;
//! * integers in a range: the high word of a 128-bit product.
//!
//! Citation models, per paper:
//!
//! * `lognormal:MU:SIGMA` gives `floor(exp(MU + SIGMA z))`;
//! * `power-law:ALPHA[:CAP]` draws from the continuous power law with
//!   density proportional to `x^-ALPHA` truncated to `[1, CAP + 1)` and
//!   takes the floor, so `P(k)` is proportional to
//!   `k^(1-ALPHA) - (k+1)^(1-ALPHA)` on `1..=CAP` (tail exponent `ALPHA`,
//!   exact inverse CDF). `CAP` defaults to 10^6;
//! * `geometric:P` has support `{0, 1, 2, ...}` with `P(k) = (1-P)^k P`.
//!
//! Paper-count models: `fixed:N`, `uniform:MIN:MAX` (inclusive) and
//! `log-uniform:MIN:MAX` (`floor(exp(U(ln MIN, ln(MAX + 1))))`, `MIN >= 1`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{CitationRecord, MetricSummary};

pub const DEFAULT_POWER_LAW_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid population config: {0}")]
    InvalidConfig(String),
    #[error("researcher index {index} out of range for population of {size}")]
    IndexOutOfRange { index: usize, size: usize },
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PapersDistribution {
    Fixed(u64),
    Uniform { min: u64, max: u64 },
    LogUniform { min: u64, max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CitationDistribution {
    LogNormal { mu: f64, sigma: f64 },
    PowerLaw { exponent: f64, cap: u64 },
    Geometric { p: f64 },
}

impl PapersDistribution {
    pub fn validate(&self) -> Result<(), SynthError> {
        match *self {
            Self::Fixed(_) => Ok(()),
            Self::Uniform { min, max } if min > max => {
                Err(invalid(format!("uniform paper count: min {min} > max {max}")))
            }
            Self::LogUniform { min, max } if min > max => {
                Err(invalid(format!("log-uniform paper count: min {min} > max {max}")))
            }
            Self::LogUniform { min: 0, .. } => {
                Err(invalid("log-uniform paper count needs min >= 1"))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            Self::Fixed(n) => n,
            Self::Uniform { min, max } => min + below(rng, max - min + 1),
            Self::LogUniform { min, max } => {
                let lo = (min as f64).ln();
                let hi = ((max + 1) as f64).ln();
                let n = (lo + uniform(rng) * (hi - lo)).exp().floor() as u64;
                n.clamp(min, max)
            }
        }
    }
}

impl CitationDistribution {
    pub fn validate(&self) -> Result<(), SynthError> {
        match *self {
            Self::LogNormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(invalid(format!(
                        "lognormal needs finite mu and sigma > 0 (got {mu}, {sigma})"
                    )));
                }
            }
            Self::PowerLaw { exponent, cap } => {
                if !(exponent.is_finite() && exponent > 1.0) {
                    return Err(invalid(format!(
                        "power-law exponent must exceed 1 (got {exponent})"
                    )));
                }
                if cap < 1 {
                    return Err(invalid("power-law cap must be at least 1"));
                }
            }
            Self::Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(invalid(format!("geometric p must lie in (0, 1) (got {p})")));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            Self::LogNormal { mu, sigma } => (mu + sigma * standard_normal(rng)).exp().floor() as u64,
            Self::PowerLaw { exponent, cap } => {
                let a = 1.0 - exponent;
                let tail = ((cap + 1) as f64).powf(a);
                let x = (1.0 - uniform(rng) * (1.0 - tail)).powf(1.0 / a);
                (x.floor() as u64).clamp(1, cap)
            }
            Self::Geometric { p } => {
                let u = 1.0 - uniform(rng);
                (u.ln() / (1.0 - p).ln()).floor() as u64
            }
        }
    }

    /// Mean of the per-paper count distribution.
    ///
    /// The lognormal value is for the continuous variable before flooring.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            Self::PowerLaw { exponent, cap } => {
                let a = 1.0 - exponent;
                let norm = 1.0 - ((cap + 1) as f64).powf(a);
                (1..=cap)
                    .map(|k| k as f64 * ((k as f64).powf(a) - ((k + 1) as f64).powf(a)))
                    .sum::<f64>()
                    / norm
            }
            Self::Geometric { p } => (1.0 - p) / p,
        }
    }
}

/// `[0, 1)` with 53 bits of precision.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Integer in `[0, span)`.
fn below(rng: &mut ChaCha8Rng, span: u64) -> u64 {
    ((rng.next_u64() as u128 * span as u128) >> 64) as u64
}

fn parse_fields<'a>(s: &'a str, kind: &str, min: usize, max: usize) -> Result<Vec<&'a str>, SynthError> {
    let fields: Vec<&str> = s.split(':').skip(1).collect();
    if fields.len() < min || fields.len() > max {
        return Err(invalid(format!("`{s}`: {kind} takes {min}..={max} parameters")));
    }
    Ok(fields)
}

fn num<T: FromStr>(s: &str, whole: &str) -> Result<T, SynthError> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("`{whole}`: cannot parse `{s}`")))
}

impl FromStr for PapersDistribution {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = s.split(':').next().unwrap_or_default();
        let dist = match kind {
            "fixed" => {
                let f = parse_fields(s, kind, 1, 1)?;
                Self::Fixed(num(f[0], s)?)
            }
            "uniform" => {
                let f = parse_fields(s, kind, 2, 2)?;
                Self::Uniform {
                    min: num(f[0], s)?,
                    max: num(f[1], s)?,
                }
            }
            "log-uniform" => {
                let f = parse_fields(s, kind, 2, 2)?;
                Self::LogUniform {
                    min: num(f[0], s)?,
                    max: num(f[1], s)?,
                }
            }
            _ => return Err(invalid(format!("unknown paper-count distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl fmt::Display for PapersDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(n) => write!(f, "fixed:{n}"),
            Self::Uniform { min, max } => write!(f, "uniform:{min}:{max}"),
            Self::LogUniform { min, max } => write!(f, "log-uniform:{min}:{max}"),
        }
    }
}

impl FromStr for CitationDistribution {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = s.split(':').next().unwrap_or_default();
        let dist = match kind {
            "lognormal" => {
                let f = parse_fields(s, kind, 2, 2)?;
                Self::LogNormal {
                    mu: num(f[0], s)?,
                    sigma: num(f[1], s)?,
                }
            }
            "power-law" => {
                let f = parse_fields(s, kind, 1, 2)?;
                Self::PowerLaw {
                    exponent: num(f[0], s)?,
                    cap: match f.get(1) {
                        Some(c) => num(c, s)?,
                        None => DEFAULT_POWER_LAW_CAP,
                    },
                }
            }
            "geometric" => {
                let f = parse_fields(s, kind, 1, 1)?;
                Self::Geometric { p: num(f[0], s)? }
            }
            _ => return Err(invalid(format!("unknown citation distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl fmt::Display for CitationDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LogNormal { mu, sigma } => write!(f, "lognormal:{mu}:{sigma}"),
            Self::PowerLaw { exponent, cap } => write!(f, "power-law:{exponent}:{cap}"),
            Self::Geometric { p } => write!(f, "geometric:{p}"),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl TryFrom<String> for $ty {
            type Error = SynthError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$ty> for String {
            fn from(d: $ty) -> String {
                d.to_string()
            }
        }
    };
}

string_serde!(PapersDistribution);
string_serde!(CitationDistribution);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_researchers: usize,
    pub papers: PapersDistribution,
    pub citations: CitationDistribution,
    pub seed: u64,
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_researchers == 0 {
            return Err(invalid("n_researchers must be at least 1"));
        }
        self.papers.validate()?;
        self.citations.validate()
    }
}

/// Identifier of the `index`-th synthetic researcher.
pub fn synthetic_id(index: usize) -> String {
    format!("synth-{index}")
}

pub fn generate_record(
    config: &PopulationConfig,
    index: usize,
) -> Result<CitationRecord, SynthError> {
    config.validate()?;
    if index >= config.n_researchers {
        return Err(SynthError::IndexOutOfRange {
            index,
            size: config.n_researchers,
        });
    }
    Ok(draw_record(config, index))
}

fn draw_record(config: &PopulationConfig, index: usize) -> CitationRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let n = config.papers.sample(&mut rng);
    let counts = (0..n).map(|_| config.citations.sample(&mut rng)).collect();
    CitationRecord::new(synthetic_id(index), counts)
}

pub fn generate_population(config: &PopulationConfig) -> Result<Vec<CitationRecord>, SynthError> {
    config.validate()?;
    Ok((0..config.n_researchers)
        .map(|i| draw_record(config, i))
        .collect())
}

/// Researchers whose total citations fall in one logarithmic bin.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalBin<'a> {
    /// Bin number on the grid `ratio^k`; `None` collects `C = 0`.
    pub index: Option<i64>,
    pub lower: f64,
    pub upper: f64,
    pub members: Vec<&'a MetricSummary>,
}

/// Groups summaries by total citations on a fixed logarithmic grid.
///
/// Bin `k` covers `[r^k, r^(k+1))` with `r = (1 + w) / (1 - w)`, i.e. every
/// bin is `center * (1 - w) .. center * (1 + w)`. Researchers with `C = 0`
/// go to their own bin. Bins are returned in increasing `C`; empty bins are
/// omitted.
///
/// # Panics
///
/// If `relative_window` is not in `(0, 1)`.
pub fn bin_by_total(summaries: &[MetricSummary], relative_window: f64) -> Vec<TotalBin<'_>> {
    assert!(
        relative_window > 0.0 && relative_window < 1.0,
        "relative window must lie in (0, 1), got {relative_window}"
    );
    let ratio = (1.0 + relative_window) / (1.0 - relative_window);
    let log_ratio = ratio.ln();
    let mut grouped: std::collections::BTreeMap<Option<i64>, Vec<&MetricSummary>> =
        Default::default();
    for s in summaries {
        let key = (s.total_citations > 0)
            .then(|| ((s.total_citations as f64).ln() / log_ratio).floor() as i64);
        grouped.entry(key).or_default().push(s);
    }
    grouped
        .into_iter()
        .map(|(index, members)| {
            let (lower, upper) = match index {
                Some(k) => (ratio.powi(k as i32), ratio.powi(k as i32 + 1)),
                None => (0.0, 0.0),
            };
            TotalBin {
                index,
                lower,
                upper,
                members,
            }
        })
        .collect()
}
