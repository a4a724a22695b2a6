//! Effective settings: command-line flags layered over an optional TOML
//! config file, layered over defaults.
//!
//! Every flag has a config-file key of the same name with `-` replaced by
//! `_` (`--min-C` is `min_c`). Flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use citerank_core::fit::ScalingMethod;
use citerank_core::ingest::SourceConfig;
use citerank_core::report::Metric;
use citerank_core::synth::{CitationDistribution, PapersDistribution};
use serde::{Deserialize, Serialize};

use crate::{CliError, InputFormat, OutputFormat};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub min_c: Option<u64>,
    pub input_format: Option<InputFormat>,
    pub scaling: Option<bool>,
    pub log_space: Option<bool>,
    pub fig1: Option<PathBuf>,
    pub n_researchers: Option<usize>,
    pub papers: Option<PapersDistribution>,
    pub citations: Option<CitationDistribution>,
    pub output: Option<PathBuf>,
    pub metric: Option<Metric>,
    pub compare: Option<String>,
    pub top: Option<usize>,
    pub fig2: Option<PathBuf>,
    pub base_url: Option<String>,
    pub rate_limit: Option<f64>,
    pub max_retries: Option<u32>,
    pub timeout: Option<f64>,
    pub cache: Option<PathBuf>,
    pub contact_email: Option<String>,
    pub count_field: Option<String>,
    pub per_page: Option<u32>,
    pub backoff_base: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .map_err(CliError::Input)?;
        toml::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))
            .map_err(CliError::Input)
    }
}

/// Settings that feed a run's config digest. Output locations are left out
/// so the same computation written elsewhere hashes the same.
#[derive(Debug, Clone, Serialize)]
pub struct DigestedSettings<'a, T: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub settings: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSettings {
    pub n_researchers: usize,
    pub papers: PapersDistribution,
    pub citations: CitationDistribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSettings {
    pub min_c: u64,
    pub input_format: InputFormat,
    pub scaling: Option<ScalingMethod>,
    pub metric: Option<Metric>,
    pub compare: Option<(Metric, Metric)>,
}

pub fn parse_compare(s: &str) -> Result<(Metric, Metric), CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| CliError::input(format!("--compare expects two metrics like `h,o`, got `{s}`")))?;
    let parse = |m: &str| m.trim().parse::<Metric>().map_err(|e| CliError::input(e.to_string()));
    Ok((parse(a)?, parse(b)?))
}

pub struct SourceFlags {
    pub base_url: Option<String>,
    pub rate_limit: Option<f64>,
    pub max_retries: Option<u32>,
    pub timeout: Option<f64>,
    pub cache: Option<PathBuf>,
    pub contact_email: Option<String>,
    pub count_field: Option<String>,
    pub per_page: Option<u32>,
    pub backoff_base: Option<f64>,
}

pub fn source_config(flags: SourceFlags, file: &FileConfig, seed: u64) -> SourceConfig {
    let d = SourceConfig::default();
    SourceConfig {
        base_url: flags.base_url.or(file.base_url.clone()).unwrap_or(d.base_url),
        rate_limit: flags.rate_limit.or(file.rate_limit).unwrap_or(d.rate_limit),
        max_retries: flags.max_retries.or(file.max_retries).unwrap_or(d.max_retries),
        timeout: flags.timeout.or(file.timeout).unwrap_or(d.timeout),
        cache_path: flags.cache.or(file.cache.clone()).unwrap_or(d.cache_path),
        contact_email: flags.contact_email.or(file.contact_email.clone()),
        count_field: flags.count_field.or(file.count_field.clone()).unwrap_or(d.count_field),
        per_page: flags.per_page.or(file.per_page).unwrap_or(d.per_page),
        backoff_base: flags.backoff_base.or(file.backoff_base).unwrap_or(d.backoff_base),
        jitter_seed: seed,
    }
}
