use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use citerank_core::fit::{self, FitError, Observation, RegressionDataset, ScalingMethod};
use citerank_core::ingest::{self, Cache, Fetcher, IngestError};
use citerank_core::metrics::{summarize, CitationRecord, MetricSummary};
use citerank_core::report::{self, Metric};
use citerank_core::synth::{
    generate_population, CitationDistribution, PapersDistribution, PopulationConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::output::{Cell, Record, Table};
use crate::settings::{
    parse_compare, source_config, AnalysisSettings, DigestedSettings, FileConfig, SimulateSettings,
    SourceFlags,
};
use crate::{Cli, CliError, Command, InputArgs, InputFormat, OutputFormat};

const DEFAULT_RESEARCHERS: usize = 1000;
const DEFAULT_PAPERS: PapersDistribution = PapersDistribution::LogUniform { min: 20, max: 2000 };
const DEFAULT_CITATIONS: CitationDistribution = CitationDistribution::LogNormal { mu: 1.0, sigma: 1.2 };
const DEFAULT_TOP: usize = 10;

/// Header of the observation table written by `fit --fig1`, which `fit`
/// also accepts as input.
const OBSERVATION_HEADER: [&str; 4] = ["id", "sqrt_C", "h_ratio", "mean_c"];

struct Ctx {
    file: FileConfig,
    format: OutputFormat,
    seed: u64,
    min_c: u64,
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        format: cli.format.or(file.format).unwrap_or_default(),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        min_c: cli.min_c.or(file.min_c).unwrap_or(0),
        file,
    };
    match cli.command {
        Command::Metrics { input } => metrics(&ctx, input, out),
        Command::Fit { input, scaling, log_space, fig1 } => fit_cmd(&ctx, input, scaling, log_space, fig1, out),
        Command::Simulate { n_researchers, papers, citations, output } => {
            simulate(&ctx, n_researchers, papers, citations, output)
        }
        Command::Rank { input, metric, compare, top, fig2 } => rank(&ctx, input, metric, compare, top, fig2, out),
        Command::Fetch {
            authors,
            base_url,
            rate_limit,
            max_retries,
            timeout,
            cache,
            contact_email,
            count_field,
            per_page,
            backoff_base,
        } => {
            let flags = SourceFlags {
                base_url,
                rate_limit,
                max_retries,
                timeout,
                cache,
                contact_email,
                count_field,
                per_page,
                backoff_base,
            };
            fetch(&ctx, flags, &authors, out)
        }
        Command::CacheCompact { cache } => cache_compact(&ctx, cache, out),
    }
}

fn input_format(ctx: &Ctx, args: &InputArgs) -> InputFormat {
    args.input_format.or(ctx.file.input_format).unwrap_or_default()
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(anyhow!("cannot read {}: {e}", path.display())))
}

fn parse_file(path: &Path, bytes: &[u8], format: InputFormat) -> Result<Vec<CitationRecord>, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let parsed = match (format, ext) {
        (InputFormat::Json, _) | (InputFormat::Auto, "json") => ingest::parse_json(bytes),
        (InputFormat::Auto, "jsonl") => {
            let scan = Cache::new(path).scan().map_err(|e| bad_input(path, e))?;
            return Ok(scan.entries.into_values().map(|e| e.record).collect());
        }
        _ => ingest::parse_csv(bytes),
    };
    parsed.map_err(|e| bad_input(path, e))
}

fn bad_input(path: &Path, e: IngestError) -> CliError {
    CliError::Input(anyhow!("{}: {e}", path.display()))
}

/// Reads every input and pools records that share an id, keeping the order
/// in which ids first appear.
fn load_records(paths: &[PathBuf], format: InputFormat) -> Result<Vec<CitationRecord>, CliError> {
    let mut pooled: Vec<(String, Vec<u64>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for path in paths {
        let bytes = read_input(path)?;
        for record in parse_file(path, &bytes, format)? {
            let (id, counts) = record.into_parts();
            match index.get(&id) {
                Some(&i) => pooled[i].1.extend(counts),
                None => {
                    index.insert(id.clone(), pooled.len());
                    pooled.push((id, counts));
                }
            }
        }
    }
    Ok(pooled.into_iter().map(|(id, counts)| CitationRecord::new(id, counts)).collect())
}

fn load_summaries(paths: &[PathBuf], format: InputFormat) -> Result<Vec<MetricSummary>, CliError> {
    Ok(load_records(paths, format)?.iter().map(summarize).collect())
}

fn summary_table(summaries: &[MetricSummary]) -> Table {
    let mut t = Table::new(&["id", "N", "C", "m", "mean_c", "h", "o", "h_ratio"]);
    for s in summaries {
        t.push(vec![
            s.id.as_str().into(),
            s.n_papers.into(),
            s.total_citations.into(),
            s.max_citations.into(),
            s.mean_citations.into(),
            s.h_index.into(),
            s.o_index.into(),
            s.h_ratio.into(),
        ]);
    }
    t
}

fn metrics(ctx: &Ctx, input: InputArgs, out: &mut impl Write) -> Result<(), CliError> {
    let summaries = load_summaries(&input.inputs, input_format(ctx, &input))?;
    summary_table(&summaries).write(ctx.format, out)?;
    Ok(())
}

fn is_observation_table(bytes: &[u8]) -> bool {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let header = String::from_utf8_lossy(first);
    header.trim().split(',').map(str::trim).eq(OBSERVATION_HEADER)
}

fn parse_observations(path: &Path, bytes: &[u8], min_c: u64, data: &mut RegressionDataset) -> Result<(), CliError> {
    let mut rd = csv::Reader::from_reader(bytes);
    for (i, row) in rd.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CliError::Input(anyhow!("{}: line {line}: {e}", path.display())))?;
        let num = |k: usize| -> Result<f64, CliError> {
            let v: f64 = row[k]
                .trim()
                .parse()
                .map_err(|_| CliError::Input(anyhow!("{}: line {line}: bad number `{}`", path.display(), &row[k])))?;
            if v.is_finite() && (k == 2 || v >= 0.0) {
                Ok(v)
            } else {
                Err(CliError::Input(anyhow!("{}: line {line}: bad number `{}`", path.display(), &row[k])))
            }
        };
        let (sqrt_total, h_ratio, mean) = (num(1)?, num(2)?, num(3)?);
        if sqrt_total * sqrt_total < min_c as f64 {
            continue;
        }
        data.push(
            row[0].to_owned(),
            Observation {
                sqrt_total,
                sqrt_mean: mean.sqrt(),
                h_ratio,
            },
        );
    }
    Ok(())
}

fn stats_error(e: FitError) -> CliError {
    CliError::Statistics(e.into())
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Input(anyhow!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_manifest<T: Serialize>(output: &Path, command: &str, seed: u64, settings: T, inputs: &[PathBuf]) -> Result<(), CliError> {
    let digested = DigestedSettings { command, seed, settings };
    let manifest = RunManifest::new(command, &digested, inputs)?;
    let path = manifest.write_beside(output)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn fit_cmd(
    ctx: &Ctx,
    input: InputArgs,
    scaling: bool,
    log_space: bool,
    fig1: Option<PathBuf>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let format = input_format(ctx, &input);
    let fig1 = fig1.or(ctx.file.fig1.clone());
    let log_space = log_space || ctx.file.log_space.unwrap_or(false);
    let scaling = (scaling || log_space || ctx.file.scaling.unwrap_or(false)).then_some(if log_space {
        ScalingMethod::LogSpace
    } else {
        ScalingMethod::MeanRatio
    });

    // record files feed the usual path; observation tables are taken as-is
    let mut record_paths = Vec::new();
    let mut data = RegressionDataset::default();
    for path in &input.inputs {
        let bytes = read_input(path)?;
        if format != InputFormat::Json && is_observation_table(&bytes) {
            parse_observations(path, &bytes, ctx.min_c, &mut data)?;
        } else {
            record_paths.push(path.clone());
        }
    }
    if !data.is_empty() && !record_paths.is_empty() {
        return Err(CliError::input("cannot mix observation tables with citation records"));
    }
    let summaries = if record_paths.is_empty() {
        Vec::new()
    } else {
        let summaries = load_summaries(&record_paths, format)?;
        data = fit::build_dataset(&summaries, ctx.min_c).map_err(stats_error)?;
        summaries
    };
    let result = fit::ols_fit(&data).map_err(stats_error)?;

    let scaled = match scaling {
        Some(method) => {
            if record_paths.is_empty() {
                return Err(CliError::input("--scaling needs citation records, not observation tables"));
            }
            let kept: Vec<MetricSummary> = summaries.iter().filter(|s| s.total_citations >= ctx.min_c).cloned().collect();
            Some(fit::scaling_fit(&kept, method).map_err(stats_error)?)
        }
        None => None,
    };

    if let Some(path) = &fig1 {
        write_file(path, |w| Ok(report::emit_fig1_data(&summaries, w)?))?;
        let settings = AnalysisSettings {
            min_c: ctx.min_c,
            input_format: format,
            scaling,
            metric: None,
            compare: None,
        };
        write_manifest(path, "fit", ctx.seed, settings, &input.inputs)?;
    }

    let mut rec = Record::default();
    rec.push("n_points", result.n_points);
    rec.push("a0", result.intercept);
    rec.push("a1", result.total_slope);
    rec.push("a2", result.mean_slope);
    rec.push("residual_std", result.residual_std);
    rec.push("sample_mean", result.sample_mean);
    rec.push("sample_std", result.sample_std);
    if let Some(s) = &scaled {
        rec.push("k", s.k);
        rec.push("ratio_std", s.ratio_std);
        rec.push("scaling_points", s.n_points);
        let method = match s.method {
            ScalingMethod::MeanRatio => "mean-ratio",
            ScalingMethod::LogSpace => "log-space",
        };
        rec.push("scaling_method", method);
    }
    match ctx.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &rec.json()).context("cannot write output")?;
            writeln!(out)?;
        }
        f => rec.as_table().write(f, out)?,
    }
    Ok(())
}

fn simulate(
    ctx: &Ctx,
    n_researchers: Option<usize>,
    papers: Option<String>,
    citations: Option<String>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let papers = match papers {
        Some(s) => s.parse().map_err(|e| CliError::input(format!("--papers: {e}")))?,
        None => ctx.file.papers.unwrap_or(DEFAULT_PAPERS),
    };
    let citations = match citations {
        Some(s) => s.parse().map_err(|e| CliError::input(format!("--citations: {e}")))?,
        None => ctx.file.citations.unwrap_or(DEFAULT_CITATIONS),
    };
    let output = output
        .or(ctx.file.output.clone())
        .ok_or_else(|| CliError::input("simulate needs --output"))?;
    let config = PopulationConfig {
        n_researchers: n_researchers.or(ctx.file.n_researchers).unwrap_or(DEFAULT_RESEARCHERS),
        papers,
        citations,
        seed: ctx.seed,
    };
    let records = generate_population(&config).map_err(|e| CliError::input(e.to_string()))?;
    write_file(&output, |w| Ok(ingest::write_csv(&records, w)?))?;
    let settings = SimulateSettings {
        n_researchers: config.n_researchers,
        papers: config.papers,
        citations: config.citations,
    };
    write_manifest(&output, "simulate", ctx.seed, settings, &[])
}

fn parse_metric(s: &str) -> Result<Metric, CliError> {
    s.trim().parse().map_err(|e: report::ReportError| CliError::input(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn rank(
    ctx: &Ctx,
    input: InputArgs,
    metric: Option<String>,
    compare: Option<String>,
    top: Option<usize>,
    fig2: Option<PathBuf>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let metric = match metric {
        Some(m) => parse_metric(&m)?,
        None => ctx.file.metric.unwrap_or(Metric::O),
    };
    let compare = match compare.or(ctx.file.compare.clone()) {
        Some(c) => Some(parse_compare(&c)?),
        None => None,
    };
    let top = top.or(ctx.file.top).unwrap_or(DEFAULT_TOP);
    let fig2 = fig2.or(ctx.file.fig2.clone());
    let format = input_format(ctx, &input);
    let summaries = load_summaries(&input.inputs, format)?;

    let ranking = report::rank_by(&summaries, metric);
    let mut table = Table::new(&["rank", "id", metric.key()]);
    for e in &ranking.entries {
        table.push(vec![e.rank.into(), e.id.as_str().into(), metric_cell(metric, e.value)]);
    }

    let comparison = match compare {
        Some((a, b)) => {
            let cmp = report::compare_rankings(&report::rank_by(&summaries, a), &report::rank_by(&summaries, b))
                .map_err(|e| CliError::Internal(e.into()))?;
            let mut shifts = Table::new(&["id", "rank_a", "rank_b", "shift"]);
            for d in cmp.largest_shifts(top) {
                shifts.push(vec![d.id.as_str().into(), d.rank_a.into(), d.rank_b.into(), d.shift.into()]);
            }
            Some((a, b, cmp.kendall_tau, shifts))
        }
        None => None,
    };

    if let Some(path) = &fig2 {
        write_file(path, |w| Ok(report::emit_fig2_data(&summaries, w)?))?;
        let settings = AnalysisSettings {
            min_c: ctx.min_c,
            input_format: format,
            scaling: None,
            metric: Some(metric),
            compare,
        };
        write_manifest(path, "rank", ctx.seed, settings, &input.inputs)?;
    }

    match ctx.format {
        OutputFormat::Json => {
            let mut doc = json!({ "metric": metric.key(), "ranking": table.json_rows() });
            if let Some((a, b, tau, shifts)) = &comparison {
                doc["comparison"] = json!({
                    "a": a.key(),
                    "b": b.key(),
                    "kendall_tau": tau,
                    "largest_shifts": shifts.json_rows(),
                });
            }
            serde_json::to_writer_pretty(&mut *out, &doc).context("cannot write output")?;
            writeln!(out)?;
        }
        f => {
            table.write(f, &mut *out)?;
            if let Some((a, b, tau, shifts)) = &comparison {
                writeln!(out)?;
                let mut rec = Record::default();
                rec.push("a", a.key());
                rec.push("b", b.key());
                // tau is undefined below two researchers and left out
                if let Some(t) = tau {
                    rec.push("kendall_tau", *t);
                }
                rec.as_table().write(f, &mut *out)?;
                writeln!(out)?;
                shifts.write(f, &mut *out)?;
            }
        }
    }
    Ok(())
}

fn metric_cell(metric: Metric, value: f64) -> Cell {
    match metric {
        Metric::H | Metric::Total | Metric::Max => Cell::Int(value as i64),
        Metric::O | Metric::MeanCitations => Cell::Float(value),
    }
}

fn fetch(ctx: &Ctx, flags: SourceFlags, authors: &[String], out: &mut impl Write) -> Result<(), CliError> {
    let config = source_config(flags, &ctx.file, ctx.seed);
    config.validate().map_err(|e| CliError::input(e.to_string()))?;
    let fetcher = Fetcher::new(config.clone()).map_err(|e| CliError::input(e.to_string()))?;

    let mut table = Table::new(&["id", "status", "N", "error"]);
    let mut failed = 0;
    for id in authors {
        match fetcher.fetch_author(id) {
            Ok(record) => table.push(vec![id.as_str().into(), "ok".into(), record.n_papers().into(), Cell::Empty]),
            Err(e) => {
                failed += 1;
                log::warn!("{id}: {e}");
                table.push(vec![id.as_str().into(), "failed".into(), Cell::Empty, e.to_string().into()]);
            }
        }
    }
    table.write(ctx.format, &mut *out)?;
    if failed < authors.len() {
        let settings = json!({ "source": &config, "authors": authors });
        write_manifest(&config.cache_path, "fetch", ctx.seed, settings, &[])?;
    }
    if failed > 0 {
        return Err(CliError::PartialNetwork {
            failed,
            total: authors.len(),
        });
    }
    Ok(())
}

fn cache_compact(ctx: &Ctx, cache: Option<PathBuf>, out: &mut impl Write) -> Result<(), CliError> {
    let path = cache
        .or(ctx.file.cache.clone())
        .unwrap_or_else(|| ingest::SourceConfig::default().cache_path);
    let report = Cache::new(&path).compact().map_err(|e| CliError::Internal(e.into()))?;
    let mut rec = Record::default();
    rec.push("cache", path.display().to_string());
    rec.push("lines_before", report.lines_before);
    rec.push("lines_after", report.lines_after);
    rec.push("corrupt_dropped", report.corrupt_dropped);
    match ctx.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &rec.json()).context("cannot write output")?;
            writeln!(out)?;
        }
        f => rec.as_table().write(f, out)?,
    }
    write_manifest(&path, "cache-compact", ctx.seed, json!({}), std::slice::from_ref(&path))
}
