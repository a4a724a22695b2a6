//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/common/stub.rs"]
mod stub;

use std::fs;
use std::process::{Command, ExitCode};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use citerank_core::fit::{self, ScalingMethod};
use citerank_core::ingest::{self, Fetcher, SourceConfig};
use citerank_core::metrics::{h_index, o_index, round_half_up, summarize, CitationRecord, MetricSummary};
use citerank_core::report::{compare_rankings, kendall_tau_b, rank_by, Metric};
use citerank_core::synth::{bin_by_total, generate_population, CitationDistribution, PapersDistribution, PopulationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Pareto};
use rayon::prelude::*;
use stub::{works_page, Reply, StubServer};

const CORPUS_SIZE: u64 = 100_000;
const CORPUS_SEED: u64 = 0x5eed;
const POPULATION_SEED: u64 = 1;
const COUNT_CAP: f64 = 1e9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 h-index matches brute force on 1e5 records", criterion_1),
        ("2 o^2 = m h and the 1680 fixture", criterion_2),
        ("3 bounds on h and m", criterion_3),
        ("4 least squares recovery and noise level", criterion_4),
        ("5 synthetic lognormal: a2 < 0 and tau(N, h) > 0 per C-bin", criterion_5),
        ("6 uniform researchers and scale covariance", criterion_6),
        ("7 h and o rankings diverge", criterion_7),
        ("8 round trips, determinism and fetch politeness", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Random corpus shared by criteria 1-3. Records are rebuilt on demand from
// their index so the 1e5 records never sit in memory at once.

fn corpus_counts(i: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    rng.set_stream(i);
    let n = ((rng.random::<f64>() * 10_001f64.ln()).exp() - 1.0).floor() as usize;
    let n = n.min(10_000);
    let draw: Box<dyn Fn(&mut ChaCha8Rng) -> f64> = match i % 3 {
        0 => {
            let p = Pareto::new(1.0, rng.random_range(1.05..3.0)).unwrap();
            Box::new(move |r| p.sample(r) - 1.0)
        }
        1 => {
            let l = LogNormal::new(rng.random_range(0.0..3.0), rng.random_range(0.5..2.5)).unwrap();
            Box::new(move |r| l.sample(r))
        }
        _ => {
            let zero = rng.random_range(0.1..0.7);
            let p = Pareto::new(1.0, rng.random_range(1.1..2.0)).unwrap();
            Box::new(move |r| if r.random::<f64>() < zero { 0.0 } else { p.sample(r) })
        }
    };
    (0..n).map(|_| draw(&mut rng).min(COUNT_CAP).floor() as u64).collect()
}

/// Maximum r with c_r >= r, checking every r.
fn brute_h(counts: &[u64]) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    (1..=sorted.len() as u64)
        .filter(|&r| sorted[r as usize - 1] >= r)
        .max()
        .unwrap_or(0)
}

fn over_corpus<F>(f: F) -> usize
where
    F: Fn(&CitationRecord, &[u64]) -> bool + Sync,
{
    (0..CORPUS_SIZE)
        .into_par_iter()
        .filter(|&i| {
            let counts = corpus_counts(i);
            let record = CitationRecord::new(format!("r{i}"), counts.clone());
            !f(&record, &counts)
        })
        .count()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mismatches = over_corpus(|rec, counts| h_index(rec) == brute_h(counts));
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 30.0,
        format!("{mismatches} mismatches in {CORPUS_SIZE} records, {secs:.1}s (limit 30s)"),
    )
}

fn criterion_2() -> Outcome {
    let violations = over_corpus(|rec, _| {
        let (m, h) = (rec.max_citations() as f64, h_index(rec) as f64);
        let o = o_index(rec);
        (o * o - m * h).abs() <= 1e-12 * m * h
    });

    // h is the only integer for which sqrt(37641 h) rounds to 1680
    let sweep: Vec<u64> = (1..=1000u64)
        .filter(|&h| ((37641.0 * h as f64).sqrt() + 0.5).floor() == 1680.0)
        .collect();
    let perdew = perdew();
    let s = summarize(&perdew);
    let rounded = round_half_up(s.o_index);
    check(
        violations == 0 && sweep == [75] && s.max_citations == 37641 && s.h_index == 75 && rounded == 1680,
        format!(
            "{violations} identity violations; sweep {sweep:?}; fixture m={} h={} o={:.3} -> {rounded}",
            s.max_citations, s.h_index, s.o_index
        ),
    )
}

fn criterion_3() -> Outcome {
    let violations = over_corpus(|rec, counts| {
        let h = h_index(rec);
        let n = counts.len() as u64;
        let c: u64 = counts.iter().sum();
        let m = counts.iter().copied().max().unwrap_or(0);
        h <= c.isqrt() && h <= n && h <= m && m <= c && (n == 0 || c <= m * n)
    });
    check(violations == 0, format!("{violations} violations"))
}

fn model(sqrt_c: f64, sqrt_mean: f64) -> f64 {
    0.584 + 0.00023 * sqrt_c - 0.020 * sqrt_mean
}

fn dataset(rows: impl IntoIterator<Item = (f64, f64, f64)>) -> fit::RegressionDataset {
    let mut d = fit::RegressionDataset::default();
    for (i, (sqrt_total, sqrt_mean, h_ratio)) in rows.into_iter().enumerate() {
        d.push(format!("p{i}"), fit::Observation { sqrt_total, sqrt_mean, h_ratio });
    }
    d
}

fn criterion_4() -> Outcome {
    let grid = (0..4).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| {
        let x = 10.0 + 45.0 * i as f64 + 3.0 * j as f64;
        let z = 1.5 + 2.25 * j as f64 + 0.5 * (i * i) as f64;
        (x, z, model(x, z))
    });
    let exact = fit::ols_fit(&dataset(grid)).map_err(|e| e.to_string())?;
    let errors: Vec<f64> = exact
        .coefficients()
        .iter()
        .zip([0.584, 0.00023, -0.020])
        .map(|(got, want)| (got - want).abs())
        .collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.057).unwrap();
    let rows: Vec<_> = (0..10_000)
        .map(|_| {
            let x = rng.random_range(5.0..400.0);
            let z = rng.random_range(1.0..12.0);
            (x, z, model(x, z) + noise.sample(&mut rng))
        })
        .collect();
    let noisy = fit::ols_fit(&dataset(rows)).map_err(|e| e.to_string())?;
    let rel = (noisy.residual_std - 0.057).abs() / 0.057;
    check(
        worst <= 1e-9 && rel <= 0.05,
        format!(
            "exact fit max error {worst:.2e} (limit 1e-9); residual_std {:.5} is {:.2}% from 0.057 (limit 5%)",
            noisy.residual_std,
            100.0 * rel
        ),
    )
}

fn lognormal_population() -> Vec<MetricSummary> {
    let config = PopulationConfig {
        n_researchers: 10_000,
        papers: PapersDistribution::LogUniform { min: 20, max: 2000 },
        citations: CitationDistribution::LogNormal { mu: 1.0, sigma: 1.2 },
        seed: POPULATION_SEED,
    };
    generate_population(&config).unwrap().iter().map(summarize).collect()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let pop = lognormal_population();
    let global = fit::build_dataset(&pop, 0)
        .and_then(|d| fit::ols_fit(&d))
        .map_err(|e| e.to_string())?;

    let mut n_bins = 0;
    let mut bad: Vec<String> = Vec::new();
    let mut min_tau = f64::INFINITY;
    let mut mean_tau_negative = 0;
    for bin in bin_by_total(&pop, 0.1) {
        if bin.members.len() < 30 {
            continue;
        }
        n_bins += 1;
        let n: Vec<f64> = bin.members.iter().map(|s| s.n_papers as f64).collect();
        let h: Vec<f64> = bin.members.iter().map(|s| s.h_index as f64).collect();
        let c: Vec<f64> = bin.members.iter().map(|s| s.mean_citations).collect();
        let r: Vec<f64> = bin.members.iter().map(|s| s.h_ratio).collect();
        let tau = kendall_tau_b(&n, &h);
        if kendall_tau_b(&c, &r).is_some_and(|t| t < 0.0) {
            mean_tau_negative += 1;
        }
        match tau {
            Some(t) if t > 0.0 => min_tau = min_tau.min(t),
            other => {
                let t = other.unwrap_or(f64::NAN);
                min_tau = min_tau.min(t);
                bad.push(format!("C in [{:.0}, {:.0}) n={} tau={t:.3}", bin.lower, bin.upper, bin.members.len()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "a2 = {:.5}; {} of {n_bins} bins with >= 30 members have tau(N, h) <= 0 (min {min_tau:.3}); \
         tau(<c>, h/sqrt C) < 0 in {mean_tau_negative} bins; {secs:.1}s{}",
        global.mean_slope,
        bad.len(),
        if bad.is_empty() { String::new() } else { format!("; failing bins: {}", bad.join(", ")) }
    );
    check(global.mean_slope < 0.0 && n_bins > 0 && bad.is_empty() && secs < 120.0, detail)
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut uniform = Vec::new();
    for h in 1..=300u64 {
        let s = summarize(&CitationRecord::new(format!("u{h}"), vec![h; h as usize]));
        let ratio = fit::scaling_ratio(&s).ok_or("no ratio")?;
        let want = 1.0 / (h as f64).powf(0.25);
        worst = worst.max((ratio - want).abs() / want);
        uniform.push(s);
    }

    let pop: Vec<MetricSummary> = lognormal_population().into_iter().take(2000).collect();
    let mut cov_worst = 0.0f64;
    for method in [ScalingMethod::MeanRatio, ScalingMethod::LogSpace] {
        let base = fit::scaling_fit(&pop, method).map_err(|e| e.to_string())?;
        for lambda in [0.5, 3.0, 1234.5] {
            let scaled: Vec<MetricSummary> = pop
                .iter()
                .cloned()
                .map(|mut s| {
                    s.o_index *= lambda;
                    s
                })
                .collect();
            let f = fit::scaling_fit(&scaled, method).map_err(|e| e.to_string())?;
            cov_worst = cov_worst
                .max((f.k - lambda * base.k).abs() / (lambda * base.k))
                .max((f.ratio_std - lambda * base.ratio_std).abs() / (lambda * base.ratio_std));
        }
    }
    check(
        worst <= 1e-10 && cov_worst <= 1e-10,
        format!("uniform ratio max rel error {worst:.2e}; scale covariance max rel error {cov_worst:.2e} (limit 1e-10)"),
    )
}

fn fixture(parts: &[(u64, usize)], id: &str) -> CitationRecord {
    let counts = parts
        .iter()
        .flat_map(|&(c, k)| std::iter::repeat_n(c, k))
        .collect();
    CitationRecord::new(id, counts)
}

fn perdew() -> CitationRecord {
    fixture(&[(37641, 1), (600, 74), (40, 242)], "perdew")
}

fn heeger() -> CitationRecord {
    fixture(&[(5482, 1), (500, 119), (22, 1164)], "heeger")
}

fn criterion_7() -> Outcome {
    let pop = lognormal_population();
    let cmp = compare_rankings(&rank_by(&pop, Metric::H), &rank_by(&pop, Metric::O)).map_err(|e| e.to_string())?;
    let tau = cmp.kendall_tau.ok_or("tau undefined")?;
    let max_shift = cmp.displacements.iter().map(|d| d.shift.unsigned_abs()).max().unwrap_or(0);

    let fx = [summarize(&heeger()), summarize(&perdew())];
    let first_o = rank_by(&fx, Metric::O).entries[0].id.clone();
    let first_h = rank_by(&fx, Metric::H).entries[0].id.clone();
    check(
        tau < 1.0 && max_shift >= 10 && first_o == "perdew",
        format!("tau(h, o) = {tau:.4}; largest shift {max_shift}; first under o: {first_o}, under h: {first_h}"),
    )
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();

    let config = PopulationConfig {
        n_researchers: 10_000,
        papers: PapersDistribution::Uniform { min: 0, max: 40 },
        citations: CitationDistribution::PowerLaw { exponent: 1.8, cap: 1_000_000 },
        seed: 8,
    };
    let records = generate_population(&config).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    ingest::write_csv(&records, &mut csv).map_err(|e| e.to_string())?;
    let from_csv = ingest::parse_csv(csv.as_slice()).map_err(|e| e.to_string())?;
    let mut json = Vec::new();
    ingest::write_json(&records, &mut json).map_err(|e| e.to_string())?;
    let from_json = ingest::parse_json(json.as_slice()).map_err(|e| e.to_string())?;
    let mut csv_again = Vec::new();
    ingest::write_csv(&from_csv, &mut csv_again).map_err(|e| e.to_string())?;
    let round_trip = from_csv == records && from_json == records && csv_again == csv;
    notes.push(format!("{} records round trip: {round_trip}", records.len()));

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let simulate = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_citerank"))
            .args(["--seed", "99", "simulate", "--n-researchers", "2000", "--output"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("simulate exited with {status}"));
        }
        fs::read(&out).map_err(|e| e.to_string())
    };
    let (a, b) = (simulate("a.csv")?, simulate("b.csv")?);
    let identical = a == b && !a.is_empty();
    notes.push(format!("simulate byte-identical: {identical} ({} bytes)", a.len()));

    // "flaky" fails twice before answering, "down" never answers
    let flaky_calls = Arc::new(AtomicUsize::new(0));
    let calls = Arc::clone(&flaky_calls);
    let server = StubServer::start(move |req| match req.query.get("filter").map(String::as_str) {
        Some("author.id:flaky") if calls.fetch_add(1, Ordering::SeqCst) < 2 => Reply::status(503),
        Some("author.id:down") => Reply::status(500),
        _ => Reply::json(works_page(&[3, 2, 1], None)),
    });
    let rate = 8.0;
    let source = SourceConfig {
        base_url: server.base_url.clone(),
        rate_limit: rate,
        max_retries: 3,
        timeout: 5.0,
        cache_path: dir.path().join("cache.jsonl"),
        backoff_base: 0.01,
        ..Default::default()
    };
    let fetcher = Fetcher::new(source.clone()).map_err(|e| e.to_string())?;
    let results: Vec<(String, bool)> = std::thread::scope(|sc| {
        let handles: Vec<_> = ["flaky", "down", "a", "b", "c", "d"]
            .into_iter()
            .map(|id| {
                let f = &fetcher;
                sc.spawn(move || (id.to_owned(), f.fetch_author(id).is_ok()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let log = server.requests();
    let per = |id: &str| {
        log.iter()
            .filter(|r| r.query.get("filter").map(String::as_str) == Some(&format!("author.id:{id}")))
            .count()
    };
    let peak = server.max_in_window(Duration::from_secs(1));
    let outcomes_ok = results.iter().all(|(id, ok)| *ok == (id != "down"));
    let retries_ok = per("flaky") == 3 && per("down") == source.max_retries as usize + 1;
    let rate_ok = peak <= rate as usize;
    notes.push(format!(
        "stub log: {} requests, flaky {}, down {} (expect 3 and {}), peak {peak} per 1s window (limit {rate})",
        log.len(),
        per("flaky"),
        per("down"),
        source.max_retries + 1
    ));

    check(round_trip && identical && outcomes_ok && retries_ok && rate_ok, notes.join("; "))
}
