use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use ureq::Agent;

use super::{Cache, IngestError, SourceConfig};
use crate::metrics::CitationRecord;

/// Spacing added to every request interval; keeps the server-observed rate
/// under the limit despite connection setup jitter.
const RATE_MARGIN: Duration = Duration::from_millis(5);

/// Upper bound on retry jitter, as a fraction of the backoff delay.
const JITTER_FRACTION: f64 = 0.25;

/// Spaces requests at least `1 / rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(1.0 / requests_per_second) + RATE_MARGIN,
            next_slot: Mutex::new(None),
        }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        if let Some(at) = *slot {
            if at > now {
                thread::sleep(at - now);
            }
        }
        *slot = Some(Instant::now() + self.interval);
    }
}

enum Attempt {
    Done(Value),
    Retry { reason: String, wait: Option<Duration> },
    Fail(IngestError),
}

/// Client for a works API that caches everything it fetches.
///
/// A `Fetcher` is `Sync`; sharing one across threads shares its rate limiter
/// and cache writer.
pub struct Fetcher {
    config: SourceConfig,
    agent: Agent,
    limiter: RateLimiter,
    cache: Cache,
    jitter: Mutex<ChaCha8Rng>,
}

impl Fetcher {
    pub fn new(config: SourceConfig) -> Result<Self, IngestError> {
        config.validate()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout_duration()))
            .http_status_as_error(false)
            .user_agent(user_agent(&config))
            .build()
            .into();
        Ok(Self {
            limiter: RateLimiter::new(config.rate_limit),
            cache: Cache::new(&config.cache_path),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(config.jitter_seed)),
            agent,
            config,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Walks every page of the author's works and returns their citation
    /// counts as a record, which is also appended to the cache.
    pub fn fetch_author(&self, author_id: &str) -> Result<CitationRecord, IngestError> {
        if author_id.is_empty() {
            return Err(IngestError::InvalidConfig("empty author id".to_owned()));
        }
        let mut counts = Vec::new();
        let mut cursor = "*".to_owned();
        loop {
            let page = self.get_page(author_id, &cursor)?;
            let results = page
                .get("results")
                .and_then(Value::as_array)
                .ok_or_else(|| IngestError::SchemaMismatch("response lacks `results` array".to_owned()))?;
            for (i, work) in results.iter().enumerate() {
                counts.push(self.work_count(work).ok_or_else(|| {
                    IngestError::SchemaMismatch(format!(
                        "work {i} lacks integer `{}`",
                        self.config.count_field
                    ))
                })?);
            }
            let next = page
                .pointer("/meta/next_cursor")
                .and_then(Value::as_str)
                .filter(|c| !c.is_empty());
            match next {
                Some(c) if !results.is_empty() => {
                    if c == cursor {
                        return Err(IngestError::SchemaMismatch("pagination cursor did not advance".to_owned()));
                    }
                    cursor = c.to_owned();
                }
                _ => break,
            }
        }
        let record = CitationRecord::new(author_id, counts);
        self.cache.append(&record)?;
        Ok(record)
    }

    fn work_count(&self, work: &Value) -> Option<u64> {
        self.config
            .count_field
            .split('.')
            .try_fold(work, |v, key| v.get(key))?
            .as_u64()
    }

    fn get_page(&self, author_id: &str, cursor: &str) -> Result<Value, IngestError> {
        let mut retries = 0;
        loop {
            self.limiter.acquire();
            let (reason, wait) = match self.attempt(author_id, cursor) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry { reason, wait } => (reason, wait),
            };
            if retries >= self.config.max_retries {
                return Err(IngestError::TransportError(format!(
                    "{reason} (after {} attempts)",
                    retries + 1
                )));
            }
            let delay = self.backoff(retries).max(wait.unwrap_or_default());
            log::warn!("{author_id}: {reason}; retrying in {delay:?}");
            thread::sleep(delay);
            retries += 1;
        }
    }

    fn attempt(&self, author_id: &str, cursor: &str) -> Attempt {
        let url = format!("{}/works", self.config.base_url.trim_end_matches('/'));
        let mut req = self
            .agent
            .get(&url)
            .query("filter", format!("author.id:{author_id}"))
            .query("per-page", self.config.per_page.to_string())
            .query("cursor", cursor);
        if let Some(email) = &self.config.contact_email {
            req = req.header("From", email).query("mailto", email);
        }
        let mut resp = match req.call() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    reason: e.to_string(),
                    wait: None,
                }
            }
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            404 => return Attempt::Fail(IngestError::AuthorNotFound(author_id.to_owned())),
            429 => {
                let wait = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .filter(|s| s.is_finite() && *s >= 0.0)
                    .map(Duration::from_secs_f64);
                return Attempt::Retry {
                    reason: "HTTP 429".to_owned(),
                    wait,
                };
            }
            500..=599 => {
                return Attempt::Retry {
                    reason: format!("HTTP {status}"),
                    wait: None,
                }
            }
            _ => return Attempt::Fail(IngestError::TransportError(format!("HTTP {status}"))),
        }
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => {
                return Attempt::Retry {
                    reason: e.to_string(),
                    wait: None,
                }
            }
        };
        match serde_json::from_str(&body) {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fail(IngestError::SchemaMismatch(format!("invalid JSON: {e}"))),
        }
    }

    /// `base * 2^retry`, stretched by up to `JITTER_FRACTION`.
    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.backoff_base * 2f64.powi(retry as i32);
        let jitter: f64 = self
            .jitter
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .random_range(0.0..1.0);
        Duration::from_secs_f64(base * (1.0 + JITTER_FRACTION * jitter))
    }
}

fn user_agent(config: &SourceConfig) -> String {
    let base = concat!("citerank/", env!("CARGO_PKG_VERSION"));
    match &config.contact_email {
        Some(email) => format!("{base} (mailto:{email})"),
        None => base.to_owned(),
    }
}

/// One-shot fetch with a fresh client.
pub fn fetch_author(config: &SourceConfig, author_id: &str) -> Result<CitationRecord, IngestError> {
    Fetcher::new(config.clone())?.fetch_author(author_id)
}
