use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use indexmap::IndexMap;
use serde_json::Value;

use super::formats::json_record;
use super::{IngestError, SourceConfig};
use crate::metrics::CitationRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub record: CitationRecord,
    pub fetched_at: DateTime<Utc>,
}

/// Contents of a cache file after last-write-wins resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CacheScan {
    pub entries: IndexMap<String, CacheEntry>,
    /// 1-based numbers of lines that failed to parse.
    pub corrupt_lines: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompactReport {
    pub lines_before: usize,
    pub lines_after: usize,
    pub corrupt_dropped: usize,
}

/// Append-only JSON-lines cache of fetched records.
///
/// Appends go through one lock so concurrent fetches never interleave
/// partial lines.
#[derive(Debug)]
pub struct Cache {
    path: PathBuf,
    writer: Mutex<()>,
}

impl Cache {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            writer: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &CitationRecord) -> Result<(), IngestError> {
        self.append_at(record, Utc::now())
    }

    pub fn append_at(
        &self,
        record: &CitationRecord,
        fetched_at: DateTime<Utc>,
    ) -> Result<(), IngestError> {
        let line = entry_line(record, fetched_at);
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }

    /// Reads the whole cache. A missing file is an empty cache.
    pub fn scan(&self) -> Result<CacheScan, IngestError> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheScan::default()),
            Err(e) => return Err(e.into()),
        };
        let mut scan = CacheScan::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match parse_entry(&line) {
                Some(entry) => {
                    let id = entry.record.id().to_owned();
                    // last write wins, but keep the id's first position
                    scan.entries.insert(id, entry);
                }
                None => {
                    let err = IngestError::CacheCorrupt { line: i + 1 };
                    log::warn!("{}: {err}; skipped", self.path.display());
                    scan.corrupt_lines.push(i + 1);
                }
            }
        }
        Ok(scan)
    }

    pub fn load(&self, author_id: &str) -> Result<Option<CitationRecord>, IngestError> {
        Ok(self
            .scan()?
            .entries
            .shift_remove(author_id)
            .map(|e| e.record))
    }

    /// Rewrites the file with one line per id, dropping corrupt lines.
    pub fn compact(&self) -> Result<CompactReport, IngestError> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let lines_before = match fs::read_to_string(&self.path) {
            Ok(text) => text.lines().filter(|l| !l.trim().is_empty()).count(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e.into()),
        };
        let scan = self.scan()?;
        let mut tmp = self.path.clone().into_os_string();
        tmp.push(".compact");
        let tmp = PathBuf::from(tmp);
        {
            let mut out = File::create(&tmp)?;
            for entry in scan.entries.values() {
                out.write_all(entry_line(&entry.record, entry.fetched_at).as_bytes())?;
            }
            out.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        Ok(CompactReport {
            lines_before,
            lines_after: scan.entries.len(),
            corrupt_dropped: scan.corrupt_lines.len(),
        })
    }
}

fn entry_line(record: &CitationRecord, fetched_at: DateTime<Utc>) -> String {
    let value = serde_json::json!({
        "id": record.id(),
        "counts": record.counts(),
        "fetched_at": fetched_at.to_rfc3339_opts(SecondsFormat::Millis, true),
    });
    format!("{value}\n")
}

fn parse_entry(line: &str) -> Option<CacheEntry> {
    let value: Value = serde_json::from_str(line).ok()?;
    let (id, counts) = json_record(&value).ok()?;
    let fetched_at = DateTime::parse_from_rfc3339(value.get("fetched_at")?.as_str()?)
        .ok()?
        .with_timezone(&Utc);
    Some(CacheEntry {
        record: CitationRecord::new(id, counts),
        fetched_at,
    })
}

/// Cached record for `author_id` under `config.cache_path`, if any.
pub fn cache_load(
    config: &SourceConfig,
    author_id: &str,
) -> Result<Option<CitationRecord>, IngestError> {
    Cache::new(&config.cache_path).load(author_id)
}
