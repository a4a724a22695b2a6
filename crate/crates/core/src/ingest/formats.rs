use std::io::{self, Read};

use indexmap::IndexMap;
use serde_json::Value;

use super::IngestError;
use crate::metrics::CitationRecord;

fn gather(pooled: IndexMap<String, Vec<u64>>) -> Vec<CitationRecord> {
    pooled
        .into_iter()
        .map(|(id, counts)| CitationRecord::new(id, counts))
        .collect()
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => IngestError::MalformedRow {
            line,
            reason: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Utf8 { .. } => IngestError::MalformedRow {
            line,
            reason: "invalid UTF-8".to_owned(),
        },
        other => IngestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Reads the `id,citations` CSV schema.
///
/// Empty input (no header at all) yields no records.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CitationRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(csv_error)?,
    };
    let names: Vec<&str> = header.iter().map(|f| f.trim_start_matches('\u{feff}')).collect();
    if names != ["id", "citations"] {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!("expected header `id,citations`, found `{}`", names.join(",")),
        });
    }

    let mut pooled: IndexMap<String, Vec<u64>> = IndexMap::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let id = &row[0];
        if id.is_empty() {
            return Err(IngestError::MalformedRow {
                line,
                reason: "empty id".to_owned(),
            });
        }
        let entry = pooled.entry(id.to_owned()).or_default();
        let field = row[1].trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<i64>() {
            Ok(c) if c < 0 => return Err(IngestError::NegativeCount { line }),
            Ok(c) => entry.push(c as u64),
            Err(_) => match field.parse::<u64>() {
                Ok(c) => entry.push(c),
                Err(_) => {
                    return Err(IngestError::MalformedRow {
                        line,
                        reason: format!("citation count `{field}` is not an integer"),
                    })
                }
            },
        }
    }
    Ok(gather(pooled))
}

/// Writes records in the CSV schema, one row per paper.
pub fn write_csv<W: io::Write>(records: &[CitationRecord], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    let result: csv::Result<()> = (|| {
        w.write_record(["id", "citations"])?;
        for r in records {
            if r.counts().is_empty() {
                w.write_record([r.id(), ""])?;
            }
            for c in r.counts() {
                w.write_record([r.id(), &c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    result.map_err(csv_error)
}

/// Reads the JSON array schema.
pub fn parse_json<R: Read>(mut input: R) -> Result<Vec<CitationRecord>, IngestError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let items = doc
        .as_array()
        .ok_or_else(|| IngestError::MalformedDocument("top level is not an array".to_owned()))?;

    let mut pooled: IndexMap<String, Vec<u64>> = IndexMap::new();
    for (i, item) in items.iter().enumerate() {
        let (id, counts) = json_record(item)
            .map_err(|reason| IngestError::MalformedDocument(format!("{reason} (record {i})")))?;
        pooled.entry(id).or_default().extend(counts);
    }
    Ok(gather(pooled))
}

/// Extracts `(id, counts)` from one `{"id", "counts"}` object.
pub(super) fn json_record(item: &Value) -> Result<(String, Vec<u64>), String> {
    let id = item
        .get("id")
        .and_then(Value::as_str)
        .ok_or("missing string `id`")?;
    if id.is_empty() {
        return Err("empty id".to_owned());
    }
    let counts = item
        .get("counts")
        .and_then(Value::as_array)
        .ok_or("missing array `counts`")?
        .iter()
        .map(json_count)
        .collect::<Result<Vec<u64>, String>>()?;
    Ok((id.to_owned(), counts))
}

fn json_count(v: &Value) -> Result<u64, String> {
    if let Some(c) = v.as_u64() {
        return Ok(c);
    }
    match v {
        Value::Number(n) if n.as_i64().is_some() => Err("negative count".to_owned()),
        Value::Number(_) => Err("non-integer count".to_owned()),
        _ => Err(format!("count `{v}` is not a number")),
    }
}

/// Writes records as a JSON array.
pub fn write_json<W: io::Write>(records: &[CitationRecord], out: W) -> Result<(), IngestError> {
    let doc: Vec<Value> = records
        .iter()
        .map(|r| serde_json::json!({ "id": r.id(), "counts": r.counts() }))
        .collect();
    serde_json::to_writer(out, &doc).map_err(|e| IngestError::Io(e.into()))
}
