//! Reading line-delimited tweet archives and exact deduplication.
//!
//! A tweet is dropped when either its id or the 64-bit FNV-1a hash of its
//! canonical text (lowercased, whitespace collapsed) has been seen before.
//! Parsing is a pure per-line function and runs in parallel batches; the
//! dedup stage is serialized so output keeps first-occurrence order.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use chrono::{DateTime, TimeZone, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

const BATCH_LINES: usize = 8192;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("record is not valid UTF-8")]
    InvalidEncoding,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A tweet as read from the archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: u64,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub declared_lang: Option<String>,
}

#[derive(Serialize)]
struct WireRecord<'a> {
    id: u64,
    text: &'a str,
    created_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lang: Option<&'a str>,
}

fn epoch() -> DateTime<Utc> {
    Utc.timestamp_opt(0, 0).single().expect("epoch is representable")
}

fn parse_id(value: &Value) -> Result<u64, IngestError> {
    match value {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| IngestError::MalformedRecord(format!("id {n} is not an unsigned integer"))),
        Value::String(s) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => s
            .parse()
            .map_err(|_| IngestError::MalformedRecord(format!("id {s:?} overflows u64"))),
        other => Err(IngestError::MalformedRecord(format!("invalid id {other}"))),
    }
}

/// Parses one JSON line into a [`RawTweet`].
pub fn parse_record(line: &str) -> Result<RawTweet, IngestError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedRecord("record is not a JSON object".into()))?;

    let id = parse_id(
        obj.get("id")
            .ok_or_else(|| IngestError::MalformedRecord("missing field `id`".into()))?,
    )?;
    let text = match obj.get("text") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::String(_)) => return Err(IngestError::MalformedRecord("empty `text`".into())),
        Some(_) => return Err(IngestError::MalformedRecord("`text` is not a string".into())),
        None => return Err(IngestError::MalformedRecord("missing field `text`".into())),
    };
    let created_at = match obj.get("created_at") {
        None | Some(Value::Null) => epoch(),
        Some(Value::String(s)) => {
            let parsed = DateTime::parse_from_rfc3339(s)
                .map_err(|e| IngestError::MalformedRecord(format!("created_at {s:?}: {e}")))?;
            Utc.timestamp_opt(parsed.timestamp(), 0)
                .single()
                .ok_or_else(|| IngestError::MalformedRecord(format!("created_at {s:?} out of range")))?
        }
        Some(other) => {
            return Err(IngestError::MalformedRecord(format!("invalid created_at {other}")))
        }
    };
    let declared_lang = match obj.get("lang") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => return Err(IngestError::MalformedRecord(format!("invalid lang {other}"))),
    };
    Ok(RawTweet {
        id,
        text,
        created_at,
        declared_lang,
    })
}

/// Byte-level entry point: rejects non-UTF-8 input before JSON parsing.
pub fn parse_record_bytes(line: &[u8]) -> Result<RawTweet, IngestError> {
    let line = std::str::from_utf8(line).map_err(|_| IngestError::InvalidEncoding)?;
    parse_record(line)
}

/// Serializes a tweet as one JSON line (without the trailing newline).
pub fn serialize_record(tweet: &RawTweet) -> String {
    let wire = WireRecord {
        id: tweet.id,
        text: &tweet.text,
        created_at: tweet.created_at.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        lang: tweet.declared_lang.as_deref(),
    };
    serde_json::to_string(&wire).expect("wire record always serializes")
}

/// Lowercases and collapses whitespace runs to single spaces.
pub fn canonical_text(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for word in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn text_hash(text: &str) -> u64 {
    fnv1a64(canonical_text(text).as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupOutcome {
    Unique,
    DuplicateId,
    DuplicateText,
}

#[derive(Debug, Default, Clone)]
pub struct DedupState {
    seen_ids: HashSet<u64>,
    seen_text_hashes: HashSet<u64>,
}

impl DedupState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the tweet if unseen. Duplicates leave the state untouched.
    pub fn check(&mut self, tweet: &RawTweet) -> DedupOutcome {
        self.check_parts(tweet.id, text_hash(&tweet.text))
    }

    fn check_parts(&mut self, id: u64, hash: u64) -> DedupOutcome {
        if self.seen_ids.contains(&id) {
            return DedupOutcome::DuplicateId;
        }
        if self.seen_text_hashes.contains(&hash) {
            return DedupOutcome::DuplicateText;
        }
        self.seen_ids.insert(id);
        self.seen_text_hashes.insert(hash);
        DedupOutcome::Unique
    }

    pub fn unique_count(&self) -> usize {
        self.seen_ids.len()
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub read: u64,
    pub malformed: u64,
    pub duplicates_id: u64,
    pub duplicates_text: u64,
    pub emitted: u64,
}

impl IngestStats {
    fn record(&mut self, outcome: DedupOutcome) {
        match outcome {
            DedupOutcome::Unique => self.emitted += 1,
            DedupOutcome::DuplicateId => self.duplicates_id += 1,
            DedupOutcome::DuplicateText => self.duplicates_text += 1,
        }
    }
}

/// Iterator adapter returned by [`dedup`].
pub struct Dedup<I> {
    inner: I,
    state: DedupState,
    stats: IngestStats,
}

impl<I> Dedup<I> {
    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn state(&self) -> &DedupState {
        &self.state
    }
}

impl<I: Iterator<Item = RawTweet>> Iterator for Dedup<I> {
    type Item = RawTweet;

    fn next(&mut self) -> Option<RawTweet> {
        for tweet in self.inner.by_ref() {
            self.stats.read += 1;
            let outcome = self.state.check(&tweet);
            self.stats.record(outcome);
            if outcome == DedupOutcome::Unique {
                return Some(tweet);
            }
        }
        None
    }
}

/// Drops tweets whose id or canonical text was already seen, keeping first occurrences.
pub fn dedup<I: IntoIterator<Item = RawTweet>>(tweets: I) -> Dedup<I::IntoIter> {
    Dedup {
        inner: tweets.into_iter(),
        state: DedupState::new(),
        stats: IngestStats::default(),
    }
}

fn read_batch<R: BufRead>(reader: &mut R, batch: &mut Vec<Vec<u8>>) -> io::Result<()> {
    batch.clear();
    while batch.len() < BATCH_LINES {
        let mut line = Vec::new();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        while matches!(line.last(), Some(b'\n' | b'\r')) {
            line.pop();
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        batch.push(line);
    }
    Ok(())
}

/// Streams an archive through parse + dedup, writing surviving records as JSON lines.
///
/// Parsing uses the ambient rayon pool; memory is bounded by one batch plus the dedup state.
pub fn ingest_stream<R: BufRead, W: Write>(
    mut reader: R,
    writer: &mut W,
    state: &mut DedupState,
) -> Result<IngestStats, IngestError> {
    let mut stats = IngestStats::default();
    let mut batch = Vec::with_capacity(BATCH_LINES);
    loop {
        read_batch(&mut reader, &mut batch)?;
        if batch.is_empty() {
            break;
        }
        let parsed: Vec<Option<(RawTweet, u64)>> = batch
            .par_iter()
            .map(|line| {
                parse_record_bytes(line).ok().map(|t| {
                    let h = text_hash(&t.text);
                    (t, h)
                })
            })
            .collect();
        for item in parsed {
            stats.read += 1;
            let Some((tweet, hash)) = item else {
                stats.malformed += 1;
                continue;
            };
            let outcome = state.check_parts(tweet.id, hash);
            stats.record(outcome);
            if outcome == DedupOutcome::Unique {
                writer.write_all(serialize_record(&tweet).as_bytes())?;
                writer.write_all(b"\n")?;
            }
        }
    }
    Ok(stats)
}

/// Reads already-ingested records without dedup; malformed lines are counted and skipped.
pub fn read_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<RawTweet, IngestError>> {
    reader.split(b'\n').filter_map(|line| match line {
        Err(e) => Some(Err(IngestError::Io(e))),
        Ok(mut bytes) => {
            if bytes.last() == Some(&b'\r') {
                bytes.pop();
            }
            if bytes.iter().all(u8::is_ascii_whitespace) {
                None
            } else {
                Some(parse_record_bytes(&bytes))
            }
        }
    })
}
