//! Rating snapshots: parsing, validation, serialization and re-ranking.
//!
//! A snapshot is one page of a rating service for a category and period.
//! Every other module reads its `(rank, hosts, hits)` triples from here, so
//! the structural invariants are checked once, at construction:
//!
//! - ranks run exactly `1..=n` in list order;
//! - the column named by the rank key is non-increasing along the list;
//! - hosts and hits are finite and non-negative.
//!
//! Zero counts are legal. Fits drop them later and record how many.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header every delimited snapshot file must start with.
pub const HEADER: [&str; 4] = ["rank", "label", "hosts", "hits"];

/// The column a rating list is sorted by, descending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RankKey {
    Hosts,
    Hits,
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankKey::Hosts => "hosts",
            RankKey::Hits => "hits",
        })
    }
}

/// Delimited text layout of a snapshot file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("bad header: expected `rank,label,hosts,hits`, found `{found}`")]
    Header { found: String },
    #[error("snapshot has no entries")]
    Empty,
    #[error("ranks must run 1..n in order: position {position} holds rank {found}")]
    Structure { position: usize, found: u64 },
    #[error("{key} column is not non-increasing: first violation at rank {rank}")]
    Monotonicity { key: RankKey, rank: u32 },
    #[error("rank {rank}: {field} must be finite and non-negative, got {value}")]
    InvalidValue {
        rank: u32,
        field: &'static str,
        value: f64,
    },
    #[error("invalid snapshot JSON: {0}")]
    Json(String),
}

/// One rating row.
///
/// Counts are stored as `f64` so that synthetic, real-valued snapshots share
/// the type with observed integer data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteEntry {
    pub rank: u32,
    pub label: String,
    pub hosts: f64,
    pub hits: f64,
}

impl SiteEntry {
    pub fn new(rank: u32, label: impl Into<String>, hosts: f64, hits: f64) -> Self {
        Self {
            rank,
            label: label.into(),
            hosts,
            hits,
        }
    }

    pub fn value(&self, key: RankKey) -> f64 {
        match key {
            RankKey::Hosts => self.hosts,
            RankKey::Hits => self.hits,
        }
    }
}

/// An immutable, validated rating page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSnapshot")]
pub struct RatingSnapshot {
    category: String,
    period: String,
    rank_key: RankKey,
    entries: Vec<SiteEntry>,
}

#[derive(Deserialize)]
struct RawSnapshot {
    #[serde(default)]
    category: String,
    #[serde(default)]
    period: String,
    rank_key: RankKey,
    entries: Vec<SiteEntry>,
}

impl TryFrom<RawSnapshot> for RatingSnapshot {
    type Error = CorpusError;

    fn try_from(raw: RawSnapshot) -> Result<Self, Self::Error> {
        RatingSnapshot::new(raw.category, raw.period, raw.rank_key, raw.entries)
    }
}

impl RatingSnapshot {
    pub fn new(
        category: impl Into<String>,
        period: impl Into<String>,
        rank_key: RankKey,
        entries: Vec<SiteEntry>,
    ) -> Result<Self, CorpusError> {
        validate(rank_key, &entries)?;
        Ok(Self {
            category: category.into(),
            period: period.into(),
            rank_key,
            entries,
        })
    }

    /// Replaces the free-form category and period tags.
    pub fn with_tags(mut self, category: impl Into<String>, period: impl Into<String>) -> Self {
        self.category = category.into();
        self.period = period.into();
        self
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn period(&self) -> &str {
        &self.period
    }

    pub fn rank_key(&self) -> RankKey {
        self.rank_key
    }

    pub fn entries(&self) -> &[SiteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stable descending sort by `new_key` with ranks reassigned `1..=n`.
    /// Sites tied on `new_key` keep their current relative order.
    pub fn rerank(&self, new_key: RankKey) -> RatingSnapshot {
        let mut entries = self.entries.clone();
        // Values are finite (checked at construction), so total_cmp agrees with <.
        entries.sort_by(|a, b| b.value(new_key).total_cmp(&a.value(new_key)));
        for (i, e) in entries.iter_mut().enumerate() {
            e.rank = i as u32 + 1;
        }
        RatingSnapshot {
            category: self.category.clone(),
            period: self.period.clone(),
            rank_key: new_key,
            entries,
        }
    }

    /// Writes the snapshot as delimited text with the standard header.
    /// Counts use the shortest representation that parses back to the same
    /// `f64`, so integer counts are written without a fractional part.
    pub fn to_delimited(&self, format: Format) -> String {
        let mut wtr = csv::WriterBuilder::new()
            .delimiter(format.delimiter())
            .from_writer(Vec::new());
        wtr.write_record(HEADER).expect("write to Vec");
        for e in &self.entries {
            wtr.write_record([
                e.rank.to_string(),
                e.label.clone(),
                e.hosts.to_string(),
                e.hits.to_string(),
            ])
            .expect("write to Vec");
        }
        let bytes = wtr.into_inner().expect("flush to Vec");
        String::from_utf8(bytes).expect("csv output is UTF-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(text).map_err(|e| CorpusError::Json(e.to_string()))
    }
}

fn validate(rank_key: RankKey, entries: &[SiteEntry]) -> Result<(), CorpusError> {
    if entries.is_empty() {
        return Err(CorpusError::Empty);
    }
    for (i, e) in entries.iter().enumerate() {
        if e.rank as usize != i + 1 {
            return Err(CorpusError::Structure {
                position: i + 1,
                found: e.rank as u64,
            });
        }
        for (field, value) in [("hosts", e.hosts), ("hits", e.hits)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CorpusError::InvalidValue {
                    rank: e.rank,
                    field,
                    value,
                });
            }
        }
    }
    if let Some(w) = entries
        .windows(2)
        .find(|w| w[1].value(rank_key) > w[0].value(rank_key))
    {
        return Err(CorpusError::Monotonicity {
            key: rank_key,
            rank: w[1].rank,
        });
    }
    Ok(())
}

/// Parses a delimited snapshot with header `rank,label,hosts,hits`.
///
/// Labels may be quoted to embed the delimiter. Ranks must be integers;
/// hosts and hits must be finite non-negative numbers. The category and
/// period tags are left empty (see [`RatingSnapshot::with_tags`]).
pub fn parse_snapshot(
    text: &str,
    format: Format,
    rank_key: RankKey,
) -> Result<RatingSnapshot, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = rdr.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != HEADER {
        return Err(CorpusError::Header {
            found: found.join(","),
        });
    }

    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(CorpusError::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let rank: u32 = record[0].trim().parse().map_err(|_| CorpusError::Parse {
            line,
            message: format!("rank `{}` is not a positive integer", &record[0]),
        })?;
        let hosts = parse_count(&record[2], "hosts", line)?;
        let hits = parse_count(&record[3], "hits", line)?;
        entries.push(SiteEntry::new(rank, &record[1], hosts, hits));
    }
    RatingSnapshot::new("", "", rank_key, entries)
}

fn parse_count(field: &str, name: &str, line: u64) -> Result<f64, CorpusError> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(CorpusError::Parse {
            line,
            message: format!("{name} `{field}` is not a non-negative number"),
        }),
    }
}

fn csv_error(err: csv::Error) -> CorpusError {
    let line = err.position().map_or(0, |p| p.line());
    CorpusError::Parse {
        line,
        message: err.to_string(),
    }
}
