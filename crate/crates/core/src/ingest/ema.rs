//! EMA survey records and their CSV parser.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowDiagnostic};
use crate::ingest::ParseMode;

pub const EMA_ITEM_COUNT: usize = 8;

/// Expected header of an EMA file.
pub const EMA_HEADER: [&str; 14] = [
    "participant_id",
    "session_id",
    "timestamp",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "q7",
    "q8",
    "attn_index",
    "attn_score",
    "duration_s",
];

/// The randomly reversed duplicate item used to catch inattentive responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionItem {
    /// Which of the 8 items was duplicated in reversed form (0-based).
    pub original_index: usize,
    /// The response to the reversed wording, still on the 0-100 scale.
    pub reversed_score: f64,
}

/// One survey response: 8 items on the 0-100 scale plus the attention item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaRecord {
    pub participant_id: String,
    pub session_id: String,
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub item_scores: [f64; EMA_ITEM_COUNT],
    pub attention: AttentionItem,
    /// Seconds spent answering, strictly positive.
    pub response_duration: f64,
}

impl EmaRecord {
    /// Check every invariant; the parser surfaces the message as a row
    /// diagnostic.
    pub fn validate(&self) -> Result<()> {
        for (i, &score) in self.item_scores.iter().enumerate() {
            if !score.is_finite() || !(0.0..=100.0).contains(&score) {
                return Err(Error::Validation(format!(
                    "item q{} score {} outside [0,100]",
                    i + 1,
                    score
                )));
            }
        }
        if self.attention.original_index >= EMA_ITEM_COUNT {
            return Err(Error::Validation(format!(
                "attention index {} outside [0,7]",
                self.attention.original_index
            )));
        }
        let rev = self.attention.reversed_score;
        if !rev.is_finite() || !(0.0..=100.0).contains(&rev) {
            return Err(Error::Validation(format!(
                "attention score {rev} outside [0,100]"
            )));
        }
        if !self.response_duration.is_finite() || self.response_duration <= 0.0 {
            return Err(Error::Validation(format!(
                "response duration {} not finite and positive",
                self.response_duration
            )));
        }
        Ok(())
    }
}

/// Result of a lenient parse: valid records plus per-row diagnostics.
#[derive(Debug, Clone, Default)]
pub struct EmaParse {
    pub records: Vec<EmaRecord>,
    pub diagnostics: Vec<RowDiagnostic>,
}

fn check_header(headers: &csv::StringRecord) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != EMA_HEADER {
        return Err(Error::Schema(format!(
            "EMA header mismatch: expected `{}`, got `{}`",
            EMA_HEADER.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<T, String> {
    let raw = record
        .get(idx)
        .ok_or_else(|| format!("missing field `{name}`"))?
        .trim();
    raw.parse::<T>()
        .map_err(|_| format!("field `{name}`: cannot parse `{raw}`"))
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<EmaRecord, String> {
    let participant_id: String = parse_field(record, 0, "participant_id")?;
    let session_id: String = parse_field(record, 1, "session_id")?;
    if participant_id.is_empty() || session_id.is_empty() {
        return Err("empty participant_id or session_id".into());
    }
    let timestamp: i64 = parse_field(record, 2, "timestamp")?;
    let mut item_scores = [0.0; EMA_ITEM_COUNT];
    for (i, slot) in item_scores.iter_mut().enumerate() {
        *slot = parse_field(record, 3 + i, &format!("q{}", i + 1))?;
    }
    let original_index: usize = parse_field(record, 11, "attn_index")?;
    let reversed_score: f64 = parse_field(record, 12, "attn_score")?;
    let response_duration: f64 = parse_field(record, 13, "duration_s")?;
    let rec = EmaRecord {
        participant_id,
        session_id,
        timestamp,
        item_scores,
        attention: AttentionItem {
            original_index,
            reversed_score,
        },
        response_duration,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

/// Parse an EMA CSV stream.
///
/// Lenient mode collects row diagnostics and keeps going; strict mode turns
/// any rejected row into an error. A malformed header is always fatal.
pub fn parse_ema_file<R: Read>(reader: R, mode: ParseMode) -> Result<EmaParse> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(csv_reader.headers()?)?;

    let mut out = EmaParse::default();
    for (row_idx, record) in csv_reader.records().enumerate() {
        let row = row_idx + 1;
        let outcome = match record {
            Ok(rec) => parse_row(&rec),
            Err(e) => Err(format!("malformed csv row: {e}")),
        };
        match outcome {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.diagnostics.push(RowDiagnostic { row, message }),
        }
    }
    if mode == ParseMode::Strict && !out.diagnostics.is_empty() {
        return Err(Error::RowErrors(out.diagnostics));
    }
    Ok(out)
}
