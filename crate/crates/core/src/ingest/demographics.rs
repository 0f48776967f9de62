//! Participant demographics used by the baseline model and bias reports.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowDiagnostic};
use crate::ingest::ParseMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Nonbinary,
    Other,
}

impl Gender {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            "nonbinary" | "non-binary" | "non_binary" => Ok(Gender::Nonbinary),
            "other" => Ok(Gender::Other),
            other => Err(Error::Validation(format!("unknown gender `{other}`"))),
        }
    }

    /// Numeric encoding used as a model input (baseline random forest).
    pub fn encoded(self) -> f64 {
        match self {
            Gender::Female => 0.0,
            Gender::Male => 1.0,
            Gender::Nonbinary => 2.0,
            Gender::Other => 3.0,
        }
    }

    /// Canonical CSV spelling, the inverse of `parse`.
    pub fn key(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Nonbinary => "nonbinary",
            Gender::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    Asian,
    Black,
    AmerIndianAkNative,
    Multiple,
    Other,
}

impl Race {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" => Ok(Race::White),
            "asian" => Ok(Race::Asian),
            "black" => Ok(Race::Black),
            "amer_indian_ak_native" => Ok(Race::AmerIndianAkNative),
            "multiple" => Ok(Race::Multiple),
            "other" => Ok(Race::Other),
            other => Err(Error::Validation(format!("unknown race `{other}`"))),
        }
    }

    /// Canonical CSV spelling, the inverse of `parse`.
    pub fn key(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::Asian => "asian",
            Race::Black => "black",
            Race::AmerIndianAkNative => "amer_indian_ak_native",
            Race::Multiple => "multiple",
            Race::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub participant_id: String,
    pub gender: Gender,
    pub race: Race,
    /// Age in years, strictly positive.
    pub age: f64,
}

pub const DEMOGRAPHICS_HEADER: [&str; 4] = ["participant_id", "gender", "race", "age"];

/// Parse a demographics CSV. One record per participant is enforced here.
pub fn parse_demographics_file<R: Read>(reader: R, mode: ParseMode) -> Result<Vec<Demographics>> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let got: Vec<&str> = csv_reader.headers()?.iter().map(str::trim).collect();
    if got != DEMOGRAPHICS_HEADER {
        return Err(Error::Schema(format!(
            "demographics header mismatch: expected `{}`, got `{}`",
            DEMOGRAPHICS_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (row_idx, record) in csv_reader.records().enumerate() {
        let row = row_idx + 1;
        let parsed: std::result::Result<Demographics, String> = (|| {
            let rec = record.map_err(|e| format!("malformed csv row: {e}"))?;
            let participant_id = rec.get(0).map(str::trim).unwrap_or("").to_string();
            if participant_id.is_empty() {
                return Err("empty participant_id".into());
            }
            let gender = Gender::parse(rec.get(1).unwrap_or("")).map_err(|e| e.to_string())?;
            let race = Race::parse(rec.get(2).unwrap_or("")).map_err(|e| e.to_string())?;
            let age: f64 = rec
                .get(3)
                .map(str::trim)
                .unwrap_or("")
                .parse()
                .map_err(|_| "cannot parse age".to_string())?;
            if !age.is_finite() || age <= 0.0 {
                return Err(format!("age {age} not positive"));
            }
            Ok(Demographics {
                participant_id,
                gender,
                race,
                age,
            })
        })();
        match parsed {
            Ok(demo) => {
                if !seen.insert(demo.participant_id.clone()) {
                    diagnostics.push(RowDiagnostic {
                        row,
                        message: format!("duplicate participant `{}`", demo.participant_id),
                    });
                } else {
                    out.push(demo);
                }
            }
            Err(message) => diagnostics.push(RowDiagnostic { row, message }),
        }
    }
    if !diagnostics.is_empty() && mode == ParseMode::Strict {
        return Err(Error::RowErrors(diagnostics));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_duplicates() {
        let csv = "participant_id,gender,race,age\n\
                   p1,female,white,34\n\
                   p2,nonbinary,multiple,29\n\
                   p1,male,asian,40\n";
        let parsed = parse_demographics_file(csv.as_bytes(), ParseMode::Lenient).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].gender, Gender::Female);
        assert!(parse_demographics_file(csv.as_bytes(), ParseMode::Strict).is_err());
    }

    #[test]
    fn nonpositive_age_rejected() {
        let csv = "participant_id,gender,race,age\np1,female,white,0\n";
        let parsed = parse_demographics_file(csv.as_bytes(), ParseMode::Lenient).unwrap();
        assert!(parsed.is_empty());
    }
}
