//! Six-criteria rating records, the correct/perfect gates and per-criterion
//! aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_SCALE: u8 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RatingError {
    #[error("rating for {rewrite_id} by {rater_id}: {field} = {value} is outside 0-5")]
    OutOfRange {
        rewrite_id: String,
        rater_id: String,
        field: &'static str,
        value: u8,
    },
    #[error("no ratings to aggregate")]
    Empty,
    #[error("ratings line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One rater's answers for one rewrite. The four booleans are the defect
/// questions; `false` ("no") is the favorable answer for each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rewrite_id: String,
    pub rater_id: String,
    pub sensical: u8,
    pub grammatical: u8,
    pub miss_fact: bool,
    pub new_fact: bool,
    pub wrong_split: bool,
    pub need_more_split: bool,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), RatingError> {
        for (field, value) in [("sensical", self.sensical), ("grammatical", self.grammatical)] {
            if value > MAX_SCALE {
                return Err(RatingError::OutOfRange {
                    rewrite_id: self.rewrite_id.clone(),
                    rater_id: self.rater_id.clone(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Top marks on both scales and "no" to all four defect questions.
pub fn is_correct(record: &RatingRecord) -> bool {
    record.sensical == MAX_SCALE
        && record.grammatical == MAX_SCALE
        && !record.miss_fact
        && !record.new_fact
        && !record.wrong_split
        && !record.need_more_split
}

/// A rewrite is perfect when it has ratings and all of them are correct.
pub fn is_perfect<'a, I>(records: I) -> bool
where
    I: IntoIterator<Item = &'a RatingRecord>,
{
    let mut any = false;
    for r in records {
        if !is_correct(r) {
            return false;
        }
        any = true;
    }
    any
}

/// Per-criterion view of a set of ratings. Percentages are 0-100.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaSummary {
    pub n: usize,
    pub sensical_top: f64,
    pub sensical_mean: f64,
    pub grammatical_top: f64,
    pub grammatical_mean: f64,
    pub no_miss_fact: f64,
    pub no_new_fact: f64,
    pub correct_split: f64,
    pub enough_split: f64,
    pub correct_rate: f64,
}

pub fn aggregate_ratings(records: &[RatingRecord]) -> Result<CriteriaSummary, RatingError> {
    if records.is_empty() {
        return Err(RatingError::Empty);
    }
    let n = records.len() as f64;
    let pct = |pred: &dyn Fn(&RatingRecord) -> bool| 100.0 * records.iter().filter(|r| pred(r)).count() as f64 / n;
    let mean = |f: &dyn Fn(&RatingRecord) -> u8| records.iter().map(|r| f(r) as f64).sum::<f64>() / n;
    Ok(CriteriaSummary {
        n: records.len(),
        sensical_top: pct(&|r| r.sensical == MAX_SCALE),
        sensical_mean: mean(&|r| r.sensical),
        grammatical_top: pct(&|r| r.grammatical == MAX_SCALE),
        grammatical_mean: mean(&|r| r.grammatical),
        no_miss_fact: pct(&|r| !r.miss_fact),
        no_new_fact: pct(&|r| !r.new_fact),
        correct_split: pct(&|r| !r.wrong_split),
        enough_split: pct(&|r| !r.need_more_split),
        correct_rate: pct(&is_correct),
    })
}

pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>, RatingError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RatingRecord = serde_json::from_str(line).map_err(|e| RatingError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| RatingError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_ratings(records: &[RatingRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("rating serializes"));
        out.push('\n');
    }
    out
}

/// "71.6%/4.55": share of top marks and the mean.
pub fn format_scale(top: f64, mean: f64) -> String {
    format!("{top:.1}%/{mean:.2}")
}

pub const TABLE_COLUMNS: [&str; 8] = [
    "sensical",
    "grammatical",
    "no miss fact",
    "no new fact",
    "correct split",
    "enough split",
    "correct",
    "BLEU",
];

/// One labelled row of the ratings table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub summary: CriteriaSummary,
    pub bleu: Option<f64>,
}

impl SummaryRow {
    pub fn cells(&self) -> Vec<String> {
        let s = &self.summary;
        vec![
            format_scale(s.sensical_top, s.sensical_mean),
            format_scale(s.grammatical_top, s.grammatical_mean),
            format!("{:.2}%", s.no_miss_fact),
            format!("{:.2}%", s.no_new_fact),
            format!("{:.2}%", s.correct_split),
            format!("{:.2}%", s.enough_split),
            format!("{:.1}%", s.correct_rate),
            self.bleu.map_or_else(|| "-".to_string(), |b| format!("{b:.1}")),
        ]
    }
}

/// Aligned text table with one block header (e.g. the benchmark name).
pub fn render_summary_table(title: &str, rows: &[SummaryRow]) -> String {
    let mut header = vec![title.to_string()];
    header.extend(TABLE_COLUMNS.iter().map(|c| c.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.label.clone()];
            line.extend(r.cells());
            line
        })
        .collect();
    render_columns(&header, &body)
}

/// Left-aligns the first column and right-aligns the rest.
pub fn render_columns(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let mut text = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(text, "{cell:<w$}");
            } else {
                let _ = write!(text, "  {cell:>w$}");
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(header, &mut out);
    let rule_len = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for row in body {
        line(row, &mut out);
    }
    out
}
