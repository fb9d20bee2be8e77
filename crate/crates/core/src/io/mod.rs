//! Readers and writers for every on-disk artifact.
//!
//! Flat formats (runs, grades, pools, queries) are whitespace-separated with
//! `#` comment lines. Records that carry intervals are JSON, one object per
//! line. All parsers report the 1-based line of the first bad record.

mod corpus;
mod localization;
mod qrels;
mod run;
mod steps;

use std::io::BufRead;

use serde::{Deserialize, Serialize};

pub use corpus::{parse_corpus, parse_queries, write_corpus, CorpusDocument, Query};
pub use localization::{
    parse_localization_run, write_localization_run, LocalizationCandidate, LocalizationRun,
};
pub use qrels::{
    attach_answers, parse_grades, parse_qrels, write_answers, write_grades, JudgedVideo, Qrels,
};
pub use run::{parse_retrieval_run, write_retrieval_run, RetrievalRun, RetrievalRunEntry};
pub use steps::{parse_steps, write_steps, Lint, Step, StepFile, StepSequence, MAX_CAPTION_WORDS};

use crate::error::{Error, Result};
use crate::model::parse_timestamp;
use crate::scalar::Scalar;

/// Iterates `(line_number, line)` over non-blank lines, skipping `#` comments
/// when `comments` is set. Invalid UTF-8 becomes a positioned error.
pub(crate) fn lines<R: BufRead>(
    mut reader: R,
    comments: bool,
) -> impl Iterator<Item = Result<(usize, String)>> {
    let mut number = 0usize;
    let mut buf = Vec::new();
    let mut done = false;
    std::iter::from_fn(move || loop {
        if done {
            return None;
        }
        buf.clear();
        number += 1;
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => {
                done = true;
                return None;
            }
            Ok(_) => {}
            Err(e) => {
                done = true;
                return Some(Err(Error::format(number, format!("read failed: {e}"))));
            }
        }
        let text = match std::str::from_utf8(&buf) {
            Ok(text) => text,
            Err(_) => {
                done = true;
                return Some(Err(Error::format(number, "invalid UTF-8")));
            }
        };
        let trimmed = text.trim();
        if trimmed.is_empty() || (comments && trimmed.starts_with('#')) {
            continue;
        }
        return Some(Ok((number, trimmed.to_string())));
    })
}

/// A timestamp field in a JSON record: seconds as a number or an `MM:SS`
/// string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum TimestampField {
    Seconds(f64),
    Text(String),
}

impl TimestampField {
    pub(crate) fn seconds<T: Scalar>(&self, line: usize) -> Result<T> {
        match self {
            TimestampField::Seconds(s) if s.is_finite() && *s >= 0.0 => Ok(T::of(*s)),
            TimestampField::Seconds(s) => {
                Err(Error::format(line, format!("invalid timestamp {s}")))
            }
            TimestampField::Text(text) => {
                parse_timestamp(text).map_err(|e| Error::format(line, e.to_string()))
            }
        }
    }
}

pub(crate) fn json_record<'a, D: Deserialize<'a>>(line: usize, text: &'a str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::format(line, format!("bad record: {e}")))
}

pub(crate) fn positioned<V>(line: usize, result: Result<V>) -> Result<V> {
    result.map_err(|e| match e {
        Error::Format { .. } => e,
        other => Error::format(line, other.to_string()),
    })
}

pub(crate) fn parse_score<T: Scalar>(line: usize, field: &str) -> Result<T> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(T::of(v)),
        _ => Err(Error::format(
            line,
            format!("score {field:?} is not a finite number"),
        )),
    }
}

pub(crate) fn parse_rank(line: usize, field: &str) -> Result<u32> {
    match field.parse::<u32>() {
        Ok(r) if r >= 1 => Ok(r),
        _ => Err(Error::format(
            line,
            format!("rank {field:?} is not a positive integer"),
        )),
    }
}
