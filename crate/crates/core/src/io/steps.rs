use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeInterval;
use crate::scalar::Scalar;

use super::{json_record, lines, positioned, TimestampField};

/// Annotation guideline for gold captions. Longer captions are accepted with
/// a lint warning.
pub const MAX_CAPTION_WORDS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub caption: String,
    pub interval: TimeInterval<T>,
    /// Position of the step in its input file, within its segment.
    pub ordinal: usize,
}

/// Instructional steps for one visual segment, ordered by start time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSequence<T> {
    pub segment_id: String,
    pub steps: Vec<Step<T>>,
}

impl<T: Scalar> StepSequence<T> {
    /// Builds a sequence, sorting by start time and keeping input order for
    /// ties.
    pub fn new(
        segment_id: impl Into<String>,
        steps: Vec<(String, TimeInterval<T>)>,
    ) -> Result<Self> {
        let segment_id = segment_id.into();
        if segment_id.trim().is_empty() {
            return Err(Error::invalid("segment id", "empty"));
        }
        let mut steps: Vec<Step<T>> = steps
            .into_iter()
            .enumerate()
            .map(|(ordinal, (caption, interval))| {
                if caption.trim().is_empty() {
                    return Err(Error::invalid("step caption", "empty after trimming"));
                }
                Ok(Step {
                    caption,
                    interval,
                    ordinal,
                })
            })
            .collect::<Result<_>>()?;
        sort_steps(&mut steps);
        Ok(Self { segment_id, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn sort_steps<T: Scalar>(steps: &mut [Step<T>]) {
    steps.sort_by(|a, b| {
        a.interval
            .start()
            .partial_cmp(&b.interval.start())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.ordinal.cmp(&b.ordinal))
    });
}

/// Non-fatal finding while reading a steps file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lint {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFile<T> {
    pub sequences: BTreeMap<String, StepSequence<T>>,
    pub warnings: Vec<Lint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    segment: String,
    caption: String,
    start: TimestampField,
    end: TimestampField,
}

/// Parses JSON-lines step records `{"segment", "caption", "start", "end"}`.
pub fn parse_steps<T: Scalar, R: BufRead>(reader: R) -> Result<StepFile<T>> {
    let mut sequences: BTreeMap<String, StepSequence<T>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for item in lines(reader, true) {
        let (line, text) = item?;
        let record: StepRecord = json_record(line, &text)?;
        if record.segment.trim().is_empty() {
            return Err(Error::format(line, "empty segment id"));
        }
        if record.caption.trim().is_empty() {
            return Err(Error::format(line, "empty caption"));
        }
        let start = record.start.seconds(line)?;
        let end = record.end.seconds(line)?;
        let interval = positioned(line, TimeInterval::new(start, end))?;
        let words = record.caption.split_whitespace().count();
        if words > MAX_CAPTION_WORDS {
            let message =
                format!("caption has {words} words; guideline is at most {MAX_CAPTION_WORDS}");
            log::warn!("line {line}: {message}");
            warnings.push(Lint { line, message });
        }
        let sequence = sequences
            .entry(record.segment.clone())
            .or_insert_with(|| StepSequence {
                segment_id: record.segment.clone(),
                steps: Vec::new(),
            });
        let ordinal = sequence.steps.len();
        sequence.steps.push(Step {
            caption: record.caption,
            interval,
            ordinal,
        });
    }
    for sequence in sequences.values_mut() {
        sort_steps(&mut sequence.steps);
    }
    Ok(StepFile {
        sequences,
        warnings,
    })
}

pub fn write_steps<'a, T: Scalar, W: Write>(
    sequences: impl IntoIterator<Item = &'a StepSequence<T>>,
    mut out: W,
) -> Result<()> {
    for seq in sequences {
        for step in &seq.steps {
            let record = StepRecord {
                segment: seq.segment_id.clone(),
                caption: step.caption.clone(),
                start: TimestampField::Seconds(step.interval.start().as_f64()),
                end: TimestampField::Seconds(step.interval.end().as_f64()),
            };
            serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
