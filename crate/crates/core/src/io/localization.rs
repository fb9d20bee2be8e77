use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuestionId, TimeInterval, VideoId};
use crate::scalar::Scalar;

use super::{json_record, lines, positioned, TimestampField};

/// A predicted answer span inside a retrieved video.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationCandidate<T> {
    pub question: QuestionId,
    pub video: VideoId,
    pub interval: TimeInterval<T>,
    pub score: T,
    pub rank: u32,
}

/// Candidates per question, ordered by descending score then ascending rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalizationRun<T> {
    pub by_question: BTreeMap<QuestionId, Vec<LocalizationCandidate<T>>>,
}

impl<T: Scalar> LocalizationRun<T> {
    pub fn from_candidates(
        candidates: impl IntoIterator<Item = LocalizationCandidate<T>>,
    ) -> Result<Self> {
        let mut by_question: BTreeMap<QuestionId, Vec<LocalizationCandidate<T>>> = BTreeMap::new();
        for c in candidates {
            by_question.entry(c.question.clone()).or_default().push(c);
        }
        for list in by_question.values() {
            let mut ranks = HashSet::new();
            for c in list {
                if !ranks.insert(c.rank) {
                    return Err(Error::invalid(
                        "localization run",
                        format!("rank {} used twice for {}", c.rank, c.question),
                    ));
                }
            }
        }
        let mut run = Self { by_question };
        run.sort();
        Ok(run)
    }

    fn sort(&mut self) {
        for list in self.by_question.values_mut() {
            list.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.rank.cmp(&b.rank))
            });
        }
    }

    /// The first `n` candidates for `question`.
    pub fn top(&self, question: &QuestionId, n: usize) -> &[LocalizationCandidate<T>] {
        match self.by_question.get(question) {
            Some(list) => &list[..n.min(list.len())],
            None => &[],
        }
    }

    /// Distinct videos in candidate order, for scoring the retrieval half of
    /// a combined run.
    pub fn video_ranking(&self, question: &QuestionId) -> Vec<VideoId> {
        let mut seen = HashSet::new();
        self.by_question
            .get(question)
            .into_iter()
            .flatten()
            .filter(|c| seen.insert(&c.video))
            .map(|c| c.video.clone())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRecord {
    question: String,
    video: String,
    start: TimestampField,
    end: TimestampField,
    score: f64,
    rank: u32,
}

/// Parses JSON-lines records
/// `{"question", "video", "start", "end", "score", "rank"}`; timestamps may be
/// seconds or `MM:SS` strings.
pub fn parse_localization_run<T: Scalar, R: BufRead>(reader: R) -> Result<LocalizationRun<T>> {
    let mut by_question: BTreeMap<QuestionId, Vec<LocalizationCandidate<T>>> = BTreeMap::new();
    let mut ranks: HashSet<(QuestionId, u32)> = HashSet::new();
    for item in lines(reader, true) {
        let (line, text) = item?;
        let record: CandidateRecord = json_record(line, &text)?;
        let question = positioned(line, QuestionId::new(record.question))?;
        let video = positioned(line, VideoId::new(record.video))?;
        let start = record.start.seconds(line)?;
        let end = record.end.seconds(line)?;
        let interval = positioned(line, TimeInterval::new(start, end))?;
        if !record.score.is_finite() {
            return Err(Error::format(line, "score is not finite"));
        }
        if record.rank == 0 {
            return Err(Error::format(line, "rank must be a positive integer"));
        }
        if !ranks.insert((question.clone(), record.rank)) {
            return Err(Error::format(
                line,
                format!("rank {} used twice for question {question}", record.rank),
            ));
        }
        by_question
            .entry(question.clone())
            .or_default()
            .push(LocalizationCandidate {
                question,
                video,
                interval,
                score: T::of(record.score),
                rank: record.rank,
            });
    }
    let mut run = LocalizationRun { by_question };
    run.sort();
    Ok(run)
}

pub fn write_localization_run<T: Scalar, W: Write>(
    run: &LocalizationRun<T>,
    mut out: W,
) -> Result<()> {
    for c in run.by_question.values().flatten() {
        let record = CandidateRecord {
            question: c.question.to_string(),
            video: c.video.to_string(),
            start: TimestampField::Seconds(c.interval.start().as_f64()),
            end: TimestampField::Seconds(c.interval.end().as_f64()),
            score: c.score.as_f64(),
            rank: c.rank,
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}
