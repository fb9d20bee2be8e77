use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{QuestionId, VideoId};
use crate::scalar::Scalar;

use super::{lines, parse_rank, parse_score, positioned};

/// One line of a six-column run: `qid Q0 video rank score tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRunEntry<T> {
    pub question: QuestionId,
    pub video: VideoId,
    pub rank: u32,
    pub score: T,
    pub tag: String,
}

/// A retrieval run grouped per question. Each list is ordered by descending
/// score, then ascending rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalRun<T> {
    pub by_question: BTreeMap<QuestionId, Vec<RetrievalRunEntry<T>>>,
}

impl<T: Scalar> RetrievalRun<T> {
    /// Builds a run from entries in any order, applying the same ordering and
    /// duplicate checks as the parser.
    pub fn from_entries(entries: impl IntoIterator<Item = RetrievalRunEntry<T>>) -> Result<Self> {
        let mut by_question: BTreeMap<QuestionId, Vec<RetrievalRunEntry<T>>> = BTreeMap::new();
        for entry in entries {
            by_question
                .entry(entry.question.clone())
                .or_default()
                .push(entry);
        }
        for list in by_question.values() {
            let mut seen = HashSet::new();
            for e in list {
                if !seen.insert(&e.video) {
                    return Err(Error::invalid(
                        "run",
                        format!("video {} listed twice for {}", e.video, e.question),
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
                    .then_with(|| a.video.cmp(&b.video))
            });
        }
    }

    /// Videos for `question` in evaluation order; empty if the run has none.
    pub fn ranking(&self, question: &QuestionId) -> Vec<VideoId> {
        self.by_question
            .get(question)
            .map(|list| list.iter().map(|e| e.video.clone()).collect())
            .unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = &RetrievalRunEntry<T>> {
        self.by_question.values().flatten()
    }
}

pub fn parse_retrieval_run<T: Scalar, R: BufRead>(reader: R) -> Result<RetrievalRun<T>> {
    let mut by_question: BTreeMap<QuestionId, Vec<RetrievalRunEntry<T>>> = BTreeMap::new();
    let mut seen: HashSet<(QuestionId, VideoId)> = HashSet::new();
    for item in lines(reader, true) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_ascii_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::format(
                line,
                format!(
                    "expected 6 fields (qid Q0 video rank score tag), found {}",
                    fields.len()
                ),
            ));
        }
        let question = positioned(line, QuestionId::new(fields[0]))?;
        let video = positioned(line, VideoId::new(fields[2]))?;
        let rank = parse_rank(line, fields[3])?;
        let score = parse_score(line, fields[4])?;
        if !seen.insert((question.clone(), video.clone())) {
            return Err(Error::format(
                line,
                format!("duplicate video {video} for question {question}"),
            ));
        }
        by_question
            .entry(question.clone())
            .or_default()
            .push(RetrievalRunEntry {
                question,
                video,
                rank,
                score,
                tag: fields[5].to_string(),
            });
    }
    let mut run = RetrievalRun { by_question };
    run.sort();
    Ok(run)
}

pub fn write_retrieval_run<T: Scalar, W: Write>(run: &RetrievalRun<T>, mut out: W) -> Result<()> {
    for e in run.entries() {
        writeln!(
            out,
            "{} Q0 {} {} {} {}",
            e.question, e.video, e.rank, e.score, e.tag
        )?;
    }
    Ok(())
}
