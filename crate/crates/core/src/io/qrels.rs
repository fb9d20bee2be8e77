use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuestionId, RelevanceGrade, TimeInterval, VideoId};
use crate::scalar::Scalar;

use super::{json_record, lines, positioned, TimestampField};

/// A judged video for one question, with its answer spans.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgedVideo<T> {
    pub question: QuestionId,
    pub video: VideoId,
    pub grade: RelevanceGrade,
    pub answers: Vec<TimeInterval<T>>,
}

/// Graded judgments keyed by question, in file order within a question.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Qrels<T> {
    pub by_question: BTreeMap<QuestionId, Vec<JudgedVideo<T>>>,
}

impl<T: Scalar> Qrels<T> {
    pub fn judged(&self, question: &QuestionId) -> &[JudgedVideo<T>] {
        self.by_question
            .get(question)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionId> {
        self.by_question.keys()
    }

    pub fn len(&self) -> usize {
        self.by_question.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_question.is_empty()
    }
}

/// Parses the four-column grade file `qid 0 video grade`.
pub fn parse_grades<T: Scalar, R: BufRead>(reader: R) -> Result<Qrels<T>> {
    let mut qrels = Qrels::default();
    for item in lines(reader, true) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_ascii_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(
                line,
                format!(
                    "expected 4 fields (qid 0 video grade), found {}",
                    fields.len()
                ),
            ));
        }
        let question = positioned(line, QuestionId::new(fields[0]))?;
        let video = positioned(line, VideoId::new(fields[2]))?;
        let grade = fields[3]
            .parse::<u8>()
            .ok()
            .and_then(|g| RelevanceGrade::try_from(g).ok())
            .ok_or_else(|| {
                Error::format(
                    line,
                    format!("unknown grade {:?}; expected 0, 1 or 2", fields[3]),
                )
            })?;
        let list: &mut Vec<JudgedVideo<T>> = qrels.by_question.entry(question.clone()).or_default();
        if list.iter().any(|j| j.video == video) {
            return Err(Error::format(
                line,
                format!("video {video} judged twice for question {question}"),
            ));
        }
        list.push(JudgedVideo {
            question,
            video,
            grade,
            answers: Vec::new(),
        });
    }
    Ok(qrels)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRecord {
    question: String,
    video: String,
    start: TimestampField,
    end: TimestampField,
}

/// Attaches answer spans from the JSON-lines sidecar
/// `{"question", "video", "start", "end"}` to already-parsed grades.
pub fn attach_answers<T: Scalar, R: BufRead>(qrels: &mut Qrels<T>, reader: R) -> Result<()> {
    for item in lines(reader, true) {
        let (line, text) = item?;
        let record: AnswerRecord = json_record(line, &text)?;
        let question = positioned(line, QuestionId::new(record.question))?;
        let video = positioned(line, VideoId::new(record.video))?;
        let start = record.start.seconds(line)?;
        let end = record.end.seconds(line)?;
        let interval = positioned(line, TimeInterval::new(start, end))?;
        let judged = qrels
            .by_question
            .get_mut(&question)
            .and_then(|list| list.iter_mut().find(|j| j.video == video))
            .ok_or_else(|| {
                Error::format(
                    line,
                    format!("answer for unjudged pair ({question}, {video})"),
                )
            })?;
        if !judged.grade.is_relevant() {
            return Err(Error::format(
                line,
                format!("answer attached to non-relevant video {video} for {question}"),
            ));
        }
        judged.answers.push(interval);
    }
    Ok(())
}

pub fn parse_qrels<T: Scalar, G: BufRead, A: BufRead>(
    grades: G,
    answers: Option<A>,
) -> Result<Qrels<T>> {
    let mut qrels = parse_grades(grades)?;
    if let Some(answers) = answers {
        attach_answers(&mut qrels, answers)?;
    }
    Ok(qrels)
}

pub fn write_grades<T: Scalar, W: Write>(qrels: &Qrels<T>, mut out: W) -> Result<()> {
    for j in qrels.by_question.values().flatten() {
        writeln!(out, "{} 0 {} {}", j.question, j.video, j.grade.value())?;
    }
    Ok(())
}

pub fn write_answers<T: Scalar, W: Write>(qrels: &Qrels<T>, mut out: W) -> Result<()> {
    for j in qrels.by_question.values().flatten() {
        for a in &j.answers {
            let record = AnswerRecord {
                question: j.question.to_string(),
                video: j.video.to_string(),
                start: TimestampField::Seconds(a.start().as_f64()),
                end: TimestampField::Seconds(a.end().as_f64()),
            };
            serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(grades: &str, answers: &str) -> Result<Qrels<f64>> {
        parse_qrels(grades.as_bytes(), Some(answers.as_bytes()))
    }

    #[test]
    fn merges_answers_with_mm_ss() {
        let q = parse(
            "Q1 0 v42 2",
            r#"{"question":"Q1","video":"v42","start":"02:30","end":"03:10"}"#,
        )
        .unwrap();
        let judged = q.judged(&QuestionId::new("Q1").unwrap());
        assert_eq!(judged[0].grade, RelevanceGrade::DefinitelyRelevant);
        assert_eq!(
            judged[0].answers,
            vec![TimeInterval::new(150.0, 190.0).unwrap()]
        );
    }

    #[test]
    fn multiple_answers_per_video() {
        let q = parse(
            "Q1 0 v42 1\n",
            "{\"question\":\"Q1\",\"video\":\"v42\",\"start\":1,\"end\":2}\n\
             {\"question\":\"Q1\",\"video\":\"v42\",\"start\":\"00:30\",\"end\":40.5}\n",
        )
        .unwrap();
        assert_eq!(
            q.judged(&QuestionId::new("Q1").unwrap())[0].answers.len(),
            2
        );
    }

    #[test]
    fn answer_on_grade_zero_rejected() {
        let err = parse(
            "Q1 0 v42 0",
            r#"{"question":"Q1","video":"v42","start":"02:30","end":"03:10"}"#,
        )
        .unwrap_err();
        assert_eq!(err.line(), Some(1));
    }

    #[test]
    fn grade_and_timestamp_errors() {
        assert_eq!(parse("Q1 0 v1 3", "").unwrap_err().line(), Some(1));
        assert_eq!(parse("Q1 0 v1 -1", "").unwrap_err().line(), Some(1));
        let bad_ts = r#"{"question":"Q1","video":"v1","start":"02:75","end":"03:10"}"#;
        assert_eq!(parse("Q1 0 v1 2", bad_ts).unwrap_err().line(), Some(1));
        let reversed = "\n{\"question\":\"Q1\",\"video\":\"v1\",\"start\":9,\"end\":3}";
        assert_eq!(parse("Q1 0 v1 2", reversed).unwrap_err().line(), Some(2));
        let unknown = r#"{"question":"Q1","video":"v9","start":1,"end":3}"#;
        assert!(parse("Q1 0 v1 2", unknown).is_err());
    }
}
