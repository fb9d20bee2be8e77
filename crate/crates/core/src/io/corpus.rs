use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuestionId, VideoId};

use super::{json_record, lines, positioned};

/// A video's searchable text: title plus pre-extracted subtitles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDocument {
    pub video: VideoId,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub subtitle: String,
}

/// Parses `{"video", "title", "subtitle"}` JSON lines; video ids must be
/// unique.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusDocument>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for item in lines(reader, false) {
        let (line, text) = item?;
        let doc: CorpusDocument = json_record(line, &text)?;
        if !seen.insert(doc.video.clone()) {
            return Err(Error::format(
                line,
                format!("duplicate video id {}", doc.video),
            ));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(docs: &[CorpusDocument], mut out: W) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub question: QuestionId,
    pub text: String,
}

/// Parses `qid<whitespace>question text` lines.
pub fn parse_queries<R: BufRead>(reader: R) -> Result<Vec<Query>> {
    let mut seen = HashSet::new();
    let mut queries = Vec::new();
    for item in lines(reader, true) {
        let (line, text) = item?;
        let (qid, rest) = text
            .split_once(|c: char| c.is_ascii_whitespace())
            .ok_or_else(|| Error::format(line, "expected `qid question text`"))?;
        let question = positioned(line, QuestionId::new(qid))?;
        if !seen.insert(question.clone()) {
            return Err(Error::format(
                line,
                format!("duplicate question {question}"),
            ));
        }
        queries.push(Query {
            question,
            text: rest.trim().to_string(),
        });
    }
    Ok(queries)
}
