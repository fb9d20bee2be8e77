//! BM25 subtitle search baseline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{CorpusDocument, Query, RetrievalRun, RetrievalRunEntry};
use crate::model::VideoId;
use crate::scalar::Scalar;
use crate::text::tokenize;

pub const RUN_TAG: &str = "bm25-baseline";
pub const INDEX_FILE: &str = "index.bin";
const MAGIC: &[u8; 4] = b"MVIX";
const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<T> {
    pub k1: T,
    pub b: T,
}

impl<T: Scalar> Default for Bm25Params<T> {
    fn default() -> Self {
        Self {
            k1: T::of(0.9),
            b: T::of(0.4),
        }
    }
}

impl<T: Scalar> Bm25Params<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k1 <= T::zero() || !self.k1.is_finite() {
            return Err(Error::invalid("k1", "must be a finite value > 0"));
        }
        if !(self.b >= T::zero() && self.b <= T::one()) {
            return Err(Error::invalid("b", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the video in [`InvertedIndex::videos`].
    pub doc: u32,
    pub term_frequency: u32,
}

/// Immutable term index over video text. Videos are stored sorted by id, so
/// postings are sorted by video id and the index does not depend on corpus
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    videos: Vec<VideoId>,
    doc_lengths: Vec<u64>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_doc_length: f64,
    includes_titles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexOptions {
    pub include_titles: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            include_titles: true,
        }
    }
}

pub fn build_index(docs: &[CorpusDocument], options: IndexOptions) -> Result<InvertedIndex> {
    let mut seen = HashSet::new();
    for d in docs {
        if !seen.insert(&d.video) {
            return Err(Error::DuplicateVideo(d.video.to_string()));
        }
    }
    let mut sorted: Vec<&CorpusDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.video.cmp(&b.video));
    let tokenized: Vec<Vec<String>> = sorted
        .par_iter()
        .map(|d| {
            let text = if options.include_titles {
                format!("{} {}", d.title, d.subtitle)
            } else {
                d.subtitle.clone()
            };
            tokenize(&text).tokens().to_vec()
        })
        .collect();

    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(sorted.len());
    for (doc, tokens) in tokenized.into_iter().enumerate() {
        doc_lengths.push(tokens.len() as u64);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        for (term, term_frequency) in counts {
            postings.entry(term).or_default().push(Posting {
                doc: doc as u32,
                term_frequency,
            });
        }
    }
    let total: u64 = doc_lengths.iter().sum();
    let avg_doc_length = if doc_lengths.is_empty() {
        0.0
    } else {
        total as f64 / doc_lengths.len() as f64
    };
    Ok(InvertedIndex {
        videos: sorted.into_iter().map(|d| d.video.clone()).collect(),
        doc_lengths,
        postings,
        avg_doc_length,
        includes_titles: options.include_titles,
    })
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.videos.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn includes_titles(&self) -> bool {
        self.includes_titles
    }

    pub fn videos(&self) -> &[VideoId] {
        &self.videos
    }

    pub fn doc_length(&self, video: &VideoId) -> Option<u64> {
        self.position(video).map(|i| self.doc_lengths[i])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    fn position(&self, video: &VideoId) -> Option<usize> {
        self.videos.binary_search(video).ok()
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf<T: Scalar>(&self, term: &str) -> T {
        let n = T::of_count(self.doc_count());
        let df = T::of_count(self.postings(term).len());
        let half = T::of(0.5);
        (T::one() + (n - df + half) / (df + half)).ln()
    }

    fn term_weight<T: Scalar>(&self, idf: T, tf: u32, doc: usize, params: &Bm25Params<T>) -> T {
        let tf = T::of(f64::from(tf));
        let len = T::of(self.doc_lengths[doc] as f64);
        let avg = T::of(self.avg_doc_length);
        let norm = T::one() - params.b + params.b * T::ratio_or_zero(len, avg);
        idf * tf * (params.k1 + T::one()) / (tf + params.k1 * norm)
    }
}

/// BM25 of `video` for the query terms (repeated terms count repeatedly).
/// `None` when the video is not indexed.
pub fn bm25_score<T: Scalar>(
    query_terms: &[String],
    video: &VideoId,
    index: &InvertedIndex,
    params: &Bm25Params<T>,
) -> Option<T> {
    let doc = index.position(video)?;
    let mut score = T::zero();
    for term in query_terms {
        let postings = index.postings(term);
        if let Ok(i) = postings.binary_search_by_key(&(doc as u32), |p| p.doc) {
            let idf = index.idf(term);
            score = score + index.term_weight(idf, postings[i].term_frequency, doc, params);
        }
    }
    Some(score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<T> {
    pub video: VideoId,
    pub score: T,
}

/// Top `k` videos sharing at least one term with the query, by descending
/// score then ascending video id.
pub fn search<T: Scalar>(
    index: &InvertedIndex,
    query: &str,
    k: usize,
    params: &Bm25Params<T>,
) -> Vec<SearchHit<T>> {
    assert!(k >= 1, "k must be positive");
    let terms = tokenize(query);
    let mut scores: HashMap<usize, T> = HashMap::new();
    // Term-at-a-time in query order, so each document's sum is accumulated in
    // the same order as `bm25_score`.
    for term in terms.tokens() {
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        let idf = index.idf(term);
        for p in postings {
            let doc = p.doc as usize;
            let w = index.term_weight(idf, p.term_frequency, doc, params);
            let entry = scores.entry(doc).or_insert_with(T::zero);
            *entry = *entry + w;
        }
    }
    let mut hits: Vec<(usize, T)> = scores.into_iter().collect();
    hits.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| index.videos[a.0].cmp(&index.videos[b.0]))
    });
    hits.truncate(k);
    hits.into_iter()
        .map(|(doc, score)| SearchHit {
            video: index.videos[doc].clone(),
            score,
        })
        .collect()
}

/// Searches every query and emits a retrieval run tagged `tag`.
pub fn search_run<T: Scalar>(
    index: &InvertedIndex,
    queries: &[Query],
    k: usize,
    params: &Bm25Params<T>,
    tag: &str,
) -> Result<RetrievalRun<T>> {
    params.validate()?;
    let per_query: Vec<Vec<RetrievalRunEntry<T>>> = queries
        .par_iter()
        .map(|q| {
            search(index, &q.text, k, params)
                .into_iter()
                .enumerate()
                .map(|(i, hit)| RetrievalRunEntry {
                    question: q.question.clone(),
                    video: hit.video,
                    rank: i as u32 + 1,
                    score: hit.score,
                    tag: tag.to_string(),
                })
                .collect()
        })
        .collect();
    RetrievalRun::from_entries(per_query.into_iter().flatten())
}

// Binary layout, little-endian:
//   magic "MVIX", version u8, flags u8 (bit 0: titles indexed)
//   doc_count u64, avg_doc_length f64
//   doc_count x { id_len u32, id bytes, length u64 }
//   term_count u64
//   term_count x { term_len u32, term bytes, df u32, df x { doc u32, tf u32 } }

impl InvertedIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.push(u8::from(self.includes_titles));
        out.extend_from_slice(&(self.videos.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.avg_doc_length.to_le_bytes());
        for (video, len) in self.videos.iter().zip(&self.doc_lengths) {
            put_str(&mut out, video.as_str());
            out.extend_from_slice(&len.to_le_bytes());
        }
        out.extend_from_slice(&(self.postings.len() as u64).to_le_bytes());
        for (term, list) in &self.postings {
            put_str(&mut out, term);
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for p in list {
                out.extend_from_slice(&p.doc.to_le_bytes());
                out.extend_from_slice(&p.term_frequency.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error("not an index file"));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(r.error(&format!("unsupported index version {version}")));
        }
        let flags = r.u8()?;
        if flags > 1 {
            return Err(r.error("unknown flags"));
        }
        let doc_count = r.count(12)?;
        let avg_doc_length = f64::from_le_bytes(r.array()?);
        let mut videos = Vec::with_capacity(doc_count);
        let mut doc_lengths = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            let id = r.string()?;
            let video = VideoId::new(id).map_err(|e| r.error(&e.to_string()))?;
            if videos.last().is_some_and(|prev| prev >= &video) {
                return Err(r.error("video ids not strictly sorted"));
            }
            videos.push(video);
            doc_lengths.push(u64::from_le_bytes(r.array()?));
        }
        let term_count = r.count(8)?;
        let mut postings = BTreeMap::new();
        for _ in 0..term_count {
            let term = r.string()?;
            let df = r.u32()? as usize;
            if df > r.remaining() / 8 {
                return Err(r.error("posting list truncated"));
            }
            let mut list = Vec::with_capacity(df);
            for _ in 0..df {
                let doc = r.u32()?;
                let term_frequency = r.u32()?;
                if doc as usize >= doc_count || list.last().is_some_and(|p: &Posting| p.doc >= doc)
                {
                    return Err(r.error("posting references an invalid document"));
                }
                list.push(Posting {
                    doc,
                    term_frequency,
                });
            }
            if postings.insert(term, list).is_some() {
                return Err(r.error("duplicate term"));
            }
        }
        if r.remaining() != 0 {
            return Err(r.error("trailing bytes"));
        }
        let total: u64 = doc_lengths.iter().sum();
        let expected = if doc_count == 0 {
            0.0
        } else {
            total as f64 / doc_count as f64
        };
        if (avg_doc_length - expected).abs() > 1e-9 * expected.max(1.0) {
            return Err(r.error("statistics block inconsistent with document table"));
        }
        Ok(Self {
            videos,
            doc_lengths,
            postings,
            avg_doc_length,
            includes_titles: flags == 1,
        })
    }

    /// Writes `index.bin` into `dir`, creating the directory if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(INDEX_FILE), self.to_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(dir.join(INDEX_FILE))?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn error(&self, message: &str) -> Error {
        Error::invalid("index", format!("byte {}: {message}", self.pos))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.error("unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        buf.copy_from_slice(self.take(N)?);
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    /// A u64 element count whose elements occupy at least `min_size` bytes
    /// each; rejects counts the remaining input cannot hold.
    fn count(&mut self, min_size: usize) -> Result<usize> {
        let n = u64::from_le_bytes(self.array()?);
        match usize::try_from(n) {
            Ok(n) if n <= self.remaining() / min_size.max(1) => Ok(n),
            _ => Err(self.error("element count exceeds file size")),
        }
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.error("invalid UTF-8 string"))
    }
}
