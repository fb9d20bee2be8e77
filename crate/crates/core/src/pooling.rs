//! Assessment pools drawn from submitted runs with a depth/probability
//! schedule.
//!
//! Each (run tag, question, rank) gets its own uniform draw derived from a
//! SHA-256 of the seed and the key, so adding or removing a run never changes
//! another run's draws, and raising a band's probability can only add
//! documents.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::RetrievalRun;
use crate::model::{QuestionId, VideoId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub depth: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    pub bands: Vec<Band>,
    pub seed: u64,
}

impl PoolSpec {
    /// Pool size 25: first 10 always, then 5 each at 0.3, 0.2 and 0.1.
    pub fn track_schedule(seed: u64) -> Self {
        Self {
            bands: [(10, 1.0), (5, 0.3), (5, 0.2), (5, 0.1)]
                .into_iter()
                .map(|(depth, probability)| Band { depth, probability })
                .collect(),
            seed,
        }
    }

    pub fn new(bands: Vec<Band>, seed: u64) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::invalid("pool bands", "at least one band required"));
        }
        for b in &bands {
            if b.depth == 0 {
                return Err(Error::invalid("pool bands", "depths must be positive"));
            }
            if !(0.0..=1.0).contains(&b.probability) {
                return Err(Error::invalid(
                    "pool bands",
                    format!("probability {} outside [0, 1]", b.probability),
                ));
            }
        }
        Ok(Self { bands, seed })
    }

    pub fn max_depth(&self) -> usize {
        self.bands.iter().map(|b| b.depth).sum()
    }

    /// Inclusion probability for a 1-based rank; 0 beyond the last band.
    pub fn probability_at(&self, rank: usize) -> f64 {
        let mut upper = 0;
        for b in &self.bands {
            upper += b.depth;
            if rank <= upper {
                return b.probability;
            }
        }
        0.0
    }

    pub fn expected_inclusions(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| b.depth as f64 * b.probability)
            .sum()
    }

    /// Ranks (1-based) sampled from a list of `len` documents.
    pub fn sampled_ranks(&self, tag: &str, question: &QuestionId, len: usize) -> Vec<usize> {
        (1..=len.min(self.max_depth()))
            .filter(|&rank| draw(self.seed, tag, question, rank) < self.probability_at(rank))
            .collect()
    }
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self::track_schedule(0)
    }
}

/// Parses `depth:probability` bands separated by commas, e.g.
/// `10:1,5:0.3,5:0.2,5:0.1`. The seed is left at 0.
impl FromStr for PoolSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bands = s
            .split(',')
            .map(|part| {
                let (depth, prob) = part.trim().split_once(':').ok_or_else(|| {
                    Error::invalid("pool bands", format!("{part:?} is not depth:probability"))
                })?;
                let depth = depth
                    .parse()
                    .map_err(|_| Error::invalid("pool bands", format!("bad depth {depth:?}")))?;
                let probability = prob.parse().map_err(|_| {
                    Error::invalid("pool bands", format!("bad probability {prob:?}"))
                })?;
                Ok(Band { depth, probability })
            })
            .collect::<Result<Vec<_>>>()?;
        PoolSpec::new(bands, 0)
    }
}

impl fmt::Display for PoolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bands: Vec<String> = self
            .bands
            .iter()
            .map(|b| format!("{}:{}", b.depth, b.probability))
            .collect();
        f.write_str(&bands.join(","))
    }
}

/// Uniform draw in [0, 1) keyed by (seed, run tag, question, rank).
pub fn draw(seed: u64, tag: &str, question: &QuestionId, rank: usize) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update((question.as_str().len() as u64).to_le_bytes());
    hasher.update(question.as_str().as_bytes());
    hasher.update((rank as u64).to_le_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Contribution {
    pub rank: usize,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub spec: PoolSpec,
    /// Per question, each pooled video with every run position that put it
    /// there, sorted by rank then tag.
    pub by_question: BTreeMap<QuestionId, BTreeMap<VideoId, Vec<Contribution>>>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.by_question.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, question: &QuestionId, video: &VideoId) -> bool {
        self.by_question
            .get(question)
            .is_some_and(|videos| videos.contains_key(video))
    }
}

/// Ranks are positions in each run's evaluation order (descending score).
pub fn build_pool<T: Scalar>(runs: &[RetrievalRun<T>], spec: &PoolSpec) -> Pool {
    let mut questions: Vec<&QuestionId> = runs.iter().flat_map(|r| r.by_question.keys()).collect();
    questions.sort();
    questions.dedup();
    let by_question = questions
        .par_iter()
        .map(|&q| {
            let mut videos: BTreeMap<VideoId, Vec<Contribution>> = BTreeMap::new();
            for run in runs {
                let Some(list) = run.by_question.get(q) else {
                    continue;
                };
                for (i, entry) in list.iter().enumerate().take(spec.max_depth()) {
                    let rank = i + 1;
                    if draw(spec.seed, &entry.tag, q, rank) < spec.probability_at(rank) {
                        videos
                            .entry(entry.video.clone())
                            .or_default()
                            .push(Contribution {
                                rank,
                                tag: entry.tag.clone(),
                            });
                    }
                }
            }
            for contributions in videos.values_mut() {
                contributions.sort();
                contributions.dedup();
            }
            (q.clone(), videos)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(_, videos)| !videos.is_empty())
        .collect();
    Pool {
        spec: spec.clone(),
        by_question,
    }
}

/// Writes `qid video run_tag rank`, one line per pooled video, using its
/// best-ranked contribution. A `#` header records the schedule and seed.
pub fn write_pool<W: Write>(pool: &Pool, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# pool seed={} bands={} draws=per-rank",
        pool.spec.seed, pool.spec
    )?;
    for (q, videos) in &pool.by_question {
        for (video, contributions) in videos {
            let best = &contributions[0];
            writeln!(out, "{q} {video} {} {}", best.tag, best.rank)?;
        }
    }
    Ok(())
}

/// Reads a pool file back as `(question, video, tag, rank)` rows.
pub fn parse_pool<R: BufRead>(reader: R) -> Result<Vec<(QuestionId, VideoId, String, usize)>> {
    let mut rows = Vec::new();
    for item in crate::io::lines(reader, true) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_ascii_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let q = crate::io::positioned(line, QuestionId::new(fields[0]))?;
        let v = crate::io::positioned(line, VideoId::new(fields[1]))?;
        let rank = crate::io::parse_rank(line, fields[3])? as usize;
        rows.push((q, v, fields[2].to_string(), rank));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::RetrievalRunEntry;

    fn run(tag: &str, questions: &[&str], depth: usize) -> RetrievalRun<f64> {
        let entries = questions.iter().flat_map(|q| {
            (1..=depth).map(move |r| RetrievalRunEntry {
                question: QuestionId::new(*q).unwrap(),
                video: VideoId::new(format!("{tag}-v{r}")).unwrap(),
                rank: r as u32,
                score: (depth - r) as f64,
                tag: tag.to_string(),
            })
        });
        RetrievalRun::from_entries(entries).unwrap()
    }

    #[test]
    fn first_band_always_included() {
        let runs = [run("a", &["Q1", "Q2"], 30), run("b", &["Q1"], 30)];
        for seed in 0..50 {
            let pool = build_pool(&runs, &PoolSpec::track_schedule(seed));
            for r in 1..=10 {
                assert!(pool.contains(
                    &QuestionId::new("Q1").unwrap(),
                    &VideoId::new(format!("a-v{r}")).unwrap()
                ));
                assert!(pool.contains(
                    &QuestionId::new("Q1").unwrap(),
                    &VideoId::new(format!("b-v{r}")).unwrap()
                ));
            }
            assert!(!pool.contains(
                &QuestionId::new("Q1").unwrap(),
                &VideoId::new("a-v26").unwrap()
            ));
        }
    }

    #[test]
    fn schedule_expectation() {
        let spec = PoolSpec::track_schedule(0);
        assert_eq!(spec.max_depth(), 25);
        assert!((spec.expected_inclusions() - 13.0).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_band_contributes_nothing() {
        let spec: PoolSpec = "3:1,4:0".parse().unwrap();
        let q = QuestionId::new("Q").unwrap();
        for seed in 0..100 {
            let s = PoolSpec {
                seed,
                ..spec.clone()
            };
            assert_eq!(s.sampled_ranks("t", &q, 20), vec![1, 2, 3]);
        }
    }

    #[test]
    fn deduplicates_across_runs() {
        let mut a = run("a", &["Q1"], 3);
        let b = run("b", &["Q1"], 3);
        for (entry, other) in a.by_question.values_mut().flatten().zip(b.entries()) {
            entry.video = other.video.clone();
        }
        let pool = build_pool(&[a, b], &PoolSpec::track_schedule(1));
        assert_eq!(pool.len(), 3);
        let contributions =
            &pool.by_question[&QuestionId::new("Q1").unwrap()][&VideoId::new("b-v1").unwrap()];
        assert_eq!(contributions.len(), 2);
    }

    #[test]
    fn spec_parsing_and_validation() {
        let spec: PoolSpec = "10:1,5:0.3,5:0.2,5:0.1".parse().unwrap();
        assert_eq!(spec, PoolSpec::track_schedule(0));
        assert_eq!(spec.to_string(), "10:1,5:0.3,5:0.2,5:0.1");
        assert!("10:1.5".parse::<PoolSpec>().is_err());
        assert!("0:1".parse::<PoolSpec>().is_err());
        assert!("10".parse::<PoolSpec>().is_err());
    }

    #[test]
    fn pool_file_round_trip() {
        let pool = build_pool(&[run("a", &["Q1", "Q2"], 25)], &PoolSpec::track_schedule(9));
        let mut out = Vec::new();
        write_pool(&pool, &mut out).unwrap();
        let rows = parse_pool(out.as_slice()).unwrap();
        assert_eq!(rows.len(), pool.len());
    }
}
