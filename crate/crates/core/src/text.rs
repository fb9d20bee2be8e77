//! Caption similarity: shared tokenizer, LCS, ROUGE-L, corpus BLEU and an
//! exact-match METEOR.

use std::collections::HashMap;

use crate::scalar::Scalar;

/// Lowercased word tokens with leading/trailing ASCII punctuation removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace()
        .map(|word| {
            word.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionPair {
    pub predicted: String,
    pub reference: String,
}

impl CaptionPair {
    pub fn new(predicted: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            predicted: predicted.into(),
            reference: reference.into(),
        }
    }
}

pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (a.tokens(), b.tokens());
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diagonal = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diagonal + 1
            } else {
                above.max(row[j])
            };
            diagonal = above;
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfScore<T> {
    pub precision: T,
    pub recall: T,
    pub f: T,
}

impl<T: Scalar> PrfScore<T> {
    pub fn zero() -> Self {
        Self {
            precision: T::zero(),
            recall: T::zero(),
            f: T::zero(),
        }
    }

    pub(crate) fn from_parts(precision: T, recall: T) -> Self {
        let two = T::of(2.0);
        Self {
            precision,
            recall,
            f: T::ratio_or_zero(two * precision * recall, precision + recall),
        }
    }
}

pub fn rouge_l<T: Scalar>(pair: &CaptionPair) -> PrfScore<T> {
    rouge_l_tokens(&tokenize(&pair.predicted), &tokenize(&pair.reference))
}

pub fn rouge_l_tokens<T: Scalar>(pred: &TokenSequence, reference: &TokenSequence) -> PrfScore<T> {
    if pred.is_empty() || reference.is_empty() {
        return PrfScore::zero();
    }
    let lcs = T::of_count(lcs_length(pred, reference));
    PrfScore::from_parts(
        lcs / T::of_count(pred.len()),
        lcs / T::of_count(reference.len()),
    )
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and total predicted n-grams of order `n` for one pair.
fn clipped_ngrams(pred: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let reference = ngram_counts(reference, n);
    let pred = ngram_counts(pred, n);
    let total = pred.values().sum();
    let matched = pred
        .iter()
        .map(|(gram, &count)| count.min(reference.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

/// Corpus-level BLEU with uniform weights over orders 1..=`max_order`, no
/// smoothing, single reference per pair.
pub fn bleu_n<T: Scalar>(pairs: &[CaptionPair], max_order: usize) -> T {
    assert!((1..=4).contains(&max_order), "BLEU order must be in 1..=4");
    let tokenized: Vec<(TokenSequence, TokenSequence)> = pairs
        .iter()
        .map(|p| (tokenize(&p.predicted), tokenize(&p.reference)))
        .collect();
    bleu_tokens(&tokenized, max_order)
}

pub fn bleu_tokens<T: Scalar>(pairs: &[(TokenSequence, TokenSequence)], max_order: usize) -> T {
    let pred_len: usize = pairs.iter().map(|(p, _)| p.len()).sum();
    let ref_len: usize = pairs.iter().map(|(_, r)| r.len()).sum();
    if pred_len == 0 {
        return T::zero();
    }
    let mut log_sum = T::zero();
    for n in 1..=max_order {
        let (matched, total) = pairs.iter().fold((0, 0), |(m, t), (p, r)| {
            let (pm, pt) = clipped_ngrams(p.tokens(), r.tokens(), n);
            (m + pm, t + pt)
        });
        if matched == 0 {
            return T::zero();
        }
        log_sum = log_sum + (T::of_count(matched) / T::of_count(total)).ln();
    }
    let geometric = (log_sum / T::of_count(max_order)).exp();
    let ratio = T::of_count(ref_len) / T::of_count(pred_len);
    let brevity = (T::one() - ratio).min(T::zero()).exp();
    geometric * brevity
}

/// Exact-match METEOR with its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorScore<T> {
    pub matches: usize,
    pub chunks: usize,
    pub precision: T,
    pub recall: T,
    pub f_mean: T,
    pub penalty: T,
    pub score: T,
}

/// Search budget for the minimum-chunk alignment. Short captions finish far
/// below it; past it the best alignment found so far is used.
const ALIGNMENT_BUDGET: usize = 2_000_000;

/// An alignment with the maximum number of exact unigram matches and, among
/// those, the fewest chunks. Returns `(pred_index, ref_index)` pairs in pred
/// order.
pub fn meteor_alignment(pred: &TokenSequence, reference: &TokenSequence) -> Vec<(usize, usize)> {
    let pred = pred.tokens();
    let reference = reference.tokens();
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, t) in reference.iter().enumerate() {
        positions.entry(t.as_str()).or_default().push(j);
    }
    // Per token type, how many pred occurrences may stay unmatched.
    let mut spare: HashMap<&str, usize> = HashMap::new();
    for t in pred {
        *spare.entry(t.as_str()).or_insert(0) += 1;
    }
    for (t, count) in spare.iter_mut() {
        let available = positions.get(t).map_or(0, Vec::len);
        *count = count.saturating_sub(available);
    }

    struct Search<'a> {
        pred: &'a [String],
        positions: HashMap<&'a str, Vec<usize>>,
        spare: HashMap<&'a str, usize>,
        used: Vec<bool>,
        current: Vec<Option<usize>>,
        best: Vec<Option<usize>>,
        best_links: Option<usize>,
        nodes: usize,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize, links: usize) {
            self.nodes += 1;
            if let Some(best) = self.best_links {
                if self.nodes > ALIGNMENT_BUDGET || links + (self.pred.len() - i) <= best {
                    return;
                }
            }
            if i == self.pred.len() {
                self.best_links = Some(links);
                self.best = self.current.clone();
                return;
            }
            let token = self.pred[i].as_str();
            let previous = if i > 0 { self.current[i - 1] } else { None };
            let mut options: Vec<usize> = self
                .positions
                .get(token)
                .into_iter()
                .flatten()
                .copied()
                .filter(|&j| !self.used[j])
                .collect();
            // Try the continuation of the previous match first.
            if let Some(next) = previous.map(|p| p + 1) {
                if let Some(pos) = options.iter().position(|&j| j == next) {
                    options.swap(0, pos);
                }
            }
            for j in options {
                self.used[j] = true;
                self.current[i] = Some(j);
                let link = usize::from(previous.is_some_and(|p| p + 1 == j));
                self.run(i + 1, links + link);
                self.current[i] = None;
                self.used[j] = false;
            }
            let spare = self.spare.get(token).copied().unwrap_or(0);
            if spare > 0 {
                self.spare.insert(token, spare - 1);
                self.run(i + 1, links);
                self.spare.insert(token, spare);
            }
        }
    }

    let mut search = Search {
        pred,
        positions,
        spare,
        used: vec![false; reference.len()],
        current: vec![None; pred.len()],
        best: vec![None; pred.len()],
        best_links: None,
        nodes: 0,
    };
    search.run(0, 0);
    if search.nodes > ALIGNMENT_BUDGET {
        log::debug!("meteor alignment search budget exhausted; using best alignment found");
    }
    search
        .best
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

/// Number of maximal runs of matches that are contiguous and in order in
/// both sequences. `alignment` must be sorted by pred index.
pub fn chunk_count(alignment: &[(usize, usize)]) -> usize {
    alignment
        .iter()
        .enumerate()
        .filter(|&(k, &(i, j))| {
            k == 0 || alignment[k - 1] != (i.wrapping_sub(1), j.wrapping_sub(1))
        })
        .count()
}

pub fn meteor<T: Scalar>(pair: &CaptionPair) -> MeteorScore<T> {
    meteor_tokens(&tokenize(&pair.predicted), &tokenize(&pair.reference))
}

/// METEOR with alpha = 0.9, beta = 3, gamma = 0.5:
/// `F = 10PR / (R + 9P)`, `penalty = 0.5 (chunks / m)^3`.
pub fn meteor_tokens<T: Scalar>(pred: &TokenSequence, reference: &TokenSequence) -> MeteorScore<T> {
    let alignment = meteor_alignment(pred, reference);
    let matches = alignment.len();
    if matches == 0 {
        return MeteorScore {
            matches: 0,
            chunks: 0,
            precision: T::zero(),
            recall: T::zero(),
            f_mean: T::zero(),
            penalty: T::zero(),
            score: T::zero(),
        };
    }
    let chunks = chunk_count(&alignment);
    let m = T::of_count(matches);
    let precision = m / T::of_count(pred.len());
    let recall = m / T::of_count(reference.len());
    let f_mean = T::of(10.0) * precision * recall / (recall + T::of(9.0) * precision);
    let penalty = T::of(0.5) * (T::of_count(chunks) / m).powi(3);
    MeteorScore {
        matches,
        chunks,
        precision,
        recall,
        f_mean,
        penalty,
        score: f_mean * (T::one() - penalty),
    }
}
