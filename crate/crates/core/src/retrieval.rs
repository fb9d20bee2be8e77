//! Ranked-retrieval metrics with trec_eval conventions: binary relevance is
//! grade >= 1, nDCG uses linear gains over the full ranking.

use std::collections::HashMap;

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::io::{JudgedVideo, Qrels, RetrievalRun};
use crate::model::{QuestionId, RelevanceGrade, VideoId};
use crate::report::{group_value, subgroup, MetricNode, MetricReport, ParamValue};
use crate::scalar::{mean, Scalar};

fn grades<T>(judged: &[JudgedVideo<T>]) -> HashMap<&VideoId, RelevanceGrade> {
    judged.iter().map(|j| (&j.video, j.grade)).collect()
}

fn relevant_count<T>(judged: &[JudgedVideo<T>]) -> usize {
    judged.iter().filter(|j| j.grade.is_relevant()).count()
}

fn relevance_flags<T>(ranking: &[VideoId], judged: &[JudgedVideo<T>]) -> Vec<bool> {
    let lookup = grades(judged);
    ranking
        .iter()
        .map(|v| lookup.get(v).is_some_and(|g| g.is_relevant()))
        .collect()
}

pub fn average_precision<T: Scalar>(ranking: &[VideoId], judged: &[JudgedVideo<T>]) -> T {
    let total = relevant_count(judged);
    if total == 0 {
        return T::zero();
    }
    let mut hits = 0usize;
    let mut sum = T::zero();
    for (i, relevant) in relevance_flags(ranking, judged).into_iter().enumerate() {
        if relevant {
            hits += 1;
            sum = sum + T::of_count(hits) / T::of_count(i + 1);
        }
    }
    sum / T::of_count(total)
}

fn hits_at<T>(ranking: &[VideoId], judged: &[JudgedVideo<T>], k: usize) -> usize {
    let take = k.min(ranking.len());
    relevance_flags(&ranking[..take], judged)
        .into_iter()
        .filter(|&r| r)
        .count()
}

/// Relevant in the top `k`, over `k`; short rankings count as padded with
/// non-relevant documents.
pub fn precision_at_k<T: Scalar>(ranking: &[VideoId], judged: &[JudgedVideo<T>], k: usize) -> T {
    assert!(k >= 1, "cutoff must be positive");
    T::of_count(hits_at(ranking, judged, k)) / T::of_count(k)
}

pub fn recall_at_k<T: Scalar>(ranking: &[VideoId], judged: &[JudgedVideo<T>], k: usize) -> T {
    assert!(k >= 1, "cutoff must be positive");
    T::ratio_or_zero(
        T::of_count(hits_at(ranking, judged, k)),
        T::of_count(relevant_count(judged)),
    )
}

fn dcg<T: Scalar>(gains: impl IntoIterator<Item = u8>) -> T {
    gains
        .into_iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, g)| {
            acc + T::of(f64::from(g)) / T::of_count(i + 2).log2()
        })
}

/// Full-depth nDCG with gain = grade and discount log2(rank + 1).
pub fn ndcg<T: Scalar>(ranking: &[VideoId], judged: &[JudgedVideo<T>]) -> T {
    let lookup = grades(judged);
    let actual: T = dcg(ranking
        .iter()
        .map(|v| lookup.get(v).map_or(0, |g| g.value())));
    let mut ideal: Vec<u8> = judged.iter().map(|j| j.grade.value()).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: T = dcg(ideal);
    T::ratio_or_zero(actual, ideal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRetrieval<T> {
    pub average_precision: T,
    pub ndcg: T,
    /// Aligned with [`RetrievalScore::ks`].
    pub precision: Vec<T>,
    pub recall: Vec<T>,
}

impl<T: Scalar> QuestionRetrieval<T> {
    fn zero(ks: usize) -> Self {
        Self {
            average_precision: T::zero(),
            ndcg: T::zero(),
            precision: vec![T::zero(); ks],
            recall: vec![T::zero(); ks],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalScore<T> {
    pub ks: Vec<usize>,
    pub per_question: IndexMap<QuestionId, QuestionRetrieval<T>>,
    pub map: T,
    pub ndcg: T,
    pub precision: Vec<T>,
    pub recall: Vec<T>,
    /// Questions present in the run but absent from the judgments.
    pub ignored: Vec<QuestionId>,
}

pub fn score_ranking<T: Scalar>(
    ranking: &[VideoId],
    judged: &[JudgedVideo<T>],
    ks: &[usize],
) -> QuestionRetrieval<T> {
    QuestionRetrieval {
        average_precision: average_precision(ranking, judged),
        ndcg: ndcg(ranking, judged),
        precision: ks
            .iter()
            .map(|&k| precision_at_k(ranking, judged, k))
            .collect(),
        recall: ks
            .iter()
            .map(|&k| recall_at_k(ranking, judged, k))
            .collect(),
    }
}

/// Macro-averages over every judged question; unanswered questions score 0.
pub fn evaluate_retrieval<T: Scalar>(
    run: &RetrievalRun<T>,
    qrels: &Qrels<T>,
    ks: &[usize],
) -> RetrievalScore<T> {
    evaluate_rankings(qrels, ks, |q| run.ranking(q), run.by_question.keys())
}

/// Shared driver for plain runs and the retrieval half of localization runs.
pub(crate) fn evaluate_rankings<'a, T: Scalar>(
    qrels: &Qrels<T>,
    ks: &[usize],
    ranking_of: impl Fn(&QuestionId) -> Vec<VideoId> + Sync,
    run_questions: impl Iterator<Item = &'a QuestionId>,
) -> RetrievalScore<T> {
    assert!(!ks.is_empty(), "at least one cutoff required");
    assert!(ks.iter().all(|&k| k >= 1), "cutoffs must be positive");
    let ignored: Vec<QuestionId> = run_questions
        .filter(|q| !qrels.by_question.contains_key(*q))
        .cloned()
        .collect();
    for q in &ignored {
        log::warn!("run question {q} has no judgments; ignored");
    }
    let questions: Vec<&QuestionId> = qrels.questions().collect();
    let scored: Vec<QuestionRetrieval<T>> = questions
        .par_iter()
        .map(|q| {
            let ranking = ranking_of(q);
            if ranking.is_empty() {
                QuestionRetrieval::zero(ks.len())
            } else {
                score_ranking(&ranking, qrels.judged(q), ks)
            }
        })
        .collect();
    let column = |f: &dyn Fn(&QuestionRetrieval<T>) -> T| -> T {
        mean(&scored.iter().map(f).collect::<Vec<_>>())
    };
    let map = column(&|s| s.average_precision);
    let ndcg = column(&|s| s.ndcg);
    let precision = (0..ks.len()).map(|i| column(&|s| s.precision[i])).collect();
    let recall = (0..ks.len()).map(|i| column(&|s| s.recall[i])).collect();
    RetrievalScore {
        ks: ks.to_vec(),
        per_question: questions.into_iter().cloned().zip(scored).collect(),
        map,
        ndcg,
        precision,
        recall,
        ignored,
    }
}

impl<T: Scalar> RetrievalScore<T> {
    /// MAP, R@k, P@k, nDCG in that order, followed by per-question values.
    pub fn to_report(&self) -> MetricReport {
        let mut report = MetricReport::new("retrieval");
        report
            .param("k", ParamValue::list(self.ks.iter().map(|&k| k as f64)))
            .meta("relevance_threshold", "grade>=1")
            .meta("ndcg_gain", "linear")
            .meta("ndcg_depth", "full")
            .meta("questions", self.per_question.len().to_string());
        if !self.ignored.is_empty() {
            let ids: Vec<String> = self.ignored.iter().map(|q| q.to_string()).collect();
            report.meta("ignored_questions", ids.join(","));
        }
        self.fill(&mut report.values);
        report
    }

    pub(crate) fn fill(&self, target: &mut IndexMap<String, MetricNode>) {
        group_value(target, "MAP", self.map.as_f64());
        for (k, r) in self.ks.iter().zip(&self.recall) {
            group_value(target, format!("R@{k}"), r.as_f64());
        }
        for (k, p) in self.ks.iter().zip(&self.precision) {
            group_value(target, format!("P@{k}"), p.as_f64());
        }
        group_value(target, "nDCG", self.ndcg.as_f64());
        let per_question = subgroup(target, "per_question");
        for (q, s) in &self.per_question {
            let group = subgroup(per_question, q.to_string());
            group_value(group, "AP", s.average_precision.as_f64());
            for (k, r) in self.ks.iter().zip(&s.recall) {
                group_value(group, format!("R@{k}"), r.as_f64());
            }
            for (k, p) in self.ks.iter().zip(&s.precision) {
                group_value(group, format!("P@{k}"), p.as_f64());
            }
            group_value(group, "nDCG", s.ndcg.as_f64());
        }
    }
}
