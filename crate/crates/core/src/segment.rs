//! Temporal answer-localization scoring: IoU, mIoU and R@n,IoU=mu.

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{JudgedVideo, LocalizationCandidate, LocalizationRun, Qrels};
use crate::model::{intersection_length, union_length, QuestionId, TimeInterval};
use crate::report::{group_value, subgroup, MetricNode, MetricReport, ParamValue};
use crate::retrieval::{evaluate_rankings, RetrievalScore};
use crate::scalar::{mean, Scalar};

/// Intersection over union; zero when both intervals have zero length.
pub fn temporal_iou<T: Scalar>(pred: &TimeInterval<T>, gt: &TimeInterval<T>) -> T {
    T::ratio_or_zero(intersection_length(pred, gt), union_length(pred, gt))
}

/// IoU after widening both intervals by `lambda` seconds on each side.
pub fn relaxed_iou<T: Scalar>(pred: &TimeInterval<T>, gt: &TimeInterval<T>, lambda: T) -> T {
    temporal_iou(&pred.extend(lambda), &gt.extend(lambda))
}

/// Best IoU of the given candidates against the answers of positively judged
/// videos. Candidates in unjudged or grade-0 videos score 0.
pub fn question_iou<T: Scalar>(
    candidates: &[LocalizationCandidate<T>],
    judged: &[JudgedVideo<T>],
) -> T {
    question_iou_relaxed(candidates, judged, T::zero())
}

pub fn question_iou_relaxed<T: Scalar>(
    candidates: &[LocalizationCandidate<T>],
    judged: &[JudgedVideo<T>],
    lambda: T,
) -> T {
    candidates
        .iter()
        .map(|c| {
            judged
                .iter()
                .filter(|j| j.video == c.video && j.grade.is_relevant())
                .flat_map(|j| &j.answers)
                .map(|gt| relaxed_iou(&c.interval, gt, lambda))
                .fold(T::zero(), T::max)
        })
        .fold(T::zero(), T::max)
}

fn per_question_iou<T: Scalar>(
    run: &LocalizationRun<T>,
    qrels: &Qrels<T>,
    n: usize,
    lambda: T,
) -> Vec<T> {
    let questions: Vec<&QuestionId> = qrels.questions().collect();
    questions
        .par_iter()
        .map(|q| question_iou_relaxed(run.top(q, n), qrels.judged(q), lambda))
        .collect()
}

/// Mean over all judged questions of the best IoU within the top `n`.
pub fn mean_iou<T: Scalar>(run: &LocalizationRun<T>, qrels: &Qrels<T>, n: usize) -> T {
    assert!(n >= 1, "n must be positive");
    mean(&per_question_iou(run, qrels, n, T::zero()))
}

fn hit_percentage<T: Scalar>(ious: &[T], mu: T) -> T {
    let hits = ious.iter().filter(|&&iou| iou >= mu).count();
    T::ratio_or_zero(T::of(100.0) * T::of_count(hits), T::of_count(ious.len()))
}

/// Percentage of judged questions whose best top-`n` IoU is at least `mu`.
pub fn recall_at_n_iou<T: Scalar>(
    run: &LocalizationRun<T>,
    qrels: &Qrels<T>,
    n: usize,
    mu: T,
) -> T {
    assert!(n >= 1, "n must be positive");
    hit_percentage(&per_question_iou(run, qrels, n, T::zero()), mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoUParams<T> {
    pub n_values: Vec<usize>,
    pub mu_values: Vec<T>,
    pub lambda: T,
}

impl<T: Scalar> Default for IoUParams<T> {
    fn default() -> Self {
        Self {
            n_values: vec![1, 3, 5, 10],
            mu_values: vec![T::of(0.3), T::of(0.5), T::of(0.7)],
            lambda: T::zero(),
        }
    }
}

impl<T: Scalar> IoUParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::invalid(
                "n values",
                "need one or more positive integers",
            ));
        }
        if self.mu_values.is_empty()
            || self
                .mu_values
                .iter()
                .any(|&mu| !(mu > T::zero() && mu <= T::one()))
        {
            return Err(Error::invalid("mu values", "each must lie in (0, 1]"));
        }
        if self.lambda < T::zero() || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be a finite value >= 0"));
        }
        Ok(())
    }
}

/// Results for one cutoff `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffScore<T> {
    pub n: usize,
    /// Percentages aligned with `IoUParams::mu_values`.
    pub recall: Vec<T>,
    pub mean_iou: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationScore<T> {
    pub params: IoUParams<T>,
    /// Best IoU per question, aligned with `params.n_values`.
    pub per_question: IndexMap<QuestionId, Vec<T>>,
    pub by_cutoff: Vec<CutoffScore<T>>,
}

pub fn evaluate_localization<T: Scalar>(
    run: &LocalizationRun<T>,
    qrels: &Qrels<T>,
    params: &IoUParams<T>,
) -> Result<LocalizationScore<T>> {
    params.validate()?;
    for q in run
        .by_question
        .keys()
        .filter(|q| !qrels.by_question.contains_key(*q))
    {
        log::warn!("run question {q} has no judgments; ignored");
    }
    let columns: Vec<Vec<T>> = params
        .n_values
        .iter()
        .map(|&n| per_question_iou(run, qrels, n, params.lambda))
        .collect();
    let by_cutoff = params
        .n_values
        .iter()
        .zip(&columns)
        .map(|(&n, ious)| CutoffScore {
            n,
            recall: params
                .mu_values
                .iter()
                .map(|&mu| hit_percentage(ious, mu))
                .collect(),
            mean_iou: mean(ious),
        })
        .collect();
    let per_question = qrels
        .questions()
        .enumerate()
        .map(|(i, q)| (q.clone(), columns.iter().map(|c| c[i]).collect()))
        .collect();
    Ok(LocalizationScore {
        params: params.clone(),
        per_question,
        by_cutoff,
    })
}

impl<T: Scalar> LocalizationScore<T> {
    pub fn to_report(&self) -> MetricReport {
        let mut report = MetricReport::new("localization");
        self.describe(&mut report);
        self.fill(&mut report.values);
        report
    }

    pub(crate) fn describe(&self, report: &mut MetricReport) {
        report
            .param(
                "n",
                ParamValue::list(self.params.n_values.iter().map(|&n| n as f64)),
            )
            .param(
                "mu",
                ParamValue::list(self.params.mu_values.iter().map(|m| m.as_f64())),
            )
            .param("lambda", self.params.lambda.as_f64())
            .meta("multi_answer_reduction", "max")
            .meta("candidate_reduction", "max-over-top-n")
            .meta("relevant_video_gate", "grade>=1")
            .meta("iou_unit", "mIoU ratio; IoU=mu columns in percent");
    }

    pub(crate) fn fill(&self, target: &mut IndexMap<String, MetricNode>) {
        for cutoff in &self.by_cutoff {
            let group = subgroup(target, format!("n={}", cutoff.n));
            for (mu, r) in self.params.mu_values.iter().zip(&cutoff.recall) {
                group_value(group, format!("IoU={mu}"), r.as_f64());
            }
            group_value(group, "mIoU", cutoff.mean_iou.as_f64());
        }
        let per_question = subgroup(target, "per_question");
        for (q, ious) in &self.per_question {
            let group = subgroup(per_question, q.to_string());
            for (n, iou) in self.params.n_values.iter().zip(ious) {
                group_value(group, format!("IoU@{n}"), iou.as_f64());
            }
        }
    }
}

/// Combined retrieval and localization scores for one localization run.
#[derive(Debug, Clone, PartialEq)]
pub struct VcvalScore<T> {
    pub retrieval: RetrievalScore<T>,
    pub localization: LocalizationScore<T>,
}

/// Scores the video ranking implied by a localization run (distinct videos in
/// candidate order) alongside its answer spans.
pub fn evaluate_vcval<T: Scalar>(
    run: &LocalizationRun<T>,
    qrels: &Qrels<T>,
    ks: &[usize],
    params: &IoUParams<T>,
) -> Result<VcvalScore<T>> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid(
            "k values",
            "need one or more positive integers",
        ));
    }
    let localization = evaluate_localization(run, qrels, params)?;
    let retrieval = evaluate_rankings(qrels, ks, |q| run.video_ranking(q), run.by_question.keys());
    Ok(VcvalScore {
        retrieval,
        localization,
    })
}

impl<T: Scalar> VcvalScore<T> {
    pub fn to_report(&self) -> MetricReport {
        let mut report = MetricReport::new("vcval");
        report
            .param(
                "k",
                ParamValue::list(self.retrieval.ks.iter().map(|&k| k as f64)),
            )
            .meta("relevance_threshold", "grade>=1")
            .meta("ndcg_gain", "linear")
            .meta("ndcg_depth", "full")
            .meta("video_ranking", "distinct videos in candidate order");
        self.localization.describe(&mut report);
        self.retrieval
            .fill(subgroup(&mut report.values, "retrieval"));
        self.localization
            .fill(subgroup(&mut report.values, "localization"));
        report
    }
}
