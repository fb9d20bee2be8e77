//! Greedy monotonic alignment of predicted instructional steps to gold steps,
//! with TP/FP/FN accounting and relaxed-IoU segment statistics.
//!
//! The matcher scans gold steps from a moving pointer. For each predicted
//! step it keeps the first gold step reaching the highest score at or above
//! `theta`, then moves the pointer just past that gold step.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::io::{Step, StepSequence};
use crate::model::TimeInterval;
use crate::report::{MetricReport, ParamValue};
use crate::scalar::{mean, Scalar};
use crate::segment::{relaxed_iou, temporal_iou};
use crate::text::{
    bleu_tokens, meteor_tokens, rouge_l, rouge_l_tokens, tokenize, CaptionPair, PrfScore,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentParams<T> {
    pub theta: T,
    pub alpha: T,
    pub beta: T,
    /// Extension in seconds applied by the segment statistics.
    pub lambda: T,
}

impl<T: Scalar> Default for AlignmentParams<T> {
    fn default() -> Self {
        Self {
            theta: T::of(0.4),
            alpha: T::of(0.5),
            beta: T::of(0.5),
            lambda: T::of(3.0),
        }
    }
}

impl<T: Scalar> AlignmentParams<T> {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: T| v.is_finite() && v >= T::zero();
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        if !finite_nonneg(self.alpha) || !finite_nonneg(self.beta) {
            return Err(Error::invalid("weights", "alpha and beta must be >= 0"));
        }
        if !finite_nonneg(self.lambda) {
            return Err(Error::invalid("lambda", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair<T> {
    pub pred: usize,
    pub gold: usize,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult<T> {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched pairs; gold indices strictly increase.
    pub pairs: Vec<AlignedPair<T>>,
}

/// Temporal overlap between step intervals, measured as IoU.
pub fn time_overlap<T: Scalar>(pred: &TimeInterval<T>, gt: &TimeInterval<T>) -> T {
    temporal_iou(pred, gt)
}

/// `alpha * overlap + beta * ROUGE-L F` for a pair of steps.
pub fn alignment_score<T: Scalar>(pred: &Step<T>, gt: &Step<T>, params: &AlignmentParams<T>) -> T {
    let rouge: PrfScore<T> = rouge_l(&CaptionPair::new(
        pred.caption.as_str(),
        gt.caption.as_str(),
    ));
    combine_scores(time_overlap(&pred.interval, &gt.interval), rouge.f, params)
}

pub fn combine_scores<T: Scalar>(overlap: T, rouge_f: T, params: &AlignmentParams<T>) -> T {
    params.alpha * overlap + params.beta * rouge_f
}

/// Runs the greedy matcher over an arbitrary score function.
pub fn align_by_scores<T: Scalar>(
    pred_count: usize,
    gold_count: usize,
    theta: T,
    mut score: impl FnMut(usize, usize) -> T,
) -> AlignmentResult<T> {
    let mut pointer = 0;
    let mut pairs = Vec::new();
    let mut false_positives = 0;
    for p in 0..pred_count {
        let mut best: Option<(usize, T)> = None;
        for g in pointer..gold_count {
            let s = score(p, g);
            let beats = best.is_none_or(|(_, b)| s > b);
            if beats && s >= theta {
                best = Some((g, s));
            }
        }
        match best {
            Some((g, s)) => {
                pairs.push(AlignedPair {
                    pred: p,
                    gold: g,
                    score: s,
                });
                pointer = g + 1;
            }
            None => false_positives += 1,
        }
    }
    AlignmentResult {
        true_positives: pairs.len(),
        false_positives,
        false_negatives: gold_count - pairs.len(),
        pairs,
    }
}

pub fn align_steps<T: Scalar>(
    pred: &StepSequence<T>,
    gold: &StepSequence<T>,
    params: &AlignmentParams<T>,
) -> AlignmentResult<T> {
    align_by_scores(pred.len(), gold.len(), params.theta, |p, g| {
        alignment_score(&pred.steps[p], &gold.steps[g], params)
    })
}

pub fn step_prf<T: Scalar>(result: &AlignmentResult<T>) -> PrfScore<T> {
    prf_from_counts(
        result.true_positives,
        result.false_positives,
        result.false_negatives,
    )
}

pub fn prf_from_counts<T: Scalar>(tp: usize, fp: usize, fn_: usize) -> PrfScore<T> {
    let tp_s = T::of_count(tp);
    PrfScore::from_parts(
        T::ratio_or_zero(tp_s, T::of_count(tp + fp)),
        T::ratio_or_zero(tp_s, T::of_count(tp + fn_)),
    )
}

/// One aligned segment: both sequences and their alignment.
#[derive(Debug, Clone, Copy)]
pub struct SegmentAlignment<'a, T> {
    pub pred: &'a StepSequence<T>,
    pub gold: &'a StepSequence<T>,
    pub result: &'a AlignmentResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats<T> {
    pub gold_steps: usize,
    pub mean_relaxed_iou: T,
    /// Percent of gold steps with relaxed IoU >= mu, aligned with `mu_values`.
    pub at_mu: Vec<(T, T)>,
}

/// Relaxed IoU for every gold step: its matched prediction's IoU, or 0 when
/// it went unmatched.
pub fn gold_step_ious<T: Scalar>(segments: &[SegmentAlignment<'_, T>], lambda: T) -> Vec<T> {
    let mut ious = Vec::new();
    for seg in segments {
        let mut per_gold = vec![T::zero(); seg.gold.len()];
        for pair in &seg.result.pairs {
            per_gold[pair.gold] = relaxed_iou(
                &seg.pred.steps[pair.pred].interval,
                &seg.gold.steps[pair.gold].interval,
                lambda,
            );
        }
        ious.extend(per_gold);
    }
    ious
}

pub fn step_segment_stats<T: Scalar>(
    segments: &[SegmentAlignment<'_, T>],
    lambda: T,
    mu_values: &[T],
) -> SegmentStats<T> {
    segment_stats_from_ious(&gold_step_ious(segments, lambda), mu_values)
}

pub fn segment_stats_from_ious<T: Scalar>(ious: &[T], mu_values: &[T]) -> SegmentStats<T> {
    let hundred = T::of(100.0);
    SegmentStats {
        gold_steps: ious.len(),
        mean_relaxed_iou: mean(ious),
        at_mu: mu_values
            .iter()
            .map(|&mu| {
                let hits = ious.iter().filter(|&&v| v >= mu).count();
                (
                    mu,
                    T::ratio_or_zero(hundred * T::of_count(hits), T::of_count(ious.len())),
                )
            })
            .collect(),
    }
}

/// Predicted steps, gold steps and their alignment.
pub type AlignedSegment<T> = (StepSequence<T>, StepSequence<T>, AlignmentResult<T>);

/// Test-set alignment: every gold segment is aligned against the predicted
/// segment with the same id (or against nothing).
#[derive(Debug, Clone, PartialEq)]
pub struct StepAlignmentSet<T> {
    pub params: AlignmentParams<T>,
    pub segments: BTreeMap<String, AlignedSegment<T>>,
    pub ignored_segments: Vec<String>,
}

pub fn align_test_set<T: Scalar>(
    pred: &BTreeMap<String, StepSequence<T>>,
    gold: &BTreeMap<String, StepSequence<T>>,
    params: &AlignmentParams<T>,
) -> Result<StepAlignmentSet<T>> {
    use rayon::prelude::*;
    params.validate()?;
    let ignored_segments: Vec<String> = pred
        .keys()
        .filter(|k| !gold.contains_key(*k))
        .cloned()
        .collect();
    for id in &ignored_segments {
        log::warn!("predicted segment {id} has no gold steps; ignored");
    }
    let gold_list: Vec<(&String, &StepSequence<T>)> = gold.iter().collect();
    let segments = gold_list
        .par_iter()
        .map(|(id, g)| {
            let p = pred.get(*id).cloned().unwrap_or_else(|| StepSequence {
                segment_id: (*id).clone(),
                steps: Vec::new(),
            });
            let result = align_steps(&p, g, params);
            ((*id).clone(), (p, (*g).clone(), result))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(StepAlignmentSet {
        params: *params,
        segments,
        ignored_segments,
    })
}

impl<T: Scalar> StepAlignmentSet<T> {
    pub fn views(&self) -> Vec<SegmentAlignment<'_, T>> {
        self.segments
            .values()
            .map(|(pred, gold, result)| SegmentAlignment { pred, gold, result })
            .collect()
    }

    /// Summed (micro) TP, FP, FN over all segments.
    pub fn totals(&self) -> (usize, usize, usize) {
        self.segments
            .values()
            .fold((0, 0, 0), |(tp, fp, fn_), (_, _, r)| {
                (
                    tp + r.true_positives,
                    fp + r.false_positives,
                    fn_ + r.false_negatives,
                )
            })
    }

    pub fn prf(&self) -> PrfScore<T> {
        let (tp, fp, fn_) = self.totals();
        prf_from_counts(tp, fp, fn_)
    }

    /// Caption pairs for every matched step.
    pub fn matched_captions(&self) -> Vec<CaptionPair> {
        self.segments
            .values()
            .flat_map(|(pred, gold, result)| {
                result.pairs.iter().map(move |pair| {
                    CaptionPair::new(
                        pred.steps[pair.pred].caption.as_str(),
                        gold.steps[pair.gold].caption.as_str(),
                    )
                })
            })
            .collect()
    }

    fn describe(&self, report: &mut MetricReport) {
        report
            .param("theta", self.params.theta.as_f64())
            .param("alpha", self.params.alpha.as_f64())
            .param("beta", self.params.beta.as_f64())
            .meta("time_overlap", "temporal-iou")
            .meta("matcher", "greedy-monotonic, earliest gold step wins ties")
            .meta("segments", self.segments.len().to_string());
        if !self.ignored_segments.is_empty() {
            report.meta("ignored_segments", self.ignored_segments.join(","));
        }
    }

    /// Precision/recall/F over summed counts plus relaxed-IoU statistics.
    pub fn to_report(&self, mu_values: &[T]) -> MetricReport {
        let mut report = MetricReport::new("steps");
        self.describe(&mut report);
        report
            .param("lambda", self.params.lambda.as_f64())
            .param("mu", ParamValue::list(mu_values.iter().map(|m| m.as_f64())))
            .meta("prf_averaging", "micro (summed counts)")
            .meta(
                "iou_normalization",
                "gold steps; unmatched gold steps score 0",
            );
        let (tp, fp, fn_) = self.totals();
        let prf = self.prf();
        let stats = step_segment_stats(&self.views(), self.params.lambda, mu_values);
        report
            .value("TP", tp as f64)
            .value("FP", fp as f64)
            .value("FN", fn_ as f64)
            .value("Precision", prf.precision.as_f64())
            .value("Recall", prf.recall.as_f64())
            .value("F-score", prf.f.as_f64());
        for (mu, pct) in &stats.at_mu {
            report.value(format!("IoU={mu}"), pct.as_f64());
        }
        report.value("mIoU", stats.mean_relaxed_iou.as_f64());
        report
    }

    /// Caption metrics over matched pairs: corpus BLEU-2/3/4 and mean
    /// METEOR and ROUGE-L F.
    pub fn caption_report(&self) -> MetricReport {
        let mut report = MetricReport::new("captions");
        self.describe(&mut report);
        report
            .meta("pairs", "matched steps at theta")
            .meta(
                "tokenizer",
                "lowercase, whitespace split, strip ASCII punctuation",
            )
            .meta("bleu", "corpus-level, uniform weights, no smoothing")
            .meta("meteor", "meteor-exact")
            .meta("rouge", "rouge-l f-measure, mean over pairs");
        let scores = caption_scores::<T>(&self.matched_captions());
        report.meta("matched_pairs", scores.pairs.to_string());
        report
            .value("BLEU-2", scores.bleu[1].as_f64())
            .value("BLEU-3", scores.bleu[2].as_f64())
            .value("BLEU-4", scores.bleu[3].as_f64())
            .value("METEOR", scores.meteor.as_f64())
            .value("ROUGE-L", scores.rouge_l.as_f64());
        report
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionScores<T> {
    pub pairs: usize,
    /// BLEU-1 through BLEU-4.
    pub bleu: [T; 4],
    pub meteor: T,
    pub rouge_l: T,
}

pub fn caption_scores<T: Scalar>(pairs: &[CaptionPair]) -> CaptionScores<T> {
    let tokenized: Vec<_> = pairs
        .iter()
        .map(|p| (tokenize(&p.predicted), tokenize(&p.reference)))
        .collect();
    let meteor: Vec<T> = tokenized
        .iter()
        .map(|(p, r)| meteor_tokens::<T>(p, r).score)
        .collect();
    let rouge: Vec<T> = tokenized
        .iter()
        .map(|(p, r)| rouge_l_tokens::<T>(p, r).f)
        .collect();
    CaptionScores {
        pairs: pairs.len(),
        bleu: [1, 2, 3, 4].map(|n| bleu_tokens(&tokenized, n)),
        meteor: mean(&meteor),
        rouge_l: mean(&rouge),
    }
}
