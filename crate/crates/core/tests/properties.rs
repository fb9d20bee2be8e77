mod common;

use common::*;
use medvideval::bm25::{self, Bm25Params, IndexOptions, InvertedIndex};
use medvideval::io::{self, CorpusDocument, Qrels, StepSequence};
use medvideval::pooling::{build_pool, write_pool, Band, PoolSpec};
use medvideval::report::{read_structured_report, write_report, ReportFormat};
use medvideval::retrieval::evaluate_retrieval;
use medvideval::segment::{relaxed_iou, temporal_iou};
use medvideval::steps::{align_steps, alignment_score, AlignmentParams};
use medvideval::text::{
    bleu_tokens, chunk_count, meteor_alignment, meteor_tokens, rouge_l_tokens, tokenize,
};
use medvideval::{QuestionId, TimeInterval};
use proptest::prelude::*;

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(VOCAB.to_vec()).prop_map(String::from),
        0..=max,
    )
}

fn cells() -> impl Strategy<Value = (u32, u32)> {
    (0u32..60, 0u32..60).prop_map(|(a, b)| (a.min(b), a.max(b)))
}

proptest! {
    #[test]
    fn iou_bounded_and_symmetric(a in cells(), b in cells()) {
        let (x, y) = (to_interval(a), to_interval(b));
        let iou = temporal_iou(&x, &y);
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert_eq!(iou, temporal_iou(&y, &x));
        if !x.is_empty() {
            prop_assert_eq!(temporal_iou(&x, &x), 1.0);
        }
    }

    #[test]
    fn relaxed_iou_grows_with_lambda(a in cells(), b in cells(), l1 in 0u32..10, dl in 0u32..10) {
        // Shift away from zero so the clamp at 0 never bites.
        let shift = |c: (u32, u32)| to_interval((c.0 + 40, c.1 + 40));
        let (x, y) = (shift(a), shift(b));
        let nested = (x.start() <= y.start() && y.end() <= x.end()) || (y.start() <= x.start() && x.end() <= y.end());
        let disjoint = x.end() <= y.start() || y.end() <= x.start();
        prop_assume!(nested || disjoint);
        let (lo, hi) = (l1 as f64, (l1 + dl) as f64);
        prop_assert!(relaxed_iou(&x, &y, lo) <= relaxed_iou(&x, &y, hi) + 1e-12);
    }

    #[test]
    fn rouge_swap_identity(a in words(8), b in words(8)) {
        let (ta, tb) = (tokenize(&a.join(" ")), tokenize(&b.join(" ")));
        let ab = rouge_l_tokens::<f64>(&ta, &tb);
        let ba = rouge_l_tokens::<f64>(&tb, &ta);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        if a.len() == b.len() {
            prop_assert!((ab.f - ba.f).abs() < 1e-12);
        }
    }

    #[test]
    fn bleu_of_identical_corpus_is_one(pairs in prop::collection::vec(words(8), 1..4), n in 1usize..=4) {
        let pairs: Vec<_> = pairs
            .iter()
            .filter(|w| w.len() >= n)
            .map(|w| (tokenize(&w.join(" ")), tokenize(&w.join(" "))))
            .collect();
        prop_assume!(!pairs.is_empty());
        prop_assert!((bleu_tokens::<f64>(&pairs, n) - 1.0).abs() < 1e-12);
    }

    // BLEU = 1 forces equal lengths and identical n-gram multisets up to
    // order n, though not identical token order.
    #[test]
    fn bleu_one_implies_same_ngrams(p in words(6), r in words(6), n in 1usize..=3) {
        let pair = [(tokenize(&p.join(" ")), tokenize(&r.join(" ")))];
        if (bleu_tokens::<f64>(&pair, n) - 1.0).abs() < 1e-12 {
            let mut sp = p.clone();
            let mut sr = r.clone();
            sp.sort();
            sr.sort();
            prop_assert_eq!(sp, sr);
        }
    }

    #[test]
    fn meteor_recomputes_from_alignment(a in words(8), b in words(8)) {
        let (ta, tb) = (tokenize(&a.join(" ")), tokenize(&b.join(" ")));
        let s = meteor_tokens::<f64>(&ta, &tb);
        prop_assert!((0.0..=1.0).contains(&s.score));
        let alignment = meteor_alignment(&ta, &tb);
        let m = alignment.len();
        prop_assert_eq!(m, s.matches);
        prop_assert_eq!(chunk_count(&alignment), s.chunks);
        if m > 0 {
            let p = m as f64 / a.len() as f64;
            let r = m as f64 / b.len() as f64;
            let f = 10.0 * p * r / (r + 9.0 * p);
            let penalty = 0.5 * (s.chunks as f64 / m as f64).powi(3);
            prop_assert!((s.score - f * (1.0 - penalty)).abs() < 1e-12);
        } else {
            prop_assert_eq!(s.score, 0.0);
        }
    }

    #[test]
    fn alignment_score_monotone_in_overlap(a in cells(), grow in 1u32..20, caption in words(4)) {
        prop_assume!(!caption.is_empty() && a.1 > a.0);
        let text = caption.join(" ");
        let gold = StepSequence::new("s", vec![(text.clone(), to_interval(a))]).unwrap();
        // A prediction inside the gold step, then one grown towards it.
        let inner = (a.0, a.0 + (a.1 - a.0).div_ceil(2));
        let outer = (a.0, (inner.1 + grow).min(a.1));
        let p1 = StepSequence::new("s", vec![(text.clone(), to_interval(inner))]).unwrap();
        let p2 = StepSequence::new("s", vec![(text, to_interval(outer))]).unwrap();
        let params = AlignmentParams::default();
        prop_assert!(
            alignment_score(&p1.steps[0], &gold.steps[0], &params)
                <= alignment_score(&p2.steps[0], &gold.steps[0], &params)
        );
    }

    #[test]
    fn matches_clear_theta_and_counts_add_up(seed in any::<u64>(), t1 in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let mut r = rng(seed);
        let mk = |r: &mut rand_chacha::ChaCha8Rng| {
            use rand::Rng;
            let steps = (0..r.gen_range(0..6))
                .map(|_| (random_words(r, 1, 3).join(" "), to_interval(half_second_interval(r, 40))))
                .collect();
            StepSequence::new("s", steps).unwrap()
        };
        let (p, g) = (mk(&mut r), mk(&mut r));
        let low = align_steps(&p, &g, &AlignmentParams { theta: t1, ..AlignmentParams::default() });
        let high = align_steps(&p, &g, &AlignmentParams { theta: t1 + dt, ..AlignmentParams::default() });
        prop_assert!(high.pairs.iter().all(|x| x.score >= t1 + dt));
        prop_assert_eq!(low.true_positives + low.false_positives, p.len());
        prop_assert_eq!(high.true_positives + high.false_negatives, g.len());
    }

    #[test]
    fn retrieval_metrics_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = retrieval_instance(&mut r);
        let mut qrels = Qrels::default();
        qrels.by_question.insert(qid(0), inst.judged.clone());
        let entries = inst.ranking.iter().enumerate().map(|(i, v)| io::RetrievalRunEntry {
            question: qid(0),
            video: v.clone(),
            rank: i as u32 + 1,
            score: -(i as f64),
            tag: "t".into(),
        });
        let run = io::RetrievalRun::from_entries(entries).unwrap();
        let s = evaluate_retrieval(&run, &qrels, &[1, 3, 5]);
        for v in [s.map, s.ndcg].iter().chain(&s.precision).chain(&s.recall) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        prop_assert!(s.recall.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bm25_top_k_matches_exhaustive(seed in any::<u64>(), k in 1usize..=12) {
        use rand::Rng;
        let mut r = rng(seed);
        let docs: Vec<(medvideval::VideoId, Vec<String>)> =
            (0..r.gen_range(1..=50)).map(|d| (vid(d), random_words(&mut r, 0, 12))).collect();
        let corpus: Vec<CorpusDocument> = docs
            .iter()
            .map(|(v, t)| CorpusDocument { video: v.clone(), title: String::new(), subtitle: t.join(" ") })
            .collect();
        let index = bm25::build_index(&corpus, IndexOptions::default()).unwrap();
        let query = random_words(&mut r, 1, 3);
        let hits = bm25::search(&index, &query.join(" "), k, &Bm25Params::<f64>::default());
        let mut expected = oracle_bm25_ranking(&docs, &query, 0.9, 0.4);
        expected.truncate(k);
        prop_assert_eq!(hits.len(), expected.len());
        for (h, e) in hits.iter().zip(&expected) {
            prop_assert_eq!(&h.video, &e.0);
            prop_assert!((h.score - e.1).abs() < 1e-9);
            let direct = bm25::bm25_score(&query, &h.video, &index, &Bm25Params::<f64>::default()).unwrap();
            prop_assert_eq!(h.score, direct);
        }
    }

    #[test]
    fn index_bytes_round_trip(seed in any::<u64>(), titles in any::<bool>()) {
        let mut r = rng(seed);
        let corpus: Vec<CorpusDocument> = (0..8)
            .map(|d| CorpusDocument {
                video: vid(d),
                title: random_words(&mut r, 0, 3).join(" "),
                subtitle: random_words(&mut r, 0, 8).join(" "),
            })
            .collect();
        let index = bm25::build_index(&corpus, IndexOptions { include_titles: titles }).unwrap();
        let bytes = index.to_bytes();
        prop_assert_eq!(InvertedIndex::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn raising_probabilities_only_adds(seed in any::<u64>(), p in 0.0f64..=1.0, dp in 0.0f64..=1.0) {
        let low = PoolSpec::new(vec![Band { depth: 5, probability: 1.0 }, Band { depth: 20, probability: p }], seed).unwrap();
        let high_p = (p + dp).min(1.0);
        let high = PoolSpec { bands: vec![low.bands[0], Band { depth: 20, probability: high_p }], seed };
        let q = QuestionId::new("Q1").unwrap();
        let a = low.sampled_ranks("run", &q, 30);
        let b = high.sampled_ranks("run", &q, 30);
        prop_assert!(a.iter().all(|rank| b.contains(rank)));
    }

    #[test]
    fn first_band_ignores_seed(seed in any::<u64>(), len in 0usize..40) {
        let ranks = PoolSpec::track_schedule(seed).sampled_ranks("run", &qid(3), len);
        let sure: Vec<usize> = (1..=len.min(10)).collect();
        prop_assert_eq!(&ranks[..sure.len()], &sure[..]);
    }

    #[test]
    fn timestamp_round_trip(secs in 0u32..20_000, frac in prop::sample::select(vec![0.0, 0.5, 0.25])) {
        let t = secs as f64 + frac;
        let text = medvideval::format_timestamp(t);
        prop_assert_eq!(medvideval::parse_timestamp::<f64>(&text).unwrap(), t);
    }
}

#[test]
fn pool_independent_of_other_runs() {
    let spec = PoolSpec::track_schedule(5);
    let entries = |tag: &'static str| {
        (0..30).map(move |i| io::RetrievalRunEntry {
            question: qid(0),
            video: vid(i + if tag == "b" { 100 } else { 0 }),
            rank: i as u32 + 1,
            score: -(i as f64),
            tag: tag.to_string(),
        })
    };
    let a = io::RetrievalRun::from_entries(entries("a")).unwrap();
    let b = io::RetrievalRun::from_entries(entries("b")).unwrap();
    let alone = build_pool(std::slice::from_ref(&a), &spec);
    let both = build_pool(&[a, b], &spec);
    let from_a: Vec<_> = both.by_question[&qid(0)]
        .iter()
        .filter(|(_, contributions)| contributions.iter().any(|c| c.tag == "a"))
        .map(|(v, _)| v.clone())
        .collect();
    let alone: Vec<_> = alone.by_question[&qid(0)].keys().cloned().collect();
    assert_eq!(from_a, alone);
}

#[test]
fn run_and_qrels_round_trip() {
    let mut r = rng(11);
    let inst = localization_instance(&mut r);
    let mut grades = Vec::new();
    io::write_grades(&inst.qrels, &mut grades).unwrap();
    let mut answers = Vec::new();
    io::write_answers(&inst.qrels, &mut answers).unwrap();
    let back: Qrels<f64> = io::parse_qrels(grades.as_slice(), Some(answers.as_slice())).unwrap();
    assert_eq!(back, inst.qrels);

    let mut text = Vec::new();
    io::write_localization_run(&inst.run, &mut text).unwrap();
    let run: io::LocalizationRun<f64> = io::parse_localization_run(text.as_slice()).unwrap();
    assert_eq!(run, inst.run);

    let seqs = [StepSequence::new(
        "a",
        vec![("tie the arm".into(), TimeInterval::new(1.5, 4.0).unwrap())],
    )
    .unwrap()];
    let mut text = Vec::new();
    io::write_steps(seqs.iter(), &mut text).unwrap();
    let back = io::parse_steps::<f64, _>(text.as_slice()).unwrap();
    assert_eq!(back.sequences["a"], seqs[0]);
}

#[test]
fn report_round_trip_and_pool_bytes() {
    let mut r = rng(12);
    let inst = retrieval_instance(&mut r);
    let mut qrels = Qrels::default();
    qrels.by_question.insert(qid(0), inst.judged);
    let run = io::RetrievalRun::from_entries(inst.ranking.iter().enumerate().map(|(i, v)| {
        io::RetrievalRunEntry {
            question: qid(0),
            video: v.clone(),
            rank: i as u32 + 1,
            score: 1.0 / (i + 1) as f64,
            tag: "t".into(),
        }
    }))
    .unwrap();
    let report = evaluate_retrieval(&run, &qrels, &[5, 10]).to_report();
    let mut json = Vec::new();
    write_report(&report, ReportFormat::Structured, &mut json).unwrap();
    assert_eq!(read_structured_report(json.as_slice()).unwrap(), report);

    let spec = PoolSpec::track_schedule(3);
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_pool(&build_pool(std::slice::from_ref(&run), &spec), &mut a).unwrap();
    write_pool(&build_pool(std::slice::from_ref(&run), &spec), &mut b).unwrap();
    assert_eq!(a, b);
}
