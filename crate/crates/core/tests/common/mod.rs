//! Brute-force reference implementations and random instance generators.
//! Each oracle follows the textbook definition directly and shares no code
//! path with the library beyond its input types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use medvideval::io::{JudgedVideo, LocalizationCandidate, LocalizationRun, Qrels};
use medvideval::{QuestionId, RelevanceGrade, TimeInterval, VideoId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vid(i: usize) -> VideoId {
    VideoId::new(format!("v{i}")).unwrap()
}

pub fn qid(i: usize) -> QuestionId {
    QuestionId::new(format!("Q{i}")).unwrap()
}

// ---------------------------------------------------------------- retrieval

/// A ranking over up to 8 videos and graded judgments for a subset.
pub struct RetrievalInstance {
    pub ranking: Vec<VideoId>,
    pub judged: Vec<JudgedVideo<f64>>,
}

pub fn retrieval_instance(r: &mut ChaCha8Rng) -> RetrievalInstance {
    let universe = r.gen_range(1..=8);
    let mut ids: Vec<usize> = (0..universe).collect();
    shuffle(r, &mut ids);
    let ranked = r.gen_range(0..=universe);
    let ranking = ids[..ranked].iter().map(|&i| vid(i)).collect();
    let mut judged = Vec::new();
    for i in 0..universe {
        if r.gen_bool(0.7) {
            judged.push(JudgedVideo {
                question: qid(0),
                video: vid(i),
                grade: RelevanceGrade::try_from(r.gen_range(0..=2u8)).unwrap(),
                answers: vec![],
            });
        }
    }
    RetrievalInstance { ranking, judged }
}

pub fn shuffle<T>(r: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = r.gen_range(0..=i);
        items.swap(i, j);
    }
}

fn grade_of(judged: &[JudgedVideo<f64>], v: &VideoId) -> u8 {
    judged
        .iter()
        .find(|j| &j.video == v)
        .map_or(0, |j| j.grade.value())
}

pub fn oracle_ap(ranking: &[VideoId], judged: &[JudgedVideo<f64>]) -> f64 {
    let total = judged.iter().filter(|j| j.grade.value() >= 1).count();
    if total == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..ranking.len() {
        if grade_of(judged, &ranking[i]) >= 1 {
            let relevant_through_i = (0..=i)
                .filter(|&t| grade_of(judged, &ranking[t]) >= 1)
                .count();
            sum += relevant_through_i as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn oracle_relevant_in_top(ranking: &[VideoId], judged: &[JudgedVideo<f64>], k: usize) -> usize {
    ranking
        .iter()
        .take(k)
        .filter(|v| grade_of(judged, v) >= 1)
        .count()
}

pub fn oracle_precision(ranking: &[VideoId], judged: &[JudgedVideo<f64>], k: usize) -> f64 {
    oracle_relevant_in_top(ranking, judged, k) as f64 / k as f64
}

pub fn oracle_recall(ranking: &[VideoId], judged: &[JudgedVideo<f64>], k: usize) -> f64 {
    let total = judged.iter().filter(|j| j.grade.value() >= 1).count();
    if total == 0 {
        0.0
    } else {
        oracle_relevant_in_top(ranking, judged, k) as f64 / total as f64
    }
}

fn dcg_of(gains: &[u8]) -> f64 {
    gains
        .iter()
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Ideal DCG as the maximum over every ordering of the judged grades.
pub fn oracle_ndcg(ranking: &[VideoId], judged: &[JudgedVideo<f64>]) -> f64 {
    let actual = dcg_of(
        &ranking
            .iter()
            .map(|v| grade_of(judged, v))
            .collect::<Vec<_>>(),
    );
    let positive: Vec<u8> = judged
        .iter()
        .map(|j| j.grade.value())
        .filter(|&g| g > 0)
        .collect();
    let ideal = permutations(&positive)
        .iter()
        .map(|p| dcg_of(p))
        .fold(0.0, f64::max);
    if ideal == 0.0 {
        0.0
    } else {
        actual / ideal
    }
}

// ------------------------------------------------------------------ intervals

/// Integer-endpoint interval in half-second units, returned in seconds.
pub fn half_second_interval(r: &mut ChaCha8Rng, max: u32) -> (u32, u32) {
    let a = r.gen_range(0..max);
    let b = r.gen_range(a..=max);
    (a, b)
}

pub fn to_interval((a, b): (u32, u32)) -> TimeInterval<f64> {
    TimeInterval::new(a as f64 / 2.0, b as f64 / 2.0).unwrap()
}

/// IoU by counting half-second cells covered by both / either interval.
pub fn oracle_iou(a: (u32, u32), b: (u32, u32)) -> f64 {
    let hi = a.1.max(b.1);
    let mut both = 0u32;
    let mut either = 0u32;
    for cell in 0..hi {
        let in_a = cell >= a.0 && cell < a.1;
        let in_b = cell >= b.0 && cell < b.1;
        both += u32::from(in_a && in_b);
        either += u32::from(in_a || in_b);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// Random localization fixture: questions, judged videos with answers (in
/// half-second cells), and ranked candidates. Intervals are kept in cell
/// units for the oracle.
/// Half-second cell span `(start, end)`.
pub type Cells = (u32, u32);

pub struct LocalizationInstance {
    pub run: LocalizationRun<f64>,
    pub qrels: Qrels<f64>,
    /// Per question: candidates as (video, cells) in rank order.
    pub candidates: BTreeMap<QuestionId, Vec<(usize, Cells)>>,
    /// Per question: (video, grade, answers in cells).
    pub judgments: BTreeMap<QuestionId, Vec<(usize, u8, Vec<Cells>)>>,
}

pub fn localization_instance(r: &mut ChaCha8Rng) -> LocalizationInstance {
    let questions = r.gen_range(1..=4);
    let mut qrels = Qrels::default();
    let mut cands = Vec::new();
    let mut candidates = BTreeMap::new();
    let mut judgments = BTreeMap::new();
    for q in 0..questions {
        let question = qid(q);
        let videos = r.gen_range(1..=4);
        let mut judged = Vec::new();
        let mut raw_judged = Vec::new();
        for v in 0..videos {
            if !r.gen_bool(0.8) {
                continue;
            }
            let grade = r.gen_range(0..=2u8);
            let answers: Vec<(u32, u32)> = if grade == 0 {
                vec![]
            } else {
                (0..r.gen_range(0..=2))
                    .map(|_| half_second_interval(r, 40))
                    .collect()
            };
            judged.push(JudgedVideo {
                question: question.clone(),
                video: vid(v),
                grade: RelevanceGrade::try_from(grade).unwrap(),
                answers: answers.iter().map(|&c| to_interval(c)).collect(),
            });
            raw_judged.push((v, grade, answers));
        }
        qrels.by_question.insert(question.clone(), judged);
        judgments.insert(question.clone(), raw_judged);
        if r.gen_bool(0.85) {
            let n = r.gen_range(1..=8);
            let mut raw = Vec::new();
            for rank in 1..=n {
                let v = r.gen_range(0..=videos);
                let cells = half_second_interval(r, 40);
                cands.push(LocalizationCandidate {
                    question: question.clone(),
                    video: vid(v),
                    interval: to_interval(cells),
                    score: (100 - rank) as f64,
                    rank: rank as u32,
                });
                raw.push((v, cells));
            }
            candidates.insert(question.clone(), raw);
        }
    }
    LocalizationInstance {
        run: LocalizationRun::from_candidates(cands).unwrap(),
        qrels,
        candidates,
        judgments,
    }
}

/// Best grid IoU within the first `n` candidates, gated on positive grade.
pub fn oracle_question_iou(inst: &LocalizationInstance, q: &QuestionId, n: usize) -> f64 {
    let mut best = 0.0f64;
    let Some(cands) = inst.candidates.get(q) else {
        return 0.0;
    };
    for &(v, cells) in cands.iter().take(n) {
        for (jv, grade, answers) in &inst.judgments[q] {
            if *jv == v && *grade >= 1 {
                for &a in answers {
                    best = best.max(oracle_iou(cells, a));
                }
            }
        }
    }
    best
}

pub fn oracle_mean_iou(inst: &LocalizationInstance, n: usize) -> f64 {
    let qs: Vec<&QuestionId> = inst.judgments.keys().collect();
    qs.iter()
        .map(|q| oracle_question_iou(inst, q, n))
        .sum::<f64>()
        / qs.len() as f64
}

pub fn oracle_recall_iou(inst: &LocalizationInstance, n: usize, mu: f64) -> f64 {
    let qs: Vec<&QuestionId> = inst.judgments.keys().collect();
    let hits = qs
        .iter()
        .filter(|q| oracle_question_iou(inst, q, n) >= mu)
        .count();
    100.0 * hits as f64 / qs.len() as f64
}

// ----------------------------------------------------------------------- text

pub const VOCAB: [&str; 5] = ["tie", "the", "arm", "board", "wrap"];

pub fn random_words(r: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
    let len = r.gen_range(min..=max);
    (0..len)
        .map(|_| VOCAB[r.gen_range(0..VOCAB.len())].to_string())
        .collect()
}

/// Longest common subsequence by testing every subsequence of `a`.
pub fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&String> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &a[i])
            .collect();
        if picked.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if picked.iter().all(|p| it.any(|x| x == *p)) {
            best = picked.len();
        }
    }
    best
}

pub fn oracle_rouge_f(pred: &[String], reference: &[String]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = oracle_lcs(pred, reference) as f64;
    let p = lcs / pred.len() as f64;
    let r = lcs / reference.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn occurrences(tokens: &[String], gram: &[String]) -> usize {
    if tokens.len() < gram.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| tokens[i..i + gram.len()] == *gram)
        .count()
}

/// Corpus BLEU from per-position n-gram scans.
pub fn oracle_bleu(pairs: &[(Vec<String>, Vec<String>)], max_order: usize) -> f64 {
    let c: usize = pairs.iter().map(|(p, _)| p.len()).sum();
    let r: usize = pairs.iter().map(|(_, x)| x.len()).sum();
    if c == 0 {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=max_order {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (p, reference) in pairs {
            if p.len() < n {
                continue;
            }
            for i in 0..=p.len() - n {
                let gram = &p[i..i + n];
                total += 1;
                // Clipping: the j-th occurrence of a gram (in pred order)
                // matches only if the reference has at least j copies.
                let earlier = (0..i).filter(|&t| p[t..t + n] == *gram).count();
                if earlier < occurrences(reference, gram) {
                    matched += 1;
                }
            }
        }
        if matched == 0 {
            return 0.0;
        }
        product *= matched as f64 / total as f64;
    }
    let bp = if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    product.powf(1.0 / max_order as f64) * bp
}

/// (matches, chunks) by enumerating every one-to-one exact matching.
pub fn oracle_meteor_alignment(pred: &[String], reference: &[String]) -> (usize, usize) {
    fn go(
        i: usize,
        pred: &[String],
        reference: &[String],
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == pred.len() {
            let m = current.len();
            let chunks = if m == 0 {
                0
            } else {
                1 + current
                    .windows(2)
                    .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
                    .count()
            };
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        go(i + 1, pred, reference, used, current, best);
        for j in 0..reference.len() {
            if !used[j] && reference[j] == pred[i] {
                used[j] = true;
                current.push((i, j));
                go(i + 1, pred, reference, used, current, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0);
    go(
        0,
        pred,
        reference,
        &mut vec![false; reference.len()],
        &mut Vec::new(),
        &mut best,
    );
    best
}

pub fn oracle_meteor(pred: &[String], reference: &[String]) -> f64 {
    let (m, chunks) = oracle_meteor_alignment(pred, reference);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / pred.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    f_mean * (1.0 - penalty)
}

// ----------------------------------------------------------------------- bm25

/// Scores every document from raw token lists and sorts them.
pub fn oracle_bm25_ranking(
    docs: &[(VideoId, Vec<String>)],
    query: &[String],
    k1: f64,
    b: f64,
) -> Vec<(VideoId, f64)> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let mut scored: Vec<(VideoId, f64)> = docs
        .iter()
        .map(|(v, tokens)| {
            let mut score = 0.0;
            for term in query {
                let tf = tokens.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|(_, t)| t.contains(term)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let norm = 1.0 - b + b * tokens.len() as f64 / avg;
                score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
            (v.clone(), score)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

// ------------------------------------------------------------------ alignment

/// Step-by-step greedy matcher using -1 sentinels: each prediction scans gold
/// steps from the pointer, and the pointer moves past the matched step.
pub fn simulate_alignment(
    scores: &[Vec<f64>],
    gold: usize,
    theta: f64,
) -> (usize, usize, usize, Vec<(usize, usize)>) {
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut g_index: usize = 0;
    let mut matched = Vec::new();
    for (p, row) in scores.iter().enumerate() {
        let mut best_score: f64 = -1.0;
        let mut best_g_index: isize = -1;
        let mut scan = g_index;
        while scan < gold {
            let score = row[scan];
            if score > best_score && score >= theta {
                best_score = score;
                best_g_index = scan as isize;
            }
            scan += 1;
        }
        if best_g_index != -1 {
            tp += 1;
            matched.push((p, best_g_index as usize));
            g_index = best_g_index as usize + 1;
        } else {
            fp += 1;
        }
    }
    let fn_ = gold - tp;
    (tp, fp, fn_, matched)
}
