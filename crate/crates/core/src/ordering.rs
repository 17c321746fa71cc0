//! Heuristic reading order over word quads and ordering evaluation via
//! NSFD and BLEU under the ground-truth-substitution protocol.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::detect::MatchSet;
use crate::docmodel::{Page, Word};
use crate::geometry::enclosing_axis_box;

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A permutation of a page's word ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReadingOrder {
    pub sequence: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingMetrics {
    pub nsfd: f64,
    pub bleu: f64,
    pub n_evaluated: usize,
}

/// Default proximity factor for line grouping: a word joins the current
/// line while its y-center stays within `alpha * mean_height` of the
/// group's running mean.
pub const DEFAULT_LINE_ALPHA: f64 = 0.7;

/// Groups words into lines: scan by ascending y-center, start a new group
/// when a word's y-center drifts more than `alpha` times the mean box
/// height from the current group's running mean. Groups come back sorted
/// by mean y-center, each group sorted by ascending x-min.
pub fn line_groups(words: &[Word], alpha: f64) -> Vec<Vec<usize>> {
    if words.is_empty() {
        return Vec::new();
    }
    let boxes: Vec<_> = words.iter().map(|w| enclosing_axis_box(&w.quad)).collect();
    let mean_height = boxes.iter().map(|b| b.height()).sum::<f64>() / boxes.len() as f64;
    let tol = alpha * mean_height;

    let mut idx: Vec<usize> = (0..words.len()).collect();
    idx.sort_by(|&a, &b| {
        let ka = (boxes[a].center().y, boxes[a].x_min, &words[a].id);
        let kb = (boxes[b].center().y, boxes[b].x_min, &words[b].id);
        ka.partial_cmp(&kb).unwrap()
    });

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut mean_y = 0.0;
    for &i in &idx {
        let yc = boxes[i].center().y;
        match groups.last_mut() {
            Some(g) if (yc - mean_y).abs() <= tol => {
                g.push(i);
                let n = g.len() as f64;
                mean_y += (yc - mean_y) / n;
            }
            _ => {
                groups.push(vec![i]);
                mean_y = yc;
            }
        }
    }

    let group_mean = |g: &[usize]| {
        g.iter().map(|&i| boxes[i].center().y).sum::<f64>() / g.len() as f64
    };
    groups.sort_by(|a, b| group_mean(a).partial_cmp(&group_mean(b)).unwrap());
    for g in &mut groups {
        g.sort_by(|&a, &b| {
            (boxes[a].x_min, &words[a].id)
                .partial_cmp(&(boxes[b].x_min, &words[b].id))
                .unwrap()
        });
    }
    groups
}

/// Average-height line grouping followed by left-to-right sorting.
pub fn heuristic_reading_order(words: &[Word], alpha: f64) -> ReadingOrder {
    let sequence = line_groups(words, alpha)
        .into_iter()
        .flatten()
        .map(|i| words[i].id.clone())
        .collect();
    ReadingOrder { sequence }
}

/// Normalized Spearman's footrule distance between two permutations of the
/// same id set: sum of absolute rank differences over its maximum
/// floor(n^2 / 2). Zero for n <= 1.
pub fn nsfd(reference: &ReadingOrder, predicted: &ReadingOrder) -> Result<f64, OrderingError> {
    let n = reference.sequence.len();
    if predicted.sequence.len() != n {
        return Err(OrderingError::InvalidArgument(format!(
            "permutation sizes differ: {} vs {}",
            n,
            predicted.sequence.len()
        )));
    }
    let pos_ref: HashMap<&str, usize> = reference
        .sequence
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if pos_ref.len() != n {
        return Err(OrderingError::InvalidArgument("duplicate ids in reference".into()));
    }
    if n <= 1 {
        // Still verify the id sets agree.
        if let Some(id) = predicted.sequence.first() {
            if !pos_ref.contains_key(id.as_str()) {
                return Err(OrderingError::InvalidArgument(format!("id {id:?} not in reference")));
            }
        }
        return Ok(0.0);
    }
    let mut footrule = 0usize;
    let mut seen = vec![false; n];
    for (pi, id) in predicted.sequence.iter().enumerate() {
        let &ri = pos_ref
            .get(id.as_str())
            .ok_or_else(|| OrderingError::InvalidArgument(format!("id {id:?} not in reference")))?;
        if seen[ri] {
            return Err(OrderingError::InvalidArgument(format!("duplicate id {id:?} in prediction")));
        }
        seen[ri] = true;
        footrule += ri.abs_diff(pi);
    }
    Ok(footrule as f64 / ((n * n / 2) as f64))
}

/// BLEU over token sequences: geometric mean of modified n-gram precisions
/// for n = 1..min(max_n, |hyp|) with uniform weights, add-one smoothing on
/// zero match counts for n >= 2, and brevity penalty exp(1 - r/c) when the
/// hypothesis is shorter than the reference.
pub fn bleu(reference: &[String], hypothesis: &[String], max_n: usize) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let top_n = max_n.min(hypothesis.len()).max(1);
    let mut log_sum = 0.0;
    for n in 1..=top_n {
        let ref_counts = ngram_counts(reference, n);
        let hyp_counts = ngram_counts(hypothesis, n);
        let mut matched = 0usize;
        let mut total = 0usize;
        for (gram, &count) in &hyp_counts {
            total += count;
            matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        let (mut num, mut den) = (matched as f64, total as f64);
        if n >= 2 && matched == 0 {
            num += 1.0;
            den += 1.0;
        }
        if num == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln() / top_n as f64;
    }
    let c = hypothesis.len() as f64;
    let r = reference.len() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
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

/// Ordering evaluation under the ground-truth-substitution protocol:
/// NSFD over the matched subset (rank-compressed), BLEU between the
/// matched words in predicted order with texts replaced by their matched
/// ground truth and the full ground-truth token sequence, so missed
/// detections cost brevity penalty.
pub fn ordering_eval(
    gt_page: &Page,
    pred_page: &Page,
    matches: &MatchSet,
    bleu_max_n: usize,
) -> Result<OrderingMetrics, OrderingError> {
    if !gt_page.has_reading_order() {
        return Err(OrderingError::Protocol(format!(
            "page {:?} has no ground-truth reading order",
            gt_page.page_id
        )));
    }

    // gt id -> (gt order, gt text); pred id -> position in prediction order.
    let gt_info: HashMap<&str, (usize, &str)> = gt_page
        .words
        .iter()
        .map(|w| (w.id.as_str(), (w.order.unwrap(), w.text.as_str())))
        .collect();
    let pred_pos: HashMap<&str, usize> = prediction_positions(pred_page);

    // Matched pairs sorted two ways, then rank-compressed.
    let mut pairs: Vec<(&str, &str)> = Vec::with_capacity(matches.pairs.len());
    for (gid, pid, _) in &matches.pairs {
        if !gt_info.contains_key(gid.as_str()) {
            return Err(OrderingError::InvalidArgument(format!("unknown gt id {gid:?}")));
        }
        if !pred_pos.contains_key(pid.as_str()) {
            return Err(OrderingError::InvalidArgument(format!("unknown pred id {pid:?}")));
        }
        pairs.push((gid.as_str(), pid.as_str()));
    }

    let mut by_gt = pairs.clone();
    by_gt.sort_by_key(|(gid, _)| gt_info[gid].0);
    let reference = ReadingOrder {
        sequence: by_gt.iter().map(|(gid, _)| gid.to_string()).collect(),
    };

    let mut by_pred = pairs;
    by_pred.sort_by_key(|(_, pid)| pred_pos[pid]);
    let predicted = ReadingOrder {
        sequence: by_pred.iter().map(|(gid, _)| gid.to_string()).collect(),
    };

    let nsfd_value = nsfd(&reference, &predicted)?;

    // BLEU: hypothesis in predicted order with ground-truth substitution;
    // reference is the full page text in ground-truth order.
    let mut gt_sorted: Vec<&Word> = gt_page.words.iter().collect();
    gt_sorted.sort_by_key(|w| w.order.unwrap());
    let ref_tokens: Vec<String> = gt_sorted.iter().map(|w| w.text.clone()).collect();
    let hyp_tokens: Vec<String> = by_pred
        .iter()
        .map(|(gid, _)| gt_info[gid].1.to_string())
        .collect();
    let bleu_value = bleu(&ref_tokens, &hyp_tokens, bleu_max_n);

    Ok(OrderingMetrics {
        nsfd: nsfd_value,
        bleu: bleu_value,
        n_evaluated: reference.sequence.len(),
    })
}

/// Position of each predicted word in the prediction's own order: explicit
/// order indices when present, otherwise document order.
fn prediction_positions(pred_page: &Page) -> HashMap<&str, usize> {
    let explicit = pred_page.words.iter().all(|w| w.order.is_some());
    if explicit {
        pred_page
            .words
            .iter()
            .map(|w| (w.id.as_str(), w.order.unwrap()))
            .collect()
    } else {
        pred_page
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.id.as_str(), i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::match_words;
    use crate::geometry::AxisBox;

    fn word_at(id: &str, x: f64, yc: f64, order: Option<usize>) -> Word {
        Word {
            id: id.into(),
            quad: AxisBox::new(x, yc - 5.0, x + 25.0, yc + 5.0).unwrap().to_quad(),
            text: id.split('.').next().unwrap().into(),
            order,
            confidence: None,
        }
    }

    #[test]
    fn single_line_sorts_by_x() {
        let words = vec![
            word_at("b", 40.0, 10.0, None),
            word_at("a", 0.0, 10.0, None),
            word_at("c", 80.0, 10.0, None),
        ];
        let order = heuristic_reading_order(&words, DEFAULT_LINE_ALPHA);
        assert_eq!(order.sequence, vec!["a", "b", "c"]);
    }

    #[test]
    fn two_separated_lines() {
        let words = vec![
            word_at("b1", 0.0, 80.0, None),
            word_at("a1", 0.0, 10.0, None),
            word_at("b2", 40.0, 80.0, None),
            word_at("a2", 40.0, 10.0, None),
        ];
        let order = heuristic_reading_order(&words, DEFAULT_LINE_ALPHA);
        assert_eq!(order.sequence, vec!["a1", "a2", "b1", "b2"]);
    }

    /// Two converging slanted lines of "The quick brown fox jumps / over
    /// the lazy dog". Horizontal grouping merges them into the
    /// characteristic garbled sequence.
    pub fn skewed_fixture() -> Vec<Word> {
        let coords: &[(&str, f64, f64)] = &[
            ("The", 0.0, 50.0),
            ("quick", 30.0, 54.0),
            ("brown", 60.0, 58.0),
            ("fox", 90.0, 64.0),
            ("jumps", 120.0, 68.0),
            ("over", 10.0, 65.0),
            ("the", 40.0, 82.0),
            ("lazy", 70.0, 86.0),
            ("dog", 100.0, 74.0),
        ];
        coords
            .iter()
            .enumerate()
            .map(|(i, &(text, x, yc))| {
                let mut w = word_at(&format!("{text}.{i}"), x, yc, None);
                w.text = text.into();
                w
            })
            .collect()
    }

    pub fn unskewed_fixture() -> Vec<Word> {
        let coords: &[(&str, f64, f64)] = &[
            ("The", 0.0, 50.0),
            ("quick", 30.0, 50.0),
            ("brown", 60.0, 50.0),
            ("fox", 90.0, 50.0),
            ("jumps", 120.0, 50.0),
            ("over", 10.0, 80.0),
            ("the", 40.0, 80.0),
            ("lazy", 70.0, 80.0),
            ("dog", 100.0, 80.0),
        ];
        coords
            .iter()
            .enumerate()
            .map(|(i, &(text, x, yc))| {
                let mut w = word_at(&format!("{text}.{i}"), x, yc, None);
                w.text = text.into();
                w
            })
            .collect()
    }

    fn token_order(words: &[Word], alpha: f64) -> Vec<String> {
        let order = heuristic_reading_order(words, alpha);
        order
            .sequence
            .iter()
            .map(|id| {
                words
                    .iter()
                    .find(|w| &w.id == id)
                    .unwrap()
                    .text
                    .clone()
            })
            .collect()
    }

    #[test]
    fn skewed_lines_garble_the_sentence() {
        let tokens = token_order(&skewed_fixture(), DEFAULT_LINE_ALPHA);
        assert_eq!(
            tokens.join(" "),
            "The quick brown over fox jumps dog the lazy"
        );
    }

    #[test]
    fn straight_lines_read_correctly() {
        let tokens = token_order(&unskewed_fixture(), DEFAULT_LINE_ALPHA);
        assert_eq!(tokens.join(" "), "The quick brown fox jumps over the lazy dog");
    }

    #[test]
    fn order_is_translation_invariant() {
        let words = skewed_fixture();
        let shifted: Vec<Word> = words
            .iter()
            .map(|w| Word {
                quad: w.quad.translate(137.0, -42.5),
                ..w.clone()
            })
            .collect();
        assert_eq!(
            heuristic_reading_order(&words, DEFAULT_LINE_ALPHA),
            heuristic_reading_order(&shifted, DEFAULT_LINE_ALPHA)
        );
    }

    #[test]
    fn order_is_a_permutation() {
        let words = skewed_fixture();
        let mut ids: Vec<String> = heuristic_reading_order(&words, DEFAULT_LINE_ALPHA).sequence;
        ids.sort();
        let mut expect: Vec<String> = words.iter().map(|w| w.id.clone()).collect();
        expect.sort();
        assert_eq!(ids, expect);
    }

    fn perm(ids: &[&str]) -> ReadingOrder {
        ReadingOrder { sequence: ids.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn nsfd_identity() {
        let r = perm(&["a", "b", "c"]);
        assert_eq!(nsfd(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn nsfd_full_reversal_is_one() {
        let r = perm(&["a", "b", "c", "d"]);
        let p = perm(&["d", "c", "b", "a"]);
        assert_eq!(nsfd(&r, &p).unwrap(), 1.0);
    }

    #[test]
    fn nsfd_adjacent_swap() {
        let r = perm(&["a", "b", "c"]);
        let p = perm(&["b", "a", "c"]);
        // F = 2, max = floor(9/2) = 4.
        assert_eq!(nsfd(&r, &p).unwrap(), 0.5);
    }

    #[test]
    fn nsfd_symmetric() {
        let r = perm(&["a", "b", "c", "d", "e"]);
        let p = perm(&["c", "a", "e", "b", "d"]);
        assert_eq!(nsfd(&r, &p).unwrap(), nsfd(&p, &r).unwrap());
    }

    #[test]
    fn nsfd_mismatched_sets_rejected() {
        let r = perm(&["a", "b"]);
        let p = perm(&["a", "x"]);
        assert!(nsfd(&r, &p).is_err());
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn bleu_identity() {
        let t = toks("the quick brown fox jumps");
        assert!((bleu(&t, &t, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_empty_hypothesis() {
        assert_eq!(bleu(&toks("a b"), &[], 4), 0.0);
    }

    #[test]
    fn bleu_transposition() {
        // ref "a b c d", hyp "a b d c": frozen from the brute-force n-gram
        // oracle in tests/oracles.rs: p1=1, p2=1/3, p3=(0+1)/(2+1),
        // p4=(0+1)/(1+1), bp=1 => (1 * 1/3 * 1/3 * 1/2)^(1/4).
        let v = bleu(&toks("a b c d"), &toks("a b d c"), 4);
        let expect = (1.0f64 * (1.0 / 3.0) * (1.0 / 3.0) * 0.5).powf(0.25);
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn bleu_brevity_penalty() {
        let r = toks("a b c d");
        let h = toks("a b");
        // p1 = 1, p2 = 1, bp = exp(1 - 4/2).
        let expect = (1.0f64 - 2.0).exp();
        assert!((bleu(&r, &h, 4) - expect).abs() < 1e-12);
    }

    fn page_from(words: Vec<Word>, id: &str) -> Page {
        Page {
            page_id: id.into(),
            width: 1000,
            height: 1000,
            image_ref: None,
            words,
        }
    }

    #[test]
    fn ordering_eval_identity() {
        let mut words = unskewed_fixture();
        for (i, w) in words.iter_mut().enumerate() {
            w.order = Some(i);
        }
        let gt = page_from(words.clone(), "p");
        let pred = page_from(words, "p");
        let m = match_words(&gt.words, &pred.words, 0.5).unwrap();
        let om = ordering_eval(&gt, &pred, &m, 4).unwrap();
        assert_eq!(om.nsfd, 0.0);
        assert!((om.bleu - 1.0).abs() < 1e-12);
        assert_eq!(om.n_evaluated, 9);
    }

    #[test]
    fn ordering_eval_swap() {
        // Perfect detection on 3 words, first two swapped in prediction order.
        let mk = |id: &str, x: f64, order| word_at(id, x, 10.0, order);
        let gt = page_from(
            vec![mk("a", 0.0, Some(0)), mk("b", 40.0, Some(1)), mk("c", 80.0, Some(2))],
            "p",
        );
        let pred = page_from(
            vec![mk("pb", 40.0, Some(0)), mk("pa", 0.0, Some(1)), mk("pc", 80.0, Some(2))],
            "p",
        );
        let m = match_words(&gt.words, &pred.words, 0.5).unwrap();
        let om = ordering_eval(&gt, &pred, &m, 4).unwrap();
        assert_eq!(om.nsfd, 0.5);
    }

    #[test]
    fn ordering_eval_missed_words_cost_brevity() {
        // Half the words missed, matched subset in correct relative order.
        let mk = |id: &str, x: f64, order| word_at(id, x, 10.0, order);
        let gt = page_from(
            vec![
                mk("a", 0.0, Some(0)),
                mk("b", 40.0, Some(1)),
                mk("c", 80.0, Some(2)),
                mk("d", 120.0, Some(3)),
            ],
            "p",
        );
        let pred = page_from(vec![mk("pa", 0.0, Some(0)), mk("pb", 40.0, Some(1))], "p");
        let m = match_words(&gt.words, &pred.words, 0.5).unwrap();
        let om = ordering_eval(&gt, &pred, &m, 4).unwrap();
        assert_eq!(om.nsfd, 0.0);
        assert!(om.bleu < 1.0);
        assert!((om.bleu - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn ordering_eval_requires_gt_order() {
        let words = unskewed_fixture();
        let gt = page_from(words.clone(), "p");
        let pred = page_from(words, "p");
        let m = match_words(&gt.words, &pred.words, 0.5).unwrap();
        assert!(matches!(
            ordering_eval(&gt, &pred, &m, 4),
            Err(OrderingError::Protocol(_))
        ));
    }
}
