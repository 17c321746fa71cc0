//! Character-level recognition evaluation: Levenshtein alignment, CER,
//! and classification of recognizer correction behaviour.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecogError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One step of an optimal edit alignment. Indices refer to Unicode scalar
/// positions: `a_idx` into the first string, `b_idx` into the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { a_idx: usize, b_idx: usize },
    Substitute { a_idx: usize, b_idx: usize },
    /// Character present in `a` but not in `b`.
    Delete { a_idx: usize },
    /// Character present in `b` but not in `a`; `a_gap` is the position in
    /// `a` before which it is inserted.
    Insert { a_gap: usize, b_idx: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditStats {
    pub distance: usize,
    pub ref_len: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub alignment: Vec<EditOp>,
}

/// Which of three recognizer behaviours a (written, intended, recognized)
/// triple exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionClass {
    /// Recognized exactly what was written, errors preserved.
    Faithful,
    /// Silently normalized the misspelling to the intended word.
    OverCorrected,
    /// Output matches neither the written nor the intended form.
    Divergent,
}

/// Unit-cost Levenshtein distance over Unicode scalar values, with one
/// optimal alignment recovered for highlight placement. Ties in the DP
/// backtrace prefer diagonal steps (match/substitute), then deletion.
pub fn levenshtein(a: &str, b: &str) -> EditStats {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let (n, m) = (ac.len(), bc.len());

    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        dp[i][0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(ac[i - 1] != bc[j - 1]);
            dp[i][j] = (dp[i - 1][j - 1] + cost)
                .min(dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(ac[i - 1] != bc[j - 1]);
            if dp[i][j] == dp[i - 1][j - 1] + cost {
                ops.push(if cost == 0 {
                    EditOp::Match { a_idx: i - 1, b_idx: j - 1 }
                } else {
                    EditOp::Substitute { a_idx: i - 1, b_idx: j - 1 }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            ops.push(EditOp::Delete { a_idx: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { a_gap: i, b_idx: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();

    let mut stats = EditStats {
        distance: dp[n][m],
        ref_len: n,
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        alignment: ops,
    };
    for op in &stats.alignment {
        match op {
            EditOp::Substitute { .. } => stats.substitutions += 1,
            EditOp::Insert { .. } => stats.insertions += 1,
            EditOp::Delete { .. } => stats.deletions += 1,
            EditOp::Match { .. } => {}
        }
    }
    debug_assert_eq!(
        stats.distance,
        stats.substitutions + stats.insertions + stats.deletions
    );
    stats
}

/// Distance-only variant without alignment recovery, for hot loops like
/// lexicon search. Bails out early when the distance exceeds `cap`.
pub fn levenshtein_distance_capped(a: &str, b: &str, cap: usize) -> Option<usize> {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    if ac.len().abs_diff(bc.len()) > cap {
        return None;
    }
    let m = bc.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for (i, &a_ch) in ac.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for j in 1..=m {
            let cost = usize::from(a_ch != bc[j - 1]);
            cur[j] = (prev[j - 1] + cost).min(prev[j] + 1).min(cur[j - 1] + 1);
            row_min = row_min.min(cur[j]);
        }
        if row_min > cap {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[m] <= cap).then_some(prev[m])
}

/// Character error rate: edit distance divided by reference length. Can
/// exceed 1.0 for long spurious hypotheses.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, RecogError> {
    if reference.is_empty() {
        return Err(RecogError::InvalidArgument("empty reference".into()));
    }
    let stats = levenshtein(reference, hypothesis);
    Ok(stats.distance as f64 / stats.ref_len as f64)
}

/// Micro-averaged corpus CER over matched pairs: total edits over total
/// reference characters. `None` when there is nothing to measure.
pub fn corpus_cer<'a, I>(matched_pairs: I) -> Option<f64>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut edits = 0usize;
    let mut ref_chars = 0usize;
    for (gt, pred) in matched_pairs {
        let stats = levenshtein(gt, pred);
        edits += stats.distance;
        ref_chars += stats.ref_len;
    }
    (ref_chars > 0).then(|| edits as f64 / ref_chars as f64)
}

/// Macro-averaged corpus CER: mean of per-pair CERs, skipping pairs with
/// an empty reference.
pub fn corpus_cer_macro<'a, I>(matched_pairs: I) -> Option<f64>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (gt, pred) in matched_pairs {
        if let Ok(v) = cer(gt, pred) {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Classifies recognizer output against what the writer actually put on
/// paper and what they intended. Comparison is case-insensitive.
pub fn classify_recognition(written: &str, intended: &str, recognized: &str) -> CorrectionClass {
    let norm = |s: &str| s.to_lowercase();
    let (w, i, r) = (norm(written), norm(intended), norm(recognized));
    if r == w {
        CorrectionClass::Faithful
    } else if r == i {
        CorrectionClass::OverCorrected
    } else {
        CorrectionClass::Divergent
    }
}
