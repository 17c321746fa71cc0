//! Detection evaluation: greedy one-to-one matching of predicted word
//! regions to ground truth at an IoU threshold, precision/recall/F1, and
//! per-ground-truth IoU histograms.

use serde::Serialize;
use thiserror::Error;

use crate::docmodel::Word;
use crate::geometry::{iou, quad_area};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One-to-one assignment of predictions to ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct MatchSet {
    /// (gt word id, predicted word id, iou), in assignment order.
    pub pairs: Vec<(String, String, f64)>,
    pub unmatched_gt: Vec<String>,
    pub unmatched_pred: Vec<String>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IoUHistogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub total: usize,
}

/// Greedy one-to-one matching by descending IoU among all pairs with
/// iou >= theta. Ties break on lower gt order index, then larger gt area,
/// then lexicographic (gt id, pred id), making the assignment deterministic.
pub fn match_words(gt: &[Word], pred: &[Word], theta: f64) -> Result<MatchSet, DetectError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(DetectError::InvalidArgument(format!(
            "theta must be in (0,1], got {theta}"
        )));
    }

    struct Candidate {
        gt_idx: usize,
        pred_idx: usize,
        iou: f64,
        gt_order: usize,
        gt_area: f64,
    }

    let mut candidates = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let v = iou(&g.quad, &p.quad);
            if v >= theta {
                candidates.push(Candidate {
                    gt_idx: gi,
                    pred_idx: pi,
                    iou: v,
                    gt_order: g.order.unwrap_or(usize::MAX),
                    gt_area: quad_area(&g.quad),
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap()
            .then(a.gt_order.cmp(&b.gt_order))
            .then(b.gt_area.partial_cmp(&a.gt_area).unwrap())
            .then(gt[a.gt_idx].id.cmp(&gt[b.gt_idx].id))
            .then(pred[a.pred_idx].id.cmp(&pred[b.pred_idx].id))
    });

    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if gt_used[c.gt_idx] || pred_used[c.pred_idx] {
            continue;
        }
        gt_used[c.gt_idx] = true;
        pred_used[c.pred_idx] = true;
        pairs.push((gt[c.gt_idx].id.clone(), pred[c.pred_idx].id.clone(), c.iou));
    }

    let unmatched_gt = gt
        .iter()
        .zip(&gt_used)
        .filter(|(_, &u)| !u)
        .map(|(w, _)| w.id.clone())
        .collect();
    let unmatched_pred = pred
        .iter()
        .zip(&pred_used)
        .filter(|(_, &u)| !u)
        .map(|(w, _)| w.id.clone())
        .collect();

    Ok(MatchSet { pairs, unmatched_gt, unmatched_pred, threshold: theta })
}

pub fn detection_metrics(m: &MatchSet) -> DetectionMetrics {
    let tp = m.pairs.len();
    let fp = m.unmatched_pred.len();
    let fn_ = m.unmatched_gt.len();
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DetectionMetrics { tp, fp, fn_, precision, recall, f1 }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Histogram of the max IoU each ground-truth word attains over all
/// predictions (0.0 when nothing overlaps). Bins are half-open
/// [k*bw, (k+1)*bw); the top bin is closed so 1.0 lands in it.
pub fn iou_histogram(gt: &[Word], pred: &[Word], bin_width: f64) -> Result<IoUHistogram, DetectError> {
    let bins = (1.0 / bin_width).round();
    if bin_width <= 0.0 || (bins * bin_width - 1.0).abs() > 1e-9 {
        return Err(DetectError::InvalidArgument(format!(
            "bin width {bin_width} must divide 1.0 into an integer bin count"
        )));
    }
    let n_bins = bins as usize;
    let mut counts = vec![0usize; n_bins];
    for g in gt {
        let max_iou = pred
            .iter()
            .map(|p| iou(&g.quad, &p.quad))
            .fold(0.0f64, f64::max);
        let bin = ((max_iou / bin_width).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(IoUHistogram { bin_width, counts, total: gt.len() })
}

/// Merges per-page histograms with identical binning.
pub fn merge_histograms(hists: &[IoUHistogram]) -> Option<IoUHistogram> {
    let first = hists.first()?;
    let mut counts = vec![0usize; first.counts.len()];
    let mut total = 0;
    for h in hists {
        debug_assert_eq!(h.counts.len(), counts.len());
        for (c, &v) in counts.iter_mut().zip(&h.counts) {
            *c += v;
        }
        total += h.total;
    }
    Some(IoUHistogram { bin_width: first.bin_width, counts, total })
}
