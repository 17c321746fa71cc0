//! Corpus-level evaluation, aggregation, and report emission: detection,
//! ordering and recognition tables, IoU histogram data, and per-page
//! ordered-text dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::detect::{
    detection_metrics, iou_histogram, match_words, merge_histograms, DetectionMetrics,
    IoUHistogram, MatchSet,
};
use crate::docmodel::{Corpus, Page};
use crate::ordering::{ordering_eval, OrderingError, OrderingMetrics};
use crate::recog::corpus_cer;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("ordering protocol error: {0}")]
    Protocol(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Detect,
    Order,
    Recog,
    All,
}

impl EvalKind {
    fn wants_order(self) -> bool {
        matches!(self, EvalKind::Order | EvalKind::All)
    }
    fn wants_recog(self) -> bool {
        matches!(self, EvalKind::Recog | EvalKind::All)
    }
}

/// Evaluation record for a single page.
#[derive(Debug, Clone, Serialize)]
pub struct PageEval {
    pub page_id: String,
    pub detection: DetectionMetrics,
    pub histogram: IoUHistogram,
    pub ordering: Option<OrderingMetrics>,
    /// Micro CER over this page's matched pairs; `None` when no matches.
    pub cer: Option<f64>,
    pub matches: MatchSet,
    /// Matched ground-truth texts in predicted order (the
    /// ground-truth-substitution protocol's hypothesis).
    pub ordered_text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusTables {
    pub detection: DetectionMetrics,
    pub mean_nsfd: Option<f64>,
    pub mean_bleu: Option<f64>,
    /// Micro-averaged CER over all matched pairs in the corpus.
    pub cer_micro: Option<f64>,
    /// Macro-averaged (per-pair mean) CER, emitted for comparison.
    pub cer_macro: Option<f64>,
    pub histogram: Option<IoUHistogram>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub header: Vec<String>,
    pub corpus: CorpusTables,
    pub pages: Vec<PageEval>,
    pub warnings: Vec<String>,
}

fn eval_page(
    gt_page: &Page,
    pred_page: Option<&Page>,
    kind: EvalKind,
    cfg: &RunConfig,
) -> Result<PageEval, ReportError> {
    static EMPTY: &[crate::docmodel::Word] = &[];
    let pred_words = pred_page.map_or(EMPTY, |p| p.words.as_slice());
    let matches = match_words(&gt_page.words, pred_words, cfg.iou_threshold)
        .map_err(|e| ReportError::Eval(e.to_string()))?;
    let detection = detection_metrics(&matches);
    let histogram = iou_histogram(&gt_page.words, pred_words, cfg.histogram_bin_width)
        .map_err(|e| ReportError::Eval(e.to_string()))?;

    let ordering = if kind.wants_order() {
        let empty_page = Page {
            page_id: gt_page.page_id.clone(),
            width: gt_page.width,
            height: gt_page.height,
            image_ref: None,
            words: Vec::new(),
        };
        let pp = pred_page.unwrap_or(&empty_page);
        match ordering_eval(gt_page, pp, &matches, cfg.bleu_max_n) {
            Ok(m) => Some(m),
            Err(OrderingError::Protocol(msg)) => return Err(ReportError::Protocol(msg)),
            Err(e) => return Err(ReportError::Eval(e.to_string())),
        }
    } else {
        None
    };

    let cer = if kind.wants_recog() {
        let pairs: Vec<(&str, &str)> = matches
            .pairs
            .iter()
            .filter_map(|(gid, pid, _)| {
                let gt = gt_page.word(gid)?;
                let pred = pred_page?.word(pid)?;
                Some((gt.text.as_str(), pred.text.as_str()))
            })
            .collect();
        corpus_cer(pairs)
    } else {
        None
    };

    let ordered_text = substituted_text(gt_page, pred_page, &matches);

    Ok(PageEval {
        page_id: gt_page.page_id.clone(),
        detection,
        histogram,
        ordering,
        cer,
        matches,
        ordered_text,
    })
}

/// Matched ground-truth texts arranged in the prediction's order.
fn substituted_text(gt_page: &Page, pred_page: Option<&Page>, matches: &MatchSet) -> String {
    let Some(pred_page) = pred_page else {
        return String::new();
    };
    let pred_pos = |pid: &str| {
        pred_page
            .words
            .iter()
            .position(|w| w.id == pid)
            .map(|i| pred_page.words[i].order.unwrap_or(i))
            .unwrap_or(usize::MAX)
    };
    let mut pairs: Vec<(usize, &str)> = matches
        .pairs
        .iter()
        .filter_map(|(gid, pid, _)| {
            Some((pred_pos(pid), gt_page.word(gid)?.text.as_str()))
        })
        .collect();
    pairs.sort();
    pairs
        .into_iter()
        .map(|(_, t)| t)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Evaluates a prediction corpus against ground truth. Pages are paired by
/// id; a ground-truth page without predictions counts everything as
/// missed. Evaluation runs page-parallel; aggregation is associative.
pub fn evaluate(
    gt: &Corpus,
    pred: &Corpus,
    kind: EvalKind,
    cfg: &RunConfig,
) -> Result<ReportBundle, ReportError> {
    let mut warnings: Vec<String> = Vec::new();
    for page in &gt.pages {
        if pred.page(&page.page_id).is_none() {
            warnings.push(format!("no predictions for page {:?}", page.page_id));
        }
    }
    for page in &pred.pages {
        if gt.page(&page.page_id).is_none() {
            warnings.push(format!("prediction page {:?} has no ground truth, ignored", page.page_id));
        }
    }

    let run = || -> Result<Vec<PageEval>, ReportError> {
        gt.pages
            .par_iter()
            .map(|p| eval_page(p, pred.page(&p.page_id), kind, cfg))
            .collect()
    };
    let pages = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| ReportError::Eval(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };

    let tp: usize = pages.iter().map(|p| p.detection.tp).sum();
    let fp: usize = pages.iter().map(|p| p.detection.fp).sum();
    let fn_: usize = pages.iter().map(|p| p.detection.fn_).sum();
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let detection = DetectionMetrics { tp, fp, fn_, precision, recall, f1 };

    let ordered: Vec<&OrderingMetrics> = pages.iter().filter_map(|p| p.ordering.as_ref()).collect();
    let mean_nsfd = mean(ordered.iter().map(|m| m.nsfd));
    let mean_bleu = mean(ordered.iter().map(|m| m.bleu));

    let all_pairs: Vec<(String, String)> = pages
        .iter()
        .flat_map(|p| {
            let gt_page = gt.page(&p.page_id);
            let pred_page = pred.page(&p.page_id);
            p.matches.pairs.iter().filter_map(move |(gid, pid, _)| {
                Some((
                    gt_page?.word(gid)?.text.clone(),
                    pred_page?.word(pid)?.text.clone(),
                ))
            })
        })
        .collect();
    let (cer_micro, cer_macro) = if kind.wants_recog() {
        (
            corpus_cer(all_pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
            crate::recog::corpus_cer_macro(all_pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        )
    } else {
        (None, None)
    };

    let hists: Vec<IoUHistogram> = pages.iter().map(|p| p.histogram.clone()).collect();
    let histogram = merge_histograms(&hists);

    let mut header = cfg.header_lines();
    header.push("histogram_population=max_iou_per_ground_truth_word_including_zeros".into());
    header.push("cer_aggregation=micro".into());
    header.push("bleu_reference=full_page_text".into());

    Ok(ReportBundle {
        header,
        corpus: CorpusTables { detection, mean_nsfd, mean_bleu, cer_micro, cer_macro, histogram },
        pages,
        warnings,
    })
}

fn mean<I: Iterator<Item = f64>>(iter: I) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in iter {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn header_comment(bundle: &ReportBundle) -> String {
    bundle
        .header
        .iter()
        .map(|l| format!("# {l}\n"))
        .collect()
}

pub fn detection_csv(bundle: &ReportBundle) -> String {
    let mut out = header_comment(bundle);
    out.push_str("scope,tp,fp,fn,precision,recall,f1\n");
    let d = &bundle.corpus.detection;
    let _ = writeln!(
        out,
        "corpus,{},{},{},{:.6},{:.6},{:.6}",
        d.tp, d.fp, d.fn_, d.precision, d.recall, d.f1
    );
    for p in &bundle.pages {
        let d = &p.detection;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            p.page_id, d.tp, d.fp, d.fn_, d.precision, d.recall, d.f1
        );
    }
    out
}

pub fn ordering_csv(bundle: &ReportBundle) -> String {
    let mut out = header_comment(bundle);
    out.push_str("scope,nsfd,bleu,n_evaluated\n");
    if let (Some(n), Some(b)) = (bundle.corpus.mean_nsfd, bundle.corpus.mean_bleu) {
        let _ = writeln!(out, "corpus,{n:.6},{b:.6},");
    }
    for p in &bundle.pages {
        if let Some(m) = &p.ordering {
            let _ = writeln!(out, "{},{:.6},{:.6},{}", p.page_id, m.nsfd, m.bleu, m.n_evaluated);
        }
    }
    out
}

/// CER values as percentages with one decimal.
pub fn recognition_csv(bundle: &ReportBundle) -> String {
    let mut out = header_comment(bundle);
    out.push_str("scope,cer_percent\n");
    match bundle.corpus.cer_micro {
        Some(v) => {
            let _ = writeln!(out, "corpus,{:.1}", v * 100.0);
        }
        None => out.push_str("corpus,no data\n"),
    }
    for p in &bundle.pages {
        match p.cer {
            Some(v) => {
                let _ = writeln!(out, "{},{:.1}", p.page_id, v * 100.0);
            }
            None => {
                let _ = writeln!(out, "{},no data", p.page_id);
            }
        }
    }
    out
}

pub fn histogram_csv(bundle: &ReportBundle) -> String {
    let mut out = header_comment(bundle);
    out.push_str("bin_start,bin_end,count\n");
    if let Some(h) = &bundle.corpus.histogram {
        for (i, &c) in h.counts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.2},{:.2},{}",
                i as f64 * h.bin_width,
                (i + 1) as f64 * h.bin_width,
                c
            );
        }
    }
    out
}

/// Per-page side-by-side dump: recall, NSFD, BLEU, and the reconstructed
/// (ground-truth-substituted) text next to the original.
pub fn ordered_text_dump(bundle: &ReportBundle, gt: &Corpus) -> String {
    let mut out = header_comment(bundle);
    for p in &bundle.pages {
        let _ = writeln!(out, "== page {}", p.page_id);
        if let Some(page) = gt.page(&p.page_id) {
            let mut words: Vec<_> = page.words.iter().collect();
            if page.has_reading_order() && !words.is_empty() {
                words.sort_by_key(|w| w.order.unwrap());
            }
            let original: Vec<&str> = words.iter().map(|w| w.text.as_str()).collect();
            let _ = writeln!(out, "original: {}", original.join(" "));
        }
        let _ = writeln!(out, "recall: {:.3}", p.detection.recall);
        match &p.ordering {
            Some(m) => {
                let _ = writeln!(out, "nsfd: {:.3}", m.nsfd);
                let _ = writeln!(out, "bleu: {:.3}", m.bleu);
            }
            None => {
                out.push_str("nsfd: -\nbleu: -\n");
            }
        }
        let _ = writeln!(out, "text: {}", p.ordered_text);
        out.push('\n');
    }
    out
}

/// Writes the full bundle into `dir`: CSV tables, the JSON bundle, the
/// histogram data and the per-page text dumps.
pub fn write_reports(bundle: &ReportBundle, gt: &Corpus, dir: &Path) -> Result<(), ReportError> {
    let io_err = |path: &Path, e: std::io::Error| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let files: &[(&str, String)] = &[
        ("detection.csv", detection_csv(bundle)),
        ("ordering.csv", ordering_csv(bundle)),
        ("recognition.csv", recognition_csv(bundle)),
        ("histogram.csv", histogram_csv(bundle)),
        ("ordered_text.txt", ordered_text_dump(bundle, gt)),
        (
            "report.json",
            serde_json::to_string_pretty(bundle).expect("bundle serializes") + "\n",
        ),
    ];
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
