//! Lexicon-based error detection (spelling, merged words, split
//! compounds), character highlight alignment, gap-aware annotation
//! placement, and deterministic SVG rendering.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::docmodel::Page;
use crate::geometry::{enclosing_axis_box, AxisBox, Point2};
use crate::ordering::{heuristic_reading_order, line_groups, ReadingOrder};
use crate::recog::{levenshtein, levenshtein_distance_capped, EditOp};

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("unknown word id {0:?}")]
    UnknownWordId(String),
}

/// Set of known word forms, lowercase NFC, with optional frequencies.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, u64>,
}

impl Lexicon {
    pub fn contains(&self, form: &str) -> bool {
        self.entries.contains_key(form)
    }

    pub fn frequency(&self, form: &str) -> u64 {
        self.entries.get(form).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Loads a lexicon from UTF-8 text, one entry per line with an optional
/// tab-separated frequency. Duplicates keep the highest frequency.
pub fn load_lexicon(bytes: &[u8]) -> Result<(Lexicon, Vec<String>), FeedbackError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FeedbackError::InvalidLexicon(format!("not UTF-8: {e}")))?;
    let mut entries: HashMap<String, u64> = HashMap::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (form, freq) = match line.split_once('\t') {
            Some((form, freq_str)) => match freq_str.trim().parse::<u64>() {
                Ok(f) => (form, f),
                Err(_) => {
                    warnings.push(format!(
                        "line {}: malformed frequency {:?}, entry kept without it",
                        i + 1,
                        freq_str
                    ));
                    (form, 0)
                }
            },
            None => (line, 0),
        };
        let form = crate::docmodel::normalize_text(form).to_lowercase();
        if form.is_empty() {
            continue;
        }
        let slot = entries.entry(form).or_insert(0);
        *slot = (*slot).max(freq);
    }
    if entries.is_empty() {
        return Err(FeedbackError::InvalidLexicon("no entries".into()));
    }
    Ok((Lexicon { entries }, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Spelling,
    MergedWords,
    SplitCompound,
}

/// A detected writing error with its suggestion and the character indices
/// of the original text that participate in the correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorFlag {
    /// One word id for spelling/merged, two adjacent ids for a split compound.
    pub word_ids: Vec<String>,
    pub kind: ErrorKind,
    /// `None` marks an out-of-lexicon token with no candidate in range.
    pub suggestion: Option<String>,
    pub highlights: BTreeSet<usize>,
}

/// Strips leading and trailing punctuation and records how many leading
/// characters were removed, so highlight indices can be mapped back.
fn strip_token(token: &str) -> (String, usize) {
    let chars: Vec<char> = token.chars().collect();
    let start = chars
        .iter()
        .position(|c| c.is_alphanumeric())
        .unwrap_or(chars.len());
    let end = chars
        .iter()
        .rposition(|c| c.is_alphanumeric())
        .map_or(start, |e| e + 1);
    (chars[start..end].iter().collect(), start)
}

/// Checks one token against the lexicon. In-lexicon tokens and tokens
/// containing digits produce no flag; otherwise the nearest entry within
/// `max_edit` becomes the suggestion (ties: higher frequency, then
/// lexicographic), and highlights are derived from the edit alignment.
pub fn check_spelling(
    word_id: &str,
    token: &str,
    lex: &Lexicon,
    max_edit: usize,
) -> Option<ErrorFlag> {
    let (core, offset) = strip_token(token);
    if core.is_empty() || core.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let lookup = core.to_lowercase();
    if lex.contains(&lookup) {
        return None;
    }

    let mut best: Option<(usize, u64, &str)> = None;
    for form in lex.forms() {
        if let Some(d) = levenshtein_distance_capped(&lookup, form, max_edit) {
            let freq = lex.frequency(form);
            let better = match &best {
                None => true,
                Some((bd, bf, bform)) => {
                    (d, std::cmp::Reverse(freq), form) < (*bd, std::cmp::Reverse(*bf), *bform)
                }
            };
            if better {
                best = Some((d, freq, form));
            }
        }
    }

    match best {
        Some((_, _, suggestion)) => {
            let highlights = char_highlights(&lookup, suggestion)
                .into_iter()
                .map(|i| i + offset)
                .collect();
            Some(ErrorFlag {
                word_ids: vec![word_id.to_string()],
                kind: ErrorKind::Spelling,
                suggestion: Some(suggestion.to_string()),
                highlights,
            })
        }
        None => Some(ErrorFlag {
            word_ids: vec![word_id.to_string()],
            kind: ErrorKind::Spelling,
            suggestion: None,
            highlights: BTreeSet::new(),
        }),
    }
}

/// Scans tokens in reading order for segmentation errors.
///
/// Merged words: a single out-of-lexicon token splittable into two lexicon
/// entries (preferring the split with the highest summed frequency).
/// Split compound: two adjacent tokens whose concatenation is a lexicon
/// entry while at least one of the tokens alone is not.
pub fn detect_segmentation_errors(
    ordered_tokens: &[(String, String)],
    lex: &Lexicon,
) -> Vec<ErrorFlag> {
    let mut flags = Vec::new();

    for (id, token) in ordered_tokens {
        let (core, _) = strip_token(token);
        if core.is_empty() || core.chars().any(|c| c.is_ascii_digit()) {
            continue;
        }
        let lookup = core.to_lowercase();
        if lex.contains(&lookup) {
            continue;
        }
        let chars: Vec<char> = lookup.chars().collect();
        let mut best: Option<(u64, usize, String, String)> = None;
        for split in 1..chars.len() {
            let left: String = chars[..split].iter().collect();
            let right: String = chars[split..].iter().collect();
            if lex.contains(&left) && lex.contains(&right) {
                let score = lex.frequency(&left) + lex.frequency(&right);
                let better = match &best {
                    None => true,
                    Some((bs, bsplit, _, _)) => score > *bs || (score == *bs && split < *bsplit),
                };
                if better {
                    best = Some((score, split, left, right));
                }
            }
        }
        if let Some((_, _, left, right)) = best {
            flags.push(ErrorFlag {
                word_ids: vec![id.clone()],
                kind: ErrorKind::MergedWords,
                suggestion: Some(format!("{left} {right}")),
                highlights: BTreeSet::new(),
            });
        }
    }

    for pair in ordered_tokens.windows(2) {
        let (id_a, tok_a) = &pair[0];
        let (id_b, tok_b) = &pair[1];
        let (core_a, _) = strip_token(tok_a);
        let (core_b, _) = strip_token(tok_b);
        if core_a.is_empty() || core_b.is_empty() {
            continue;
        }
        let a = core_a.to_lowercase();
        let b = core_b.to_lowercase();
        let joined = format!("{a}{b}");
        if lex.contains(&joined) && (!lex.contains(&a) || !lex.contains(&b)) {
            flags.push(ErrorFlag {
                word_ids: vec![id_a.clone(), id_b.clone()],
                kind: ErrorKind::SplitCompound,
                suggestion: Some(joined),
                highlights: BTreeSet::new(),
            });
        }
    }

    flags
}

/// Character indices of `original` participating in one optimal edit
/// alignment against `suggestion`: substituted and deleted characters
/// directly, insertions attributed to the preceding character (index 0 at
/// the start).
pub fn char_highlights(original: &str, suggestion: &str) -> BTreeSet<usize> {
    let stats = levenshtein(original, suggestion);
    let mut set = BTreeSet::new();
    for op in &stats.alignment {
        match *op {
            EditOp::Substitute { a_idx, .. } | EditOp::Delete { a_idx } => {
                set.insert(a_idx);
            }
            EditOp::Insert { a_gap, .. } => {
                set.insert(a_gap.saturating_sub(1));
            }
            EditOp::Match { .. } => {}
        }
    }
    set
}

/// Vertical gaps between consecutive line groups:
/// gap(i) = min top of line i+1 - max bottom of line i. Negative when
/// lines overlap. Empty for single-line pages.
pub fn measure_interline_gaps(page: &Page, line_alpha: f64) -> Vec<f64> {
    let groups = line_groups(&page.words, line_alpha);
    groups
        .windows(2)
        .map(|pair| {
            let bottom = pair[0]
                .iter()
                .map(|&i| enclosing_axis_box(&page.words[i].quad).y_max)
                .fold(f64::NEG_INFINITY, f64::max);
            let top = pair[1]
                .iter()
                .map(|&i| enclosing_axis_box(&page.words[i].quad).y_min)
                .fold(f64::INFINITY, f64::min);
            top - bottom
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    BelowWord,
    Margin,
    OverlayMarker,
}

/// A resolved physical placement for one flag.
#[derive(Debug, Clone, Serialize)]
pub struct Placement {
    pub flag_index: usize,
    pub strategy: Strategy,
    pub anchor: AxisBox,
    pub text_height: f64,
    pub label: String,
    pub leader: Option<Vec<Point2>>,
    /// Footnote number, only for overlay markers.
    pub marker_number: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnnotationPlan {
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackConfig {
    pub line_alpha: f64,
    /// Minimum interline gap, as a fraction of the line's median word
    /// height, for below-word placement.
    pub min_gap_ratio: f64,
    /// Fraction of the page width reserved as the right margin.
    pub margin_reserve: f64,
    pub max_edit: usize,
    /// Render the word quads as a debug layer.
    pub debug_layer: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            line_alpha: crate::ordering::DEFAULT_LINE_ALPHA,
            min_gap_ratio: 0.6,
            margin_reserve: 0.15,
            max_edit: 2,
            debug_layer: false,
        }
    }
}

const GLYPH_ASPECT: f64 = 0.55;
const MIN_TEXT_HEIGHT: f64 = 4.0;

fn label_for(flag: &ErrorFlag) -> String {
    match &flag.suggestion {
        Some(s) => s.clone(),
        None => "unknown word".to_string(),
    }
}

struct Layout<'a> {
    page: &'a Page,
    word_boxes: Vec<AxisBox>,
    /// line index per word index
    line_of: Vec<usize>,
    /// per line: (y_min, y_max, median word height)
    lines: Vec<(f64, f64, f64)>,
    gaps: Vec<f64>,
}

impl<'a> Layout<'a> {
    fn new(page: &'a Page, cfg: &FeedbackConfig) -> Self {
        let word_boxes: Vec<AxisBox> =
            page.words.iter().map(|w| enclosing_axis_box(&w.quad)).collect();
        let groups = line_groups(&page.words, cfg.line_alpha);
        let mut line_of = vec![0usize; page.words.len()];
        let mut lines = Vec::with_capacity(groups.len());
        for (li, g) in groups.iter().enumerate() {
            let mut heights: Vec<f64> = Vec::with_capacity(g.len());
            let mut y_min = f64::INFINITY;
            let mut y_max = f64::NEG_INFINITY;
            for &wi in g {
                line_of[wi] = li;
                heights.push(word_boxes[wi].height());
                y_min = y_min.min(word_boxes[wi].y_min);
                y_max = y_max.max(word_boxes[wi].y_max);
            }
            heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = heights[heights.len() / 2];
            lines.push((y_min, y_max, median));
        }
        let gaps = measure_interline_gaps(page, cfg.line_alpha);
        Self { page, word_boxes, line_of, lines, gaps }
    }

    /// Gap below line `li`; for the last line, the space to the page edge.
    fn gap_below(&self, li: usize) -> f64 {
        self.gaps
            .get(li)
            .copied()
            .unwrap_or_else(|| self.page.height as f64 - self.lines[li].1)
    }

    fn hits_any_word(&self, rect: &AxisBox) -> bool {
        self.word_boxes.iter().any(|b| b.intersects(rect))
    }
}

fn overlaps_placed(rect: &AxisBox, placed: &[AxisBox]) -> bool {
    placed.iter().any(|b| b.intersects(rect))
}

fn within_page(rect: &AxisBox, page: &Page) -> bool {
    rect.x_min >= 0.0
        && rect.y_min >= 0.0
        && rect.x_max <= page.width as f64
        && rect.y_max <= page.height as f64
}

/// Resolves a physical placement for every flag. Strategies are tried in
/// priority order (below the word, right margin with a leader line,
/// overlay marker with a footnote); collisions among placements are
/// resolved by horizontal shifting up to half the word width before
/// escalating to the next strategy.
pub fn plan_annotations(
    page: &Page,
    flags: &[ErrorFlag],
    cfg: &FeedbackConfig,
) -> Result<AnnotationPlan, FeedbackError> {
    if page.words.is_empty() || flags.is_empty() {
        return Ok(AnnotationPlan::default());
    }
    let layout = Layout::new(page, cfg);
    let mut placed: Vec<AxisBox> = Vec::new();
    let mut placements = Vec::new();
    let mut next_marker = 1usize;

    for (fi, flag) in flags.iter().enumerate() {
        let first_id = flag
            .word_ids
            .first()
            .ok_or_else(|| FeedbackError::UnknownWordId(String::new()))?;
        let wi = page
            .words
            .iter()
            .position(|w| &w.id == first_id)
            .ok_or_else(|| FeedbackError::UnknownWordId(first_id.clone()))?;
        let wb = layout.word_boxes[wi];
        let li = layout.line_of[wi];
        let label = label_for(flag);

        let placement = try_below_word(&layout, &wb, li, &label, cfg, &placed)
            .or_else(|| try_margin(&layout, &wb, &label, cfg, &placed))
            .unwrap_or_else(|| {
                let p = place_marker(&wb, next_marker, &label, &placed);
                next_marker += 1;
                p
            });
        placed.push(placement.anchor);
        placements.push(Placement { flag_index: fi, ..placement });
    }

    Ok(AnnotationPlan { placements })
}

fn try_below_word(
    layout: &Layout,
    wb: &AxisBox,
    li: usize,
    label: &str,
    cfg: &FeedbackConfig,
    placed: &[AxisBox],
) -> Option<Placement> {
    let gap = layout.gap_below(li);
    let median_h = layout.lines[li].2;
    if gap < cfg.min_gap_ratio * median_h {
        return None;
    }
    let text_h = (0.8 * gap).min(0.7 * wb.height()).max(MIN_TEXT_HEIGHT);
    let width = (label.chars().count() as f64 * GLYPH_ASPECT * text_h).max(text_h);
    let y0 = layout.lines[li].1 + 0.1 * gap;
    let rect = AxisBox {
        x_min: wb.x_min,
        y_min: y0,
        x_max: wb.x_min + width,
        y_max: y0 + text_h,
    };
    shift_horizontally(rect, wb.width() / 2.0, layout, placed).map(|anchor| Placement {
        flag_index: 0,
        strategy: Strategy::BelowWord,
        anchor,
        text_height: text_h,
        label: label.to_string(),
        leader: None,
        marker_number: None,
    })
}

/// Tries the rectangle at increasing horizontal offsets (alternating
/// right/left) up to `max_shift`, keeping it inside the page, clear of
/// all word quads and of already-placed annotations.
fn shift_horizontally(
    rect: AxisBox,
    max_shift: f64,
    layout: &Layout,
    placed: &[AxisBox],
) -> Option<AxisBox> {
    let steps = 8;
    let mut offsets = vec![0.0];
    for i in 1..=steps {
        let d = max_shift * i as f64 / steps as f64;
        offsets.push(d);
        offsets.push(-d);
    }
    for dx in offsets {
        let cand = AxisBox {
            x_min: rect.x_min + dx,
            x_max: rect.x_max + dx,
            ..rect
        };
        if within_page(&cand, layout.page)
            && !layout.hits_any_word(&cand)
            && !overlaps_placed(&cand, placed)
        {
            return Some(cand);
        }
    }
    None
}

fn try_margin(
    layout: &Layout,
    wb: &AxisBox,
    label: &str,
    cfg: &FeedbackConfig,
    placed: &[AxisBox],
) -> Option<Placement> {
    let page_w = layout.page.width as f64;
    let margin_x = page_w * (1.0 - cfg.margin_reserve);
    let avail = page_w - margin_x;
    let chars = label.chars().count().max(1) as f64;
    let mut text_h = (0.7 * wb.height()).max(MIN_TEXT_HEIGHT);
    // Shrink until the label fits the reserved margin width.
    if chars * GLYPH_ASPECT * text_h > avail {
        text_h = (avail / (chars * GLYPH_ASPECT)).max(MIN_TEXT_HEIGHT);
    }
    let width = (chars * GLYPH_ASPECT * text_h).min(avail);

    // Start at the word's line, slide down until free.
    let mut y0 = wb.y_min;
    let step = text_h * 0.5;
    let mut tries = 0;
    loop {
        let rect = AxisBox {
            x_min: margin_x,
            y_min: y0,
            x_max: margin_x + width,
            y_max: y0 + text_h,
        };
        if !within_page(&rect, layout.page) {
            return None;
        }
        if !layout.hits_any_word(&rect) && !overlaps_placed(&rect, placed) {
            let leader = vec![
                Point2::new(wb.x_max, (wb.y_min + wb.y_max) / 2.0),
                Point2::new(rect.x_min, rect.y_min + text_h / 2.0),
            ];
            return Some(Placement {
                flag_index: 0,
                strategy: Strategy::Margin,
                anchor: rect,
                text_height: text_h,
                label: label.to_string(),
                leader: Some(leader),
                marker_number: None,
            });
        }
        y0 += step;
        tries += 1;
        if tries > 512 {
            return None;
        }
    }
}

/// Last-resort strategy: a small numbered marker at the word's top-right
/// corner, referencing a footnote list rendered below the page. Never
/// fails; collisions are resolved by sliding the marker right and up.
fn place_marker(wb: &AxisBox, number: usize, label: &str, placed: &[AxisBox]) -> Placement {
    let size = (0.35 * wb.height()).max(MIN_TEXT_HEIGHT);
    let mut rect = AxisBox {
        x_min: wb.x_max - size * 0.25,
        y_min: (wb.y_min - size * 0.75).max(0.0),
        x_max: wb.x_max - size * 0.25 + size,
        y_max: (wb.y_min - size * 0.75).max(0.0) + size,
    };
    let mut tries = 0;
    while overlaps_placed(&rect, placed) && tries < 256 {
        rect = AxisBox {
            x_min: rect.x_min + size * 0.5,
            x_max: rect.x_max + size * 0.5,
            ..rect
        };
        tries += 1;
    }
    Placement {
        flag_index: 0,
        strategy: Strategy::OverlayMarker,
        anchor: rect,
        text_height: size,
        label: label.to_string(),
        leader: None,
        marker_number: Some(number),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the page with its feedback annotations as an SVG 1.1 document.
/// Output is a pure function of the inputs: identical inputs give
/// byte-identical documents.
pub fn render_svg(
    page: &Page,
    flags: &[ErrorFlag],
    plan: &AnnotationPlan,
    cfg: &FeedbackConfig,
) -> String {
    let footnotes: Vec<&Placement> = plan
        .placements
        .iter()
        .filter(|p| p.strategy == Strategy::OverlayMarker)
        .collect();
    let footnote_line_h = 16.0;
    let footnote_h = if footnotes.is_empty() {
        0.0
    } else {
        footnote_line_h * (footnotes.len() as f64 + 1.0)
    };
    let total_h = page.height as f64 + footnote_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        page.width,
        fmt(total_h),
        page.width,
        fmt(total_h)
    );
    if let Some(img) = &page.image_ref {
        let _ = writeln!(
            svg,
            r#"  <image href="{}" x="0" y="0" width="{}" height="{}"/>"#,
            xml_escape(img),
            page.width,
            page.height
        );
    }

    if cfg.debug_layer {
        let _ = writeln!(svg, r##"  <g class="words" fill="none" stroke="#4a90d9" stroke-width="1">"##);
        for w in &page.words {
            let pts = w
                .quad
                .vertices()
                .iter()
                .map(|p| format!("{},{}", fmt(p.x), fmt(p.y)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(svg, r#"    <polygon points="{pts}"/>"#);
        }
        let _ = writeln!(svg, "  </g>");
    }

    // Character highlights: the word box is divided uniformly by character
    // count, an approximation since true character positions are unknown.
    let _ = writeln!(svg, r##"  <g class="highlights" fill="#e74c3c" fill-opacity="0.35">"##);
    for flag in flags {
        if flag.highlights.is_empty() {
            continue;
        }
        let Some(word) = page.word(&flag.word_ids[0]) else {
            continue;
        };
        let b = enclosing_axis_box(&word.quad);
        let n = word.text.chars().count().max(1);
        let cell = b.width() / n as f64;
        for &idx in &flag.highlights {
            if idx >= n {
                continue;
            }
            let x = b.x_min + idx as f64 * cell;
            let _ = writeln!(
                svg,
                r#"    <rect x="{}" y="{}" width="{}" height="{}"/>"#,
                fmt(x),
                fmt(b.y_min),
                fmt(cell),
                fmt(b.height())
            );
        }
    }
    let _ = writeln!(svg, "  </g>");

    let _ = writeln!(svg, r##"  <g class="annotations" font-family="monospace" fill="#c0392b">"##);
    for p in &plan.placements {
        if let Some(leader) = &p.leader {
            let pts = leader
                .iter()
                .map(|q| format!("{},{}", fmt(q.x), fmt(q.y)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                svg,
                r##"    <polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="0.8"/>"##
            );
        }
        match p.strategy {
            Strategy::OverlayMarker => {
                let n = p.marker_number.unwrap_or(0);
                let _ = writeln!(
                    svg,
                    r#"    <text x="{}" y="{}" font-size="{}">[{}]</text>"#,
                    fmt(p.anchor.x_min),
                    fmt(p.anchor.y_max),
                    fmt(p.text_height),
                    n
                );
            }
            _ => {
                let _ = writeln!(
                    svg,
                    r#"    <text x="{}" y="{}" font-size="{}">{}</text>"#,
                    fmt(p.anchor.x_min),
                    fmt(p.anchor.y_max),
                    fmt(p.text_height),
                    xml_escape(&p.label)
                );
            }
        }
    }
    let _ = writeln!(svg, "  </g>");

    if !footnotes.is_empty() {
        let _ = writeln!(
            svg,
            r##"  <g class="footnotes" font-family="monospace" font-size="12" fill="#000000">"##
        );
        for (i, p) in footnotes.iter().enumerate() {
            let y = page.height as f64 + footnote_line_h * (i as f64 + 1.0);
            let _ = writeln!(
                svg,
                r#"    <text x="4" y="{}">[{}] {}</text>"#,
                fmt(y),
                p.marker_number.unwrap_or(0),
                xml_escape(&p.label)
            );
        }
        let _ = writeln!(svg, "  </g>");
    }

    svg.push_str("</svg>\n");
    svg
}

/// Full per-page analysis: reading order, segmentation flags, then
/// spelling flags on tokens not already covered by a segmentation flag.
pub fn analyze_page(
    page: &Page,
    lex: &Lexicon,
    cfg: &FeedbackConfig,
) -> (ReadingOrder, Vec<ErrorFlag>) {
    let order = heuristic_reading_order(&page.words, cfg.line_alpha);
    let tokens: Vec<(String, String)> = order
        .sequence
        .iter()
        .map(|id| {
            let w = page.word(id).expect("order is a permutation of page words");
            (w.id.clone(), w.text.clone())
        })
        .collect();

    let mut flags = detect_segmentation_errors(&tokens, lex);
    let covered: std::collections::HashSet<String> = flags
        .iter()
        .flat_map(|f| f.word_ids.iter().cloned())
        .collect();
    for (id, text) in &tokens {
        if covered.contains(id.as_str()) {
            continue;
        }
        if let Some(flag) = check_spelling(id, text, lex, cfg.max_edit) {
            flags.push(flag);
        }
    }
    // Stable report order: by the flagged word's reading-order position.
    let pos: HashMap<&str, usize> = order
        .sequence
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    flags.sort_by_key(|f| (pos.get(f.word_ids[0].as_str()).copied().unwrap_or(usize::MAX), f.kind as usize));
    (order, flags)
}
