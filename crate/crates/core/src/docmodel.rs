//! Canonical document model plus ingestion: IAM XML forms, Imgur5K JSON
//! metadata, the page resize transform, and the line-delimited canonical
//! page format that serves as the adapter boundary for external
//! recognizers.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{scale_quad, AxisBox, GeometryError, Point2, Quad};

#[derive(Debug, Error)]
pub enum DocError {
    #[error("XML parse error: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("JSON parse error at line {line}: {msg}")]
    Json { line: usize, msg: String },
    #[error("schema violation at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("geometry error: {0}")]
    Geometry(#[from] GeometryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A non-fatal ingestion event (skipped word, clamped coordinate, ...).
#[derive(Debug, Clone, Serialize)]
pub struct Warning {
    pub context: String,
    pub message: String,
}

/// A single annotated word on a page.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub id: String,
    pub quad: Quad,
    pub text: String,
    pub order: Option<usize>,
    pub confidence: Option<f64>,
}

/// One document page: dimensions, an optional image reference, and its words.
#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub page_id: String,
    pub width: u32,
    pub height: u32,
    pub image_ref: Option<String>,
    pub words: Vec<Word>,
}

impl Page {
    pub fn word(&self, id: &str) -> Option<&Word> {
        self.words.iter().find(|w| w.id == id)
    }

    /// True when every word carries a reading-order index forming a
    /// contiguous 0-based permutation.
    pub fn has_reading_order(&self) -> bool {
        if self.words.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.words.len()];
        for w in &self.words {
            match w.order {
                Some(o) if o < seen.len() && !seen[o] => seen[o] = true,
                _ => return false,
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub pages: Vec<Page>,
    pub source_tag: String,
}

impl Corpus {
    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == id)
    }
}

/// Normalizes a transcription: trims surrounding whitespace and applies
/// Unicode NFC so CER is stable across source encodings.
pub fn normalize_text(s: &str) -> String {
    use unicode_normalization::UnicodeNormalization;
    s.trim().nfc().collect()
}

// ---------------------------------------------------------------------------
// IAM XML
// ---------------------------------------------------------------------------

/// Parses an IAM form document. One `Word` per `<word>` element inside the
/// handwritten part; the machine-printed header is never touched. The word
/// quad is the axis-aligned union of the word's `<cmp>` component boxes.
/// Reading order is document order of words within lines, in line order.
pub fn parse_iam_xml(bytes: &[u8]) -> Result<(Page, Vec<Warning>), DocError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| DocError::InvalidArgument(format!("input is not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "form" {
        return Err(DocError::Schema {
            path: "/".into(),
            msg: format!("expected <form> root, found <{}>", root.tag_name().name()),
        });
    }
    let page_id = root.attribute("id").unwrap_or("unknown").to_string();
    let width: u32 = attr_num(&root, "width").unwrap_or(2479);
    let height: u32 = attr_num(&root, "height").unwrap_or(3542);

    let mut warnings = Vec::new();
    let mut words = Vec::new();
    let mut order = 0usize;

    let hw_parts = root
        .children()
        .filter(|n| n.tag_name().name() == "handwritten-part");
    for part in hw_parts {
        for line in part.children().filter(|n| n.tag_name().name() == "line") {
            for word in line.children().filter(|n| n.tag_name().name() == "word") {
                let id = word
                    .attribute("id")
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("{page_id}-w{order}"));
                let mut ext: Option<AxisBox> = None;
                for cmp in word.children().filter(|n| n.tag_name().name() == "cmp") {
                    let (x, y, w, h) = (
                        attr_f64(&cmp, "x"),
                        attr_f64(&cmp, "y"),
                        attr_f64(&cmp, "width"),
                        attr_f64(&cmp, "height"),
                    );
                    if let (Some(x), Some(y), Some(w), Some(h)) = (x, y, w, h) {
                        if w <= 0.0 || h <= 0.0 {
                            continue;
                        }
                        ext = Some(match ext {
                            None => AxisBox { x_min: x, y_min: y, x_max: x + w, y_max: y + h },
                            Some(b) => AxisBox {
                                x_min: b.x_min.min(x),
                                y_min: b.y_min.min(y),
                                x_max: b.x_max.max(x + w),
                                y_max: b.y_max.max(y + h),
                            },
                        });
                    }
                }
                let Some(bbox) = ext else {
                    warnings.push(Warning {
                        context: id.clone(),
                        message: "word has no usable component boxes, skipped".into(),
                    });
                    continue;
                };
                let quad = match clamp_box_to_page(bbox, width, height, &id, &mut warnings) {
                    Some(q) => q,
                    None => continue,
                };
                let text = normalize_text(word.attribute("text").unwrap_or(""));
                words.push(Word { id, quad, text, order: Some(order), confidence: None });
                order += 1;
            }
        }
    }

    Ok((Page { page_id, width, height, image_ref: None, words }, warnings))
}

fn attr_num(node: &roxmltree::Node, name: &str) -> Option<u32> {
    node.attribute(name)?.parse().ok()
}

fn attr_f64(node: &roxmltree::Node, name: &str) -> Option<f64> {
    node.attribute(name)?.parse().ok()
}

fn clamp_box_to_page(
    b: AxisBox,
    width: u32,
    height: u32,
    context: &str,
    warnings: &mut Vec<Warning>,
) -> Option<Quad> {
    let (w, h) = (width as f64, height as f64);
    let clamped = AxisBox {
        x_min: b.x_min.clamp(0.0, w),
        y_min: b.y_min.clamp(0.0, h),
        x_max: b.x_max.clamp(0.0, w),
        y_max: b.y_max.clamp(0.0, h),
    };
    if clamped != b {
        warnings.push(Warning {
            context: context.to_string(),
            message: "coordinates clamped to page bounds".into(),
        });
    }
    if clamped.x_min >= clamped.x_max || clamped.y_min >= clamped.y_max {
        warnings.push(Warning {
            context: context.to_string(),
            message: "zero-area box after clamping, skipped".into(),
        });
        return None;
    }
    Some(clamped.to_quad())
}

// ---------------------------------------------------------------------------
// Imgur5K JSON
// ---------------------------------------------------------------------------

/// Angle unit for Imgur5K annotations. The dataset does not document the
/// unit; degrees (counterclockwise-positive) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleUnit {
    #[default]
    Degrees,
    Radians,
}

#[derive(Deserialize)]
struct Imgur5kFile {
    #[serde(default)]
    index_id: std::collections::BTreeMap<String, serde_json::Value>,
    index_to_ann_map: std::collections::BTreeMap<String, Vec<String>>,
    ann_id: std::collections::BTreeMap<String, Imgur5kAnn>,
}

#[derive(Deserialize)]
struct Imgur5kAnn {
    word_bbox: serde_json::Value,
    #[serde(default)]
    word: String,
}

/// Parses Imgur5K-style annotation JSON into a corpus. Each annotation's
/// `word_bbox` is `[xc, yc, w, h, angle]`, either as a JSON array or as the
/// dataset's stringified form. Reading order is absent by construction.
pub fn parse_imgur5k_json(bytes: &[u8], unit: AngleUnit) -> Result<(Corpus, Vec<Warning>), DocError> {
    let file: Imgur5kFile = serde_json::from_slice(bytes).map_err(|e| DocError::Json {
        line: e.line(),
        msg: e.to_string(),
    })?;

    let mut warnings = Vec::new();
    let mut pages = Vec::new();
    for (page_id, ann_ids) in &file.index_to_ann_map {
        let image_ref = file
            .index_id
            .get(page_id)
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let mut raw: Vec<(String, Quad, String)> = Vec::new();
        for ann_id in ann_ids {
            let Some(ann) = file.ann_id.get(ann_id) else {
                warnings.push(Warning {
                    context: ann_id.clone(),
                    message: "annotation id missing from ann_id map, skipped".into(),
                });
                continue;
            };
            let params = match parse_bbox_params(&ann.word_bbox) {
                Some(p) => p,
                None => {
                    warnings.push(Warning {
                        context: ann_id.clone(),
                        message: "unreadable word_bbox, skipped".into(),
                    });
                    continue;
                }
            };
            let [xc, yc, w, h, angle] = params;
            if w <= 0.0 || h <= 0.0 {
                warnings.push(Warning {
                    context: ann_id.clone(),
                    message: "zero-area box, skipped".into(),
                });
                continue;
            }
            let quad = match rotated_box_to_quad(xc, yc, w, h, angle, unit) {
                Ok(q) => q,
                Err(e) => {
                    warnings.push(Warning {
                        context: ann_id.clone(),
                        message: format!("invalid box: {e}, skipped"),
                    });
                    continue;
                }
            };
            let text = normalize_text(&ann.word);
            if text.is_empty() {
                warnings.push(Warning {
                    context: ann_id.clone(),
                    message: "empty transcription retained".into(),
                });
            }
            raw.push((ann_id.clone(), quad, text));
        }

        // Page dimensions are not stored in the metadata; use the extent of
        // the annotations, then clamp any negative coordinates into view.
        let (width, height) = page_extent(&raw);
        let mut words = Vec::new();
        for (id, quad, text) in raw {
            let bbox = crate::geometry::enclosing_axis_box(&quad);
            let quad = if bbox.x_min < 0.0 || bbox.y_min < 0.0 {
                match clamp_quad(&quad, width, height, &id, &mut warnings) {
                    Some(q) => q,
                    None => continue,
                }
            } else {
                quad
            };
            words.push(Word { id, quad, text, order: None, confidence: None });
        }
        pages.push(Page { page_id: page_id.clone(), width, height, image_ref, words });
    }

    Ok((Corpus { pages, source_tag: "imgur5k".into() }, warnings))
}

fn parse_bbox_params(v: &serde_json::Value) -> Option<[f64; 5]> {
    let nums: Vec<f64> = match v {
        serde_json::Value::Array(a) => a.iter().filter_map(|x| x.as_f64()).collect(),
        serde_json::Value::String(s) => s
            .trim_matches(|c| c == '[' || c == ']')
            .split(',')
            .filter_map(|t| t.trim().parse().ok())
            .collect(),
        _ => return None,
    };
    if nums.len() != 5 {
        return None;
    }
    Some([nums[0], nums[1], nums[2], nums[3], nums[4]])
}

fn page_extent(words: &[(String, Quad, String)]) -> (u32, u32) {
    let mut w = 1.0f64;
    let mut h = 1.0f64;
    for (_, q, _) in words {
        let b = crate::geometry::enclosing_axis_box(q);
        w = w.max(b.x_max);
        h = h.max(b.y_max);
    }
    (w.ceil() as u32, h.ceil() as u32)
}

fn clamp_quad(
    q: &Quad,
    width: u32,
    height: u32,
    context: &str,
    warnings: &mut Vec<Warning>,
) -> Option<Quad> {
    let (w, h) = (width as f64, height as f64);
    let pts = q
        .vertices()
        .map(|p| Point2::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h)));
    warnings.push(Warning {
        context: context.to_string(),
        message: "coordinates clamped to page bounds".into(),
    });
    match Quad::from_points(pts) {
        Ok(q) => Some(q),
        Err(_) => {
            warnings.push(Warning {
                context: context.to_string(),
                message: "degenerate after clamping, skipped".into(),
            });
            None
        }
    }
}

/// Corners of the w x h rectangle centered at (xc, yc), rotated by `angle`
/// about its center, canonicalized.
pub fn rotated_box_to_quad(
    xc: f64,
    yc: f64,
    w: f64,
    h: f64,
    angle: f64,
    unit: AngleUnit,
) -> Result<Quad, GeometryError> {
    if w <= 0.0 || h <= 0.0 {
        return Err(GeometryError::InvalidArgument(format!(
            "box extents must be positive, got {w} x {h}"
        )));
    }
    let a = match unit {
        AngleUnit::Degrees => angle.to_radians(),
        AngleUnit::Radians => angle,
    };
    let (s, c) = a.sin_cos();
    let corner = |dx: f64, dy: f64| Point2::new(xc + dx * c - dy * s, yc + dx * s + dy * c);
    let (hw, hh) = (w / 2.0, h / 2.0);
    Quad::from_points([
        corner(-hw, -hh),
        corner(hw, -hh),
        corner(hw, hh),
        corner(-hw, hh),
    ])
}

// ---------------------------------------------------------------------------
// Resize
// ---------------------------------------------------------------------------

/// Scales all word quads so that the page maps onto `target_w` x `target_h`.
/// Transcriptions and reading order are untouched.
pub fn resize_page(p: &Page, target_w: u32, target_h: u32) -> Result<Page, DocError> {
    if target_w == 0 || target_h == 0 {
        return Err(DocError::InvalidArgument("resize target must be positive".into()));
    }
    let sx = target_w as f64 / p.width as f64;
    let sy = target_h as f64 / p.height as f64;
    let words = p
        .words
        .iter()
        .map(|w| {
            Ok(Word {
                quad: scale_quad(&w.quad, sx, sy)?,
                ..w.clone()
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(Page {
        page_id: p.page_id.clone(),
        width: target_w,
        height: target_h,
        image_ref: p.image_ref.clone(),
        words,
    })
}

// ---------------------------------------------------------------------------
// Canonical page file (one JSON object per line)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PageRecord {
    page_id: String,
    width: u32,
    height: u32,
    image: Option<String>,
    words: Vec<WordRecord>,
}

#[derive(Serialize, Deserialize)]
struct WordRecord {
    id: String,
    quad: [[f64; 2]; 4],
    text: String,
    order: Option<usize>,
    confidence: Option<f64>,
}

fn page_to_record(p: &Page) -> PageRecord {
    PageRecord {
        page_id: p.page_id.clone(),
        width: p.width,
        height: p.height,
        image: p.image_ref.clone(),
        words: p
            .words
            .iter()
            .map(|w| WordRecord {
                id: w.id.clone(),
                quad: w.quad.vertices().map(|v| [v.x, v.y]),
                text: w.text.clone(),
                order: w.order,
                confidence: w.confidence,
            })
            .collect(),
    }
}

fn record_to_page(r: PageRecord, line: usize) -> Result<Page, DocError> {
    let at = |path: String, msg: String| DocError::Schema {
        path: format!("line {line}: {path}"),
        msg,
    };
    if r.width == 0 || r.height == 0 {
        return Err(at("width".into(), "page dimensions must be positive".into()));
    }
    let mut ids = HashSet::new();
    let mut words = Vec::with_capacity(r.words.len());
    let mut orders: Vec<usize> = Vec::new();
    for (i, w) in r.words.into_iter().enumerate() {
        if !ids.insert(w.id.clone()) {
            return Err(at(format!("words[{i}].id"), format!("duplicate word id {:?}", w.id)));
        }
        let pts = w.quad.map(|[x, y]| Point2::new(x, y));
        let quad = Quad::from_points(pts)
            .map_err(|e| at(format!("words[{i}].quad"), e.to_string()))?;
        if let Some(c) = w.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(at(format!("words[{i}].confidence"), format!("out of [0,1]: {c}")));
            }
        }
        if let Some(o) = w.order {
            orders.push(o);
        }
        words.push(Word {
            id: w.id,
            quad,
            text: normalize_text(&w.text),
            order: w.order,
            confidence: w.confidence,
        });
    }
    if !orders.is_empty() {
        let mut sorted = orders.clone();
        sorted.sort_unstable();
        let contiguous = orders.len() == words.len()
            && sorted.iter().enumerate().all(|(i, &o)| i == o);
        if !contiguous {
            return Err(at(
                "words[*].order".into(),
                "order indices must form a contiguous 0-based permutation over all words".into(),
            ));
        }
    }
    Ok(Page {
        page_id: r.page_id,
        width: r.width,
        height: r.height,
        image_ref: r.image,
        words,
    })
}

/// Serializes a corpus to the canonical line-delimited page format.
/// Identical corpora always produce byte-identical output.
pub fn write_canonical_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for page in &corpus.pages {
        let rec = page_to_record(page);
        let _ = writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"));
    }
    out
}

pub fn write_canonical(corpus: &Corpus, path: &Path) -> Result<(), DocError> {
    fs::write(path, write_canonical_string(corpus)).map_err(|e| DocError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_canonical_str(data: &str, source_tag: &str) -> Result<Corpus, DocError> {
    let mut pages = Vec::new();
    let mut page_ids = HashSet::new();
    for (i, line) in data.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PageRecord = serde_json::from_str(line).map_err(|e| DocError::Json {
            line: lineno,
            msg: e.to_string(),
        })?;
        let page = record_to_page(rec, lineno)?;
        if !page_ids.insert(page.page_id.clone()) {
            return Err(DocError::Schema {
                path: format!("line {lineno}: page_id"),
                msg: format!("duplicate page id {:?}", page.page_id),
            });
        }
        pages.push(page);
    }
    Ok(Corpus { pages, source_tag: source_tag.to_string() })
}

pub fn read_canonical(path: &Path) -> Result<Corpus, DocError> {
    let data = fs::read_to_string(path).map_err(|e| DocError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_canonical_str(&data, &path.display().to_string())
}
