//! Run configuration: documented defaults, a plain key=value config file,
//! and deterministic serialization into report headers.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Environment variable naming the default config file.
pub const CONFIG_PATH_ENV: &str = "HANDSCORE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config value out of range: {0}")]
    OutOfRange(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub iou_threshold: f64,
    pub histogram_bin_width: f64,
    pub line_group_alpha: f64,
    pub min_gap_ratio: f64,
    pub bleu_max_n: usize,
    pub resize_target: Option<(u32, u32)>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            histogram_bin_width: 0.05,
            line_group_alpha: 0.7,
            min_gap_ratio: 0.6,
            bleu_max_n: 4,
            resize_target: None,
            seed: 42,
            workers: 0, // 0 = number of cores
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(ConfigError::OutOfRange(format!(
                "iou_threshold must be in (0,1], got {}",
                self.iou_threshold
            )));
        }
        let bins = (1.0 / self.histogram_bin_width).round();
        if self.histogram_bin_width <= 0.0 || (bins * self.histogram_bin_width - 1.0).abs() > 1e-9 {
            return Err(ConfigError::OutOfRange(format!(
                "histogram_bin_width {} must divide 1.0 evenly",
                self.histogram_bin_width
            )));
        }
        if self.line_group_alpha <= 0.0 {
            return Err(ConfigError::OutOfRange("line_group_alpha must be positive".into()));
        }
        if self.min_gap_ratio <= 0.0 {
            return Err(ConfigError::OutOfRange("min_gap_ratio must be positive".into()));
        }
        if self.bleu_max_n == 0 || self.bleu_max_n > 9 {
            return Err(ConfigError::OutOfRange("bleu_max_n must be in 1..=9".into()));
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {raw:?}"),
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|msg| ConfigError::Parse { line: i + 1, msg })?;
        }
        Ok(())
    }

    fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |e: &dyn fmt::Display| format!("invalid value for {key}: {e}");
        match key {
            "iou_threshold" => self.iou_threshold = value.parse().map_err(|e| bad(&e))?,
            "histogram_bin_width" => self.histogram_bin_width = value.parse().map_err(|e| bad(&e))?,
            "line_group_alpha" => self.line_group_alpha = value.parse().map_err(|e| bad(&e))?,
            "min_gap_ratio" => self.min_gap_ratio = value.parse().map_err(|e| bad(&e))?,
            "bleu_max_n" => self.bleu_max_n = value.parse().map_err(|e| bad(&e))?,
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "workers" => self.workers = value.parse().map_err(|e| bad(&e))?,
            "resize_target" => {
                self.resize_target = Some(parse_dims(value).map_err(|e| bad(&e))?);
            }
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Deterministic `key=value` dump used in report headers.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("tool_version={}", env!("CARGO_PKG_VERSION")),
            format!("iou_threshold={}", self.iou_threshold),
            format!("histogram_bin_width={}", self.histogram_bin_width),
            format!("line_group_alpha={}", self.line_group_alpha),
            format!("min_gap_ratio={}", self.min_gap_ratio),
            format!("bleu_max_n={}", self.bleu_max_n),
            format!("seed={}", self.seed),
        ];
        if let Some((w, h)) = self.resize_target {
            lines.push(format!("resize_target={w}x{h}"));
        }
        lines
    }
}

/// Parses a `WxH` dimension string.
pub fn parse_dims(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((w, h))
}
