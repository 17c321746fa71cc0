//! Stage-wise evaluation of handwriting pipelines — word detection,
//! reading order, recognition — against ground truth, plus placed visual
//! error feedback rendered as SVG overlays.

pub mod config;
pub mod detect;
pub mod docmodel;
pub mod feedback;
pub mod geometry;
pub mod ordering;
pub mod recog;
pub mod report;
