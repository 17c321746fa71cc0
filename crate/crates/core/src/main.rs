//! Command-line surface: corpus ingestion, stage-wise evaluation, IoU
//! sampling overlays, and feedback rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use handscore::config::{parse_dims, RunConfig, CONFIG_PATH_ENV};
use handscore::docmodel::{
    parse_iam_xml, parse_imgur5k_json, read_canonical, resize_page, write_canonical, AngleUnit,
    Corpus, Page, Warning,
};
use handscore::feedback::{
    analyze_page, load_lexicon, plan_annotations, render_svg, FeedbackConfig,
};
use handscore::geometry::{iou, sample_quad_at_iou, Quad, SampleMode};
use handscore::report::{evaluate, write_reports, EvalKind, ReportError};

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_WARNINGS: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "handscore", version, about = "Handwriting pipeline evaluation and feedback rendering")]
struct Cli {
    /// Plain key=value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert dataset metadata into the canonical page format.
    Ingest(IngestArgs),
    /// Evaluate predictions against ground truth.
    Eval(EvalArgs),
    /// Draw random boxes at prescribed IoU targets over a ground-truth word.
    SampleIou(SampleIouArgs),
    /// Detect writing errors on a recognized page and render placed feedback.
    Feedback(FeedbackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IngestFormat {
    Iam,
    Imgur5k,
    Canonical,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: IngestFormat,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Resize pages to WxH (e.g. 800x800) during ingestion.
    #[arg(long)]
    resize: Option<String>,
    /// Imgur5K angle unit.
    #[arg(long, value_enum, default_value = "degrees")]
    angle_unit: AngleUnitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AngleUnitArg {
    Degrees,
    Radians,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKindArg {
    Detect,
    Order,
    Recog,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(value_enum)]
    kind: EvalKindArg,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    histogram_bin_width: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SampleIouArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    page: String,
    #[arg(long)]
    word: String,
    /// Comma-separated IoU targets, e.g. 0.5,0.6,0.7.
    #[arg(long)]
    targets: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Jitter box scale by up to +/-10% per axis in addition to displacement.
    #[arg(long)]
    scale_jitter: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FeedbackArgs {
    /// Canonical page file with recognized texts.
    #[arg(long)]
    page: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    min_gap_ratio: Option<f64>,
    /// Render word quads as a debug layer.
    #[arg(long)]
    debug_layer: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    let mut cfg = RunConfig::default();
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_PATH_ENV).map(PathBuf::from));
    if let Some(path) = config_path {
        if let Err(e) = cfg.apply_file(&path) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FATAL);
        }
    }

    let code = match cli.command {
        Command::Ingest(args) => cmd_ingest(args, &mut cfg),
        Command::Eval(args) => cmd_eval(args, &mut cfg),
        Command::SampleIou(args) => cmd_sample_iou(args, &cfg),
        Command::Feedback(args) => cmd_feedback(args, &cfg),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn print_warnings(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {}: {}", w.context, w.message);
    }
}

fn cmd_ingest(args: IngestArgs, cfg: &mut RunConfig) -> Result<u8, String> {
    if let Some(spec) = &args.resize {
        cfg.resize_target = Some(parse_dims(spec).map_err(|e| format!("--resize: {e}"))?);
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let bytes = std::fs::read(&args.input)
        .map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;

    let (mut corpus, warnings) = match args.format {
        IngestFormat::Iam => {
            let (page, warnings) = parse_iam_xml(&bytes).map_err(|e| e.to_string())?;
            (Corpus { pages: vec![page], source_tag: "iam".into() }, warnings)
        }
        IngestFormat::Imgur5k => {
            let unit = match args.angle_unit {
                AngleUnitArg::Degrees => AngleUnit::Degrees,
                AngleUnitArg::Radians => AngleUnit::Radians,
            };
            parse_imgur5k_json(&bytes, unit).map_err(|e| e.to_string())?
        }
        IngestFormat::Canonical => {
            let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
            let corpus = handscore::docmodel::read_canonical_str(&text, "canonical")
                .map_err(|e| e.to_string())?;
            (corpus, Vec::new())
        }
    };
    print_warnings(&warnings);

    if let Some((w, h)) = cfg.resize_target {
        corpus.pages = corpus
            .pages
            .iter()
            .map(|p| resize_page(p, w, h))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
    }

    write_canonical(&corpus, &args.output).map_err(|e| e.to_string())?;
    Ok(if warnings.is_empty() { EXIT_OK } else { EXIT_WARNINGS })
}

fn cmd_eval(args: EvalArgs, cfg: &mut RunConfig) -> Result<u8, String> {
    if let Some(t) = args.iou_threshold {
        cfg.iou_threshold = t;
    }
    if let Some(b) = args.histogram_bin_width {
        cfg.histogram_bin_width = b;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let gt = read_canonical(&args.gt).map_err(|e| e.to_string())?;
    let pred = read_canonical(&args.pred).map_err(|e| e.to_string())?;
    let kind = match args.kind {
        EvalKindArg::Detect => EvalKind::Detect,
        EvalKindArg::Order => EvalKind::Order,
        EvalKindArg::Recog => EvalKind::Recog,
        EvalKindArg::All => EvalKind::All,
    };

    let bundle = match evaluate(&gt, &pred, kind, cfg) {
        Ok(b) => b,
        Err(ReportError::Protocol(msg)) => {
            eprintln!("protocol error: {msg}");
            return Ok(EXIT_PROTOCOL);
        }
        Err(e) => return Err(e.to_string()),
    };
    write_reports(&bundle, &gt, &args.report).map_err(|e| e.to_string())?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    let d = &bundle.corpus.detection;
    println!(
        "detection: P={:.3} R={:.3} F={:.3} (tp={} fp={} fn={})",
        d.precision, d.recall, d.f1, d.tp, d.fp, d.fn_
    );
    if let (Some(n), Some(b)) = (bundle.corpus.mean_nsfd, bundle.corpus.mean_bleu) {
        println!("ordering: NSFD={n:.3} BLEU={b:.3}");
    }
    if let Some(c) = bundle.corpus.cer_micro {
        println!("recognition: CER={:.1}%", c * 100.0);
    }
    Ok(if bundle.warnings.is_empty() { EXIT_OK } else { EXIT_WARNINGS })
}

const TARGET_COLORS: &[&str] = &[
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
];

fn cmd_sample_iou(args: SampleIouArgs, cfg: &RunConfig) -> Result<u8, String> {
    let corpus = read_canonical(&args.gt).map_err(|e| e.to_string())?;
    let page = corpus
        .page(&args.page)
        .ok_or_else(|| format!("page {:?} not found", args.page))?;
    let word = page
        .word(&args.word)
        .ok_or_else(|| format!("word {:?} not found on page {:?}", args.word, args.page))?;

    let targets: Vec<f64> = args
        .targets
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad target {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if targets.is_empty() {
        return Err("no targets given".into());
    }

    let mode = if args.scale_jitter {
        SampleMode::ScaleJitter
    } else {
        SampleMode::TranslateOnly
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sampled: Vec<(f64, Vec<Quad>)> = Vec::new();
    for &t in &targets {
        let mut quads = Vec::with_capacity(args.samples);
        for _ in 0..args.samples {
            match sample_quad_at_iou(&word.quad, t, args.epsilon, mode, &mut rng) {
                Ok(q) => quads.push(q),
                Err(e) => {
                    eprintln!("protocol error: {e}");
                    return Ok(EXIT_PROTOCOL);
                }
            }
        }
        sampled.push((t, quads));
    }

    let svg = sample_overlay_svg(page, word.quad.vertices(), &sampled);
    std::fs::write(&args.output, svg)
        .map_err(|e| format!("cannot write {}: {e}", args.output.display()))?;

    // Sidecar CSV of achieved IoUs.
    let mut csv = String::from("target,sample,achieved_iou\n");
    for (t, quads) in &sampled {
        for (i, q) in quads.iter().enumerate() {
            let _ = writeln!(csv, "{t},{i},{:.6}", iou(&word.quad, q));
        }
    }
    let csv_path = args.output.with_extension("csv");
    std::fs::write(&csv_path, csv)
        .map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;

    println!(
        "wrote {} samples across {} targets to {}",
        args.samples * targets.len(),
        targets.len(),
        args.output.display()
    );
    Ok(EXIT_OK)
}

fn sample_overlay_svg(
    page: &Page,
    gt_vertices: &[handscore::geometry::Point2; 4],
    sampled: &[(f64, Vec<Quad>)],
) -> String {
    let poly_points = |vs: &[handscore::geometry::Point2; 4]| {
        vs.iter()
            .map(|p| format!("{:.2},{:.2}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = page.width,
        h = page.height
    );
    for (i, (t, quads)) in sampled.iter().enumerate() {
        let color = TARGET_COLORS[i % TARGET_COLORS.len()];
        let _ = writeln!(
            svg,
            r#"  <g class="target" data-iou="{t}" fill="none" stroke="{color}" stroke-width="0.6" stroke-opacity="0.5">"#
        );
        for q in quads {
            let _ = writeln!(svg, r#"    <polygon points="{}"/>"#, poly_points(q.vertices()));
        }
        let _ = writeln!(svg, "  </g>");
    }
    let _ = writeln!(
        svg,
        r##"  <polygon points="{}" fill="none" stroke="#000000" stroke-width="1.5"/>"##,
        poly_points(gt_vertices)
    );
    svg.push_str("</svg>\n");
    svg
}

fn cmd_feedback(args: FeedbackArgs, cfg: &RunConfig) -> Result<u8, String> {
    let lex_bytes = std::fs::read(&args.lexicon)
        .map_err(|e| format!("cannot read lexicon {}: {e}", args.lexicon.display()))?;
    let (lexicon, lex_warnings) = load_lexicon(&lex_bytes).map_err(|e| e.to_string())?;
    for w in &lex_warnings {
        eprintln!("warning: lexicon: {w}");
    }

    let corpus = read_canonical(&args.page).map_err(|e| e.to_string())?;
    let fb_cfg = FeedbackConfig {
        line_alpha: cfg.line_group_alpha,
        min_gap_ratio: args.min_gap_ratio.unwrap_or(cfg.min_gap_ratio),
        debug_layer: args.debug_layer,
        ..FeedbackConfig::default()
    };

    let mut report_pages = Vec::new();
    let mut total_flags = 0usize;
    for (i, page) in corpus.pages.iter().enumerate() {
        let (order, flags) = analyze_page(page, &lexicon, &fb_cfg);
        let plan = plan_annotations(page, &flags, &fb_cfg).map_err(|e| e.to_string())?;
        total_flags += flags.len();

        let svg = render_svg(page, &flags, &plan, &fb_cfg);
        let svg_path = if corpus.pages.len() == 1 {
            args.output.clone()
        } else {
            numbered_path(&args.output, i)
        };
        std::fs::write(&svg_path, svg)
            .map_err(|e| format!("cannot write {}: {e}", svg_path.display()))?;

        report_pages.push(serde_json::json!({
            "page_id": page.page_id,
            "reading_order": order.sequence,
            "flags": flags,
            "placements": plan.placements,
        }));
    }

    let report = serde_json::json!({
        "config": {
            "line_alpha": fb_cfg.line_alpha,
            "min_gap_ratio": fb_cfg.min_gap_ratio,
            "margin_reserve": fb_cfg.margin_reserve,
            "max_edit": fb_cfg.max_edit,
        },
        "pages": report_pages,
    });
    let json_path = args.output.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).unwrap() + "\n")
        .map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;

    println!("{total_flags} flags across {} pages", corpus.pages.len());
    Ok(if lex_warnings.is_empty() { EXIT_OK } else { EXIT_WARNINGS })
}

fn numbered_path(base: &Path, index: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("page");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("svg");
    base.with_file_name(format!("{stem}.{index}.{ext}"))
}
