//! The three subcommands: segment, evaluate, synth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use textline_core::eval::{match_score, MatchReport};
use textline_core::segment;
use textline_core::synth::generate;

use crate::config::RunConfig;
use crate::formats::{diagnostics_report, evaluation_table, segmentation_report, SynthFile};
use crate::io::{load_document, read_labels, write_labels, write_overlay, write_page};

/// Suffixes of files this tool writes; inputs carrying them are skipped
/// when a directory is expanded.
const OUTPUT_SUFFIXES: [&str; 3] = [".labels.png", ".gt.png", ".overlay.png"];

fn is_page(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let lower = name.to_ascii_lowercase();
    (lower.ends_with(".png") || lower.ends_with(".pgm")) && !OUTPUT_SUFFIXES.iter().any(|s| lower.ends_with(s))
}

/// Expands directories into their page images (sorted); files are kept as given.
pub fn expand_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut pages: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("cannot list {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_page(p))
                .collect();
            pages.sort();
            out.extend(pages);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("page");
    name.rsplit_once('.').map(|(s, _)| s).unwrap_or(name).to_string()
}

/// Outcome of one document in a `segment` run.
#[derive(Debug)]
pub struct PageOutcome {
    pub input: PathBuf,
    pub lines: usize,
    pub warning: Option<String>,
}

/// Segments one page and writes its outputs into `out_dir`.
pub fn segment_page(input: &Path, out_dir: &Path, run: &RunConfig) -> anyhow::Result<PageOutcome> {
    let doc = load_document(input, run.binarize)?;
    let result = segment(&doc, &run.em, &run.init).with_context(|| format!("segmenting {}", input.display()))?;
    let name = stem(input);
    write_labels(&out_dir.join(format!("{name}.labels.png")), &result.pixel_labels)?;
    let report_path = out_dir.join(format!("{name}.report.txt"));
    fs::write(&report_path, segmentation_report(&name, &result))
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    if run.overlay {
        write_overlay(&out_dir.join(format!("{name}.overlay.png")), &result.pixel_labels, &result.lines)?;
    }
    if run.diagnostics {
        let path = out_dir.join(format!("{name}.diagnostics.txt"));
        fs::write(&path, diagnostics_report(&result)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let warning = if doc.text_pixel_count() == 0 {
        Some("no text pixels; wrote an empty label raster".to_string())
    } else if !result.converged {
        Some(format!("EM stopped after {} iterations without converging", result.iterations))
    } else {
        None
    };
    Ok(PageOutcome { input: input.to_path_buf(), lines: result.lines.len(), warning })
}

/// Segments every input, in parallel over documents. Stops at the first
/// I/O or internal error; poor segmentations are never an error.
pub fn cmd_segment(inputs: &[PathBuf], out_dir: &Path, run: &RunConfig) -> anyhow::Result<Vec<PageOutcome>> {
    let pages = expand_inputs(inputs)?;
    if pages.is_empty() {
        bail!("no input images");
    }
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(run.threads).build()?;
    pool.install(|| pages.par_iter().map(|p| segment_page(p, out_dir, run)).collect())
}

/// Label rasters in `dir` keyed by stem, taking the first suffix in
/// `suffixes` that a stem has.
fn label_files(dir: &Path, suffixes: &[&str]) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut found: BTreeMap<String, (usize, PathBuf)> = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        for (rank, suffix) in suffixes.iter().enumerate() {
            if let Some(stem) = name.strip_suffix(suffix) {
                let better = found.get(stem).is_none_or(|(r, _)| rank < *r);
                if better {
                    found.insert(stem.to_string(), (rank, path.clone()));
                }
                break;
            }
        }
    }
    Ok(found.into_iter().map(|(k, (_, p))| (k, p)).collect())
}

/// Pairs predictions (`<stem>.labels.png`) with ground truth
/// (`<stem>.gt.png`). Either directory may hold the other kind instead,
/// so a ground-truth directory can be scored against itself.
pub fn pair_files(pred_dir: &Path, gt_dir: &Path) -> anyhow::Result<Vec<(String, PathBuf, PathBuf)>> {
    let pred = label_files(pred_dir, &[".labels.png", ".gt.png"])?;
    let gt = label_files(gt_dir, &[".gt.png", ".labels.png"])?;
    if pred.is_empty() && gt.is_empty() {
        bail!("no label rasters in {} or {}", pred_dir.display(), gt_dir.display());
    }
    let unpaired: Vec<&String> =
        pred.keys().filter(|k| !gt.contains_key(*k)).chain(gt.keys().filter(|k| !pred.contains_key(*k))).collect();
    if !unpaired.is_empty() {
        bail!("unpaired documents: {}", unpaired.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
    }
    Ok(pred.into_iter().map(|(k, p)| {
        let g = gt[&k].clone();
        (k, p, g)
    }).collect())
}

/// Scores every pair and returns per-document reports and the pooled total.
pub fn cmd_evaluate(pred_dir: &Path, gt_dir: &Path, threshold: f64) -> anyhow::Result<(Vec<(String, MatchReport)>, MatchReport)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        bail!("threshold {threshold} outside (0, 1]");
    }
    let rows: Vec<(String, MatchReport)> = pair_files(pred_dir, gt_dir)?
        .into_iter()
        .map(|(name, p, g)| {
            let report = match_score(&read_labels(&p)?, &read_labels(&g)?, threshold)
                .with_context(|| format!("scoring {name}"))?;
            Ok((name, report))
        })
        .collect::<anyhow::Result<_>>()?;
    let reports: Vec<MatchReport> = rows.iter().map(|(_, r)| r.clone()).collect();
    let total = MatchReport::aggregate(&reports);
    Ok((rows, total))
}

pub fn evaluate_table(rows: &[(String, MatchReport)], total: &MatchReport) -> String {
    evaluation_table(rows, total)
}

/// Writes `count` page / ground-truth pairs; page `k` uses seed `seed + k`.
pub fn cmd_synth(spec_file: &Path, count: usize, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let text = fs::read_to_string(spec_file).with_context(|| format!("cannot read {}", spec_file.display()))?;
    let file = SynthFile::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", spec_file.display()))?;
    let base = file.to_spec();
    base.validate().with_context(|| format!("invalid spec {}", spec_file.display()))?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut written = Vec::with_capacity(count);
    for k in 0..count {
        let spec = textline_core::synth::SynthSpec { seed: base.seed.wrapping_add(k as u64), ..base.clone() };
        let (doc, gt) = generate(&spec).with_context(|| format!("generating page {k}"))?;
        let page = out_dir.join(format!("synth_{k:04}.png"));
        write_page(&page, &doc)?;
        write_labels(&out_dir.join(format!("synth_{k:04}.gt.png")), &gt)?;
        written.push(page);
    }
    Ok(written)
}
