//! Text formats: moments files, `key=value` reports, the evaluation table
//! and TOML descriptions of synthetic pages.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use textline_core::eval::MatchReport;
use textline_core::mrf::{Moments, PAIRWISE_CASES};
use textline_core::synth::SynthSpec;
use textline_core::SegmentationResult;

use crate::IoError;

/// Parses a moments file: three whitespace-separated reals, the target
/// frequencies of equal, adjacent and farther label pairs.
pub fn parse_moments(text: &str) -> Result<[f64; PAIRWISE_CASES], String> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<_, _>>()?;
    let m: [f64; PAIRWISE_CASES] =
        values.as_slice().try_into().map_err(|_| format!("expected {PAIRWISE_CASES} values, found {}", values.len()))?;
    Moments::new(m, Vec::new()).map_err(|e| e.to_string())?;
    Ok(m)
}

pub fn read_moments(path: &Path) -> Result<[f64; PAIRWISE_CASES], IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::Read(path.to_path_buf(), e))?;
    parse_moments(&text).map_err(|msg| IoError::Decode(path.to_path_buf(), msg))
}

/// Per-page report: one `key=value` pair per line, lines listed as
/// `line.<id>=a b c sigma_t2 sigma_s2 prior`.
pub fn segmentation_report(name: &str, result: &SegmentationResult) -> String {
    let d = &result.diagnostics;
    let mut out = String::new();
    let _ = writeln!(out, "document={name}");
    let _ = writeln!(out, "width={}", result.pixel_labels.width());
    let _ = writeln!(out, "height={}", result.pixel_labels.height());
    let _ = writeln!(out, "alpha_deg={}", d.alpha_deg);
    let _ = writeln!(out, "samples={}", d.samples);
    let _ = writeln!(out, "regions={}", d.regions);
    let _ = writeln!(out, "initial_lines={}", d.initial_lines);
    let _ = writeln!(out, "lines={}", result.lines.len());
    let _ = writeln!(out, "iterations={}", result.iterations);
    let _ = writeln!(out, "converged={}", result.converged);
    for (k, l) in result.lines.iter().enumerate() {
        let _ = writeln!(out, "line.{}={} {} {} {} {} {}", k + 1, l.a, l.b, l.c, l.sigma_t2, l.sigma_s2, l.prior);
    }
    out
}

/// Diagnostics: per EM group, then one record per learning step.
pub fn diagnostics_report(result: &SegmentationResult) -> String {
    let d = &result.diagnostics;
    let mut out = String::new();
    for (g, r) in d.groups.iter().enumerate() {
        let _ = writeln!(
            out,
            "group={g} regions={} vertices={} edges={} initial_lines={} after_prune={} final_lines={} iterations={} converged={}",
            r.regions, r.vertices, r.edges, r.initial_lines, r.after_prune, r.final_lines, r.iterations, r.converged
        );
        if let Some(last) = r.prior_trace.last() {
            let priors: Vec<String> = last.iter().map(|p| format!("{p:.6}")).collect();
            let _ = writeln!(out, "group={g} final_priors={}", priors.join(" "));
        }
    }
    for (k, s) in d.armijo.iter().enumerate() {
        let _ = writeln!(out, "armijo={k} dual_before={} dual_after={} step={}", s.dual_before, s.dual_after, s.step);
    }
    let _ = writeln!(out, "armijo_violations={}", d.armijo_violations(1e-12));
    out
}

/// Fixed-width table in the layout of the usual contest tables: one row per
/// document and a pooled total, followed by the 95% interval of FM.
pub fn evaluation_table(rows: &[(String, MatchReport)], total: &MatchReport) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "document", "N", "M", "o2o", "DR(%)", "RA(%)", "FM(%)");
    let row = |out: &mut String, name: &str, r: &MatchReport| {
        let _ = writeln!(
            out,
            "{:<width$} {:>6} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}",
            name, r.ground_truth, r.detected, r.one_to_one, r.dr, r.ra, r.fm
        );
    };
    for (name, r) in rows {
        row(&mut out, name, r);
    }
    row(&mut out, "total", total);
    match total.ci95 {
        Some((lo, hi)) => {
            let _ = writeln!(out, "FM 95% CI: [{lo:.2}, {hi:.2}]");
        }
        None => {
            let _ = writeln!(out, "FM 95% CI: n/a (fewer than 2 documents)");
        }
    }
    out
}

/// TOML form of [`SynthSpec`]. Missing keys take the generator defaults;
/// `regions` nests further specs placed at `x, y` with size `width × height`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub line_count: Option<usize>,
    pub line_height: Option<f64>,
    pub gap_factor: Option<f64>,
    pub skew_deg: Option<f64>,
    pub curvature_amp: Option<f64>,
    pub curvature_period: Option<f64>,
    pub touch_probability: Option<f64>,
    pub diacritic_rate: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub regions: Vec<SynthRegion>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRegion {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub spec: SynthFile,
}

impl SynthFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Applies the file over the defaults. Region specs default to the
    /// region's own size.
    pub fn to_spec(&self) -> SynthSpec {
        self.to_spec_sized(None)
    }

    fn to_spec_sized(&self, size: Option<(usize, usize)>) -> SynthSpec {
        let d = SynthSpec::default();
        let (dw, dh) = size.unwrap_or((d.width, d.height));
        SynthSpec {
            width: self.width.unwrap_or(dw),
            height: self.height.unwrap_or(dh),
            line_count: self.line_count.unwrap_or(d.line_count),
            line_height: self.line_height.unwrap_or(d.line_height),
            gap_factor: self.gap_factor.unwrap_or(d.gap_factor),
            skew_deg: self.skew_deg.unwrap_or(d.skew_deg),
            curvature_amp: self.curvature_amp.unwrap_or(d.curvature_amp),
            curvature_period: self.curvature_period.or(d.curvature_period),
            touch_probability: self.touch_probability.unwrap_or(d.touch_probability),
            diacritic_rate: self.diacritic_rate.unwrap_or(d.diacritic_rate),
            regions: self
                .regions
                .iter()
                .map(|r| (r.x, r.y, r.width, r.height, r.spec.to_spec_sized(Some((r.width, r.height)))))
                .collect(),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_file_examples() {
        assert_eq!(parse_moments("0.9 0.09\n0.01\n").unwrap(), [0.9, 0.09, 0.01]);
        assert!(parse_moments("0.9 0.09").is_err());
        assert!(parse_moments("0.9 0.2 0.1").is_err());
        assert!(parse_moments("a b c").is_err());
    }

    #[test]
    fn synth_file_defaults_and_regions() {
        let f = SynthFile::parse("line_count = 3\n[[regions]]\nx = 0\ny = 0\nwidth = 400\nheight = 500\n[regions.spec]\nline_count = 2\n")
            .unwrap();
        let spec = f.to_spec();
        assert_eq!(spec.line_count, 3);
        assert_eq!(spec.width, SynthSpec::default().width);
        assert_eq!(spec.regions.len(), 1);
        let (_, _, _, _, inner) = &spec.regions[0];
        assert_eq!((inner.width, inner.height, inner.line_count), (400, 500, 2));
        assert!(SynthFile::parse("colour = 3").is_err());
    }
}
