//! Initial line hypotheses: an oriented anisotropic Gaussian filter bank
//! picks the dominant text orientation, Otsu on the filtered page yields
//! blobs that approximate lines, tall blobs are split, sparse blobs dropped,
//! and one least-squares line is fitted per blob.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::document::{label_components, BinaryDocument};
use crate::lines::{weighted_fit, LineModel, Variant};
use crate::math::otsu_histogram;
use crate::raster::Raster;
use crate::{Error, Result};

/// Filter-bank and blob post-processing settings. Sizes are factors of the
/// mean connected-component height `H̄` or width `W̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Orientations `-alpha_max_deg ..= alpha_max_deg` in `alpha_step_deg` steps.
    pub alpha_max_deg: f64,
    pub alpha_step_deg: f64,
    /// Filter support across the line, × `H̄`.
    pub filter_height_factor: f64,
    /// Filter support along the line, × `W̄`.
    pub filter_width_factor: f64,
    pub sigma_v_factor: f64,
    pub sigma_h_factor: f64,
    /// Blobs taller than this × `H̄` are split.
    pub overlap_factor: f64,
    /// Blobs whose ink fraction is below this are dropped.
    pub residual_ratio: f64,
    /// Filtering runs on a page downsampled by this factor; `None` picks
    /// `max(1, ⌊H̄ / 6⌋)`.
    pub downsample: Option<usize>,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            alpha_max_deg: 40.0,
            alpha_step_deg: 5.0,
            filter_height_factor: 1.0 / 3.0,
            filter_width_factor: 10.0,
            sigma_v_factor: 1.0 / 3.0,
            sigma_h_factor: 10.0 / 3.0,
            overlap_factor: 2.0,
            residual_ratio: 0.08,
            downsample: None,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        let factors = [
            self.alpha_step_deg,
            self.filter_height_factor,
            self.filter_width_factor,
            self.sigma_v_factor,
            self.sigma_h_factor,
            self.overlap_factor,
        ];
        if factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) || !(self.alpha_max_deg >= 0.0 && self.alpha_max_deg < 90.0) {
            return Err(Error::InvalidConfig(format!("init config: factors must be positive, got {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.residual_ratio) || self.downsample == Some(0) {
            return Err(Error::InvalidConfig(format!("init config: bad residual ratio or downsample in {self:?}")));
        }
        Ok(())
    }

    /// Orientations of the bank in degrees, symmetric around 0.
    pub fn alphas(&self) -> Vec<f64> {
        let k = (self.alpha_max_deg / self.alpha_step_deg + 1e-9).floor() as i64;
        (-k..=k).map(|i| i as f64 * self.alpha_step_deg).collect()
    }
}

/// Candidate line region.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub pixels: Vec<(u32, u32)>,
    /// Extent across the text orientation, in pixels.
    pub height: f64,
    /// Fraction of blob pixels that are ink.
    pub text_ratio: f64,
    /// Orientation of the filter that produced the blob, in degrees.
    pub angle_deg: f64,
}

impl Blob {
    fn new(pixels: Vec<(u32, u32)>, doc: &BinaryDocument, angle_deg: f64) -> Self {
        let (s, c) = libm::sincos(angle_deg.to_radians());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ink = 0usize;
        for &(x, y) in &pixels {
            let v = across(x as f64, y as f64, s, c);
            lo = lo.min(v);
            hi = hi.max(v);
            ink += *doc.mask().get(x as usize, y as usize) as usize;
        }
        let height = if pixels.is_empty() { 0.0 } else { hi - lo + 1.0 };
        let text_ratio = if pixels.is_empty() { 0.0 } else { ink as f64 / pixels.len() as f64 };
        Blob { pixels, height, text_ratio, angle_deg }
    }
}

/// Coordinate across a line of direction `(cos, sin)`.
fn across(x: f64, y: f64, sin: f64, cos: f64) -> f64 {
    -x * sin + y * cos
}

fn gaussian_kernel(sigma: f64, half: usize) -> Vec<f64> {
    let sigma = sigma.max(0.5);
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = i as f64 - half as f64;
            libm::exp(-0.5 * d * d / (sigma * sigma))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// 1-D zero-padded convolution with an odd kernel, same length as `src`.
fn convolve(src: &[f64], kernel: &[f64], dst: &mut [f64]) {
    let half = kernel.len() / 2;
    let n = src.len();
    for (i, out) in dst.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += src[j] * kernel[j + half - i];
        }
        *out = acc;
    }
}

/// Page resampled into the frame of orientation `α`: rows run along the
/// text direction. Columns are padded so horizontal filtering never loses mass.
struct RotatedFrame {
    sin: f64,
    cos: f64,
    cx: f64,
    cy: f64,
    ru: f64,
    rv: f64,
    pad: usize,
    width: usize,
    height: usize,
}

impl RotatedFrame {
    fn new(w: usize, h: usize, alpha_deg: f64, pad: usize) -> Self {
        let (sin, cos) = libm::sincos(alpha_deg.to_radians());
        let (hw, hh) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let ru = (hw * cos).abs() + (hh * sin).abs();
        let rv = (hw * sin).abs() + (hh * cos).abs();
        RotatedFrame {
            sin,
            cos,
            cx: hw,
            cy: hh,
            ru,
            rv,
            pad,
            width: (2.0 * ru).ceil() as usize + 1 + 2 * pad,
            height: (2.0 * rv).ceil() as usize + 1,
        }
    }

    /// Page position of frame cell `(i, j)`.
    fn to_page(&self, i: usize, j: usize) -> (f64, f64) {
        let u = i as f64 - self.pad as f64 - self.ru;
        let v = j as f64 - self.rv;
        (self.cx + u * self.cos - v * self.sin, self.cy + u * self.sin + v * self.cos)
    }

    /// Frame position of page point `(x, y)`.
    fn to_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.cx, y - self.cy);
        (dx * self.cos + dy * self.sin + self.ru + self.pad as f64, -dx * self.sin + dy * self.cos + self.rv)
    }

    fn resample(&self, src: &Raster<f64>) -> Raster<f64> {
        let mut out = Raster::filled(self.width, self.height, 0.0);
        for j in 0..self.height {
            for i in 0..self.width {
                let (x, y) = self.to_page(i, j);
                out.set(i, j, bilinear(src, x, y));
            }
        }
        out
    }
}

/// Bilinear sample with zero outside the raster.
fn bilinear(src: &Raster<f64>, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: f64, yi: f64| {
        if src.in_bounds(xi as i64, yi as i64) {
            *src.get(xi as usize, yi as usize)
        } else {
            0.0
        }
    };
    (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x0 + 1.0, y0)) + fy * ((1.0 - fx) * at(x0, y0 + 1.0) + fx * at(x0 + 1.0, y0 + 1.0))
}

/// Ink density of `d × d` blocks.
fn downsample(mask: &Raster<bool>, d: usize) -> Raster<f64> {
    let (w, h) = (mask.width().div_ceil(d), mask.height().div_ceil(d));
    let mut out = Raster::filled(w, h, 0.0);
    let mut count = Raster::filled(w, h, 0.0);
    for (x, y, &m) in mask.iter_xy() {
        let (bx, by) = (x / d, y / d);
        *count.get_mut(bx, by) += 1.0;
        if m {
            *out.get_mut(bx, by) += 1.0;
        }
    }
    for (o, c) in out.as_mut_slice().iter_mut().zip(count.as_slice()) {
        *o /= c;
    }
    out
}

/// Downsampling factor and the two 1-D kernels, in downsampled pixels.
fn bank_geometry(doc: &BinaryDocument, cfg: &InitConfig) -> (usize, Vec<f64>, Vec<f64>) {
    let (hcc, wcc) = (doc.mean_cc_height().max(1.0), doc.mean_cc_width().max(1.0));
    let d = cfg.downsample.unwrap_or(((hcc / 6.0).floor() as usize).max(1)) as f64;
    let along_half = ((cfg.filter_width_factor * wcc / d) / 2.0).ceil().max(1.0) as usize;
    let across_half = ((cfg.filter_height_factor * hcc / d) / 2.0).ceil().max(1.0) as usize;
    let kx = gaussian_kernel(cfg.sigma_h_factor * wcc / d, along_half);
    let ky = gaussian_kernel(cfg.sigma_v_factor * hcc / d, across_half);
    (d as usize, kx, ky)
}

/// Runs the oriented filter bank and returns the filtered page (full
/// resolution) for the orientation with the largest projection-profile
/// response `Σ_rows (row sum)²`, together with that orientation in degrees.
/// Ties go to the orientation closest to 0.
///
/// The along-line Gaussian has unit mass and the frame is padded, so row
/// sums only depend on the across-line kernel; the bank therefore scores
/// every orientation on its smoothed profile and filters fully only once.
pub fn best_orientation_filter(doc: &BinaryDocument, cfg: &InitConfig) -> Result<(Raster<f64>, f64)> {
    cfg.validate()?;
    let (w, h) = (doc.width(), doc.height());
    if doc.components().is_empty() {
        return Ok((Raster::filled(w, h, 0.0), 0.0));
    }
    let (d, kx, ky) = bank_geometry(doc, cfg);
    let small = downsample(doc.mask(), d);
    let pad = kx.len() / 2;

    let mut alphas = cfg.alphas();
    alphas.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &alpha in &alphas {
        let frame = RotatedFrame::new(small.width(), small.height(), alpha, 0);
        let canvas = frame.resample(&small);
        let profile: Vec<f64> = (0..canvas.height()).map(|j| canvas.row(j).iter().sum()).collect();
        let mut smooth = vec![0.0; profile.len()];
        convolve(&profile, &ky, &mut smooth);
        let response: f64 = smooth.iter().map(|v| v * v).sum();
        if response > best.0 * (1.0 + 1e-12) {
            best = (response, alpha);
        }
    }
    let alpha = best.1;

    let frame = RotatedFrame::new(small.width(), small.height(), alpha, pad);
    let canvas = frame.resample(&small);
    let mut rows = Raster::filled(frame.width, frame.height, 0.0);
    let mut buf = vec![0.0; frame.width];
    for j in 0..frame.height {
        convolve(canvas.row(j), &kx, &mut buf);
        for (i, &v) in buf.iter().enumerate() {
            rows.set(i, j, v);
        }
    }
    let mut filtered = Raster::filled(frame.width, frame.height, 0.0);
    let mut col = vec![0.0; frame.height];
    let mut out = vec![0.0; frame.height];
    for i in 0..frame.width {
        for (j, c) in col.iter_mut().enumerate() {
            *c = *rows.get(i, j);
        }
        convolve(&col, &ky, &mut out);
        for (j, &v) in out.iter().enumerate() {
            filtered.set(i, j, v);
        }
    }

    let mut back = Raster::filled(small.width(), small.height(), 0.0);
    for y in 0..small.height() {
        for x in 0..small.width() {
            let (u, v) = frame.to_frame(x as f64, y as f64);
            back.set(x, y, bilinear(&filtered, u, v).max(0.0));
        }
    }
    let mut full = Raster::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            full.set(x, y, *back.get(x / d, y / d));
        }
    }
    Ok((full, alpha))
}

/// Otsu-thresholds the filtered page and returns its 8-connected blobs.
pub fn extract_blobs(filtered: &Raster<f64>, doc: &BinaryDocument, alpha_deg: f64) -> Result<Vec<Blob>> {
    if !filtered.same_shape(doc.mask()) {
        return Err(Error::ShapeMismatch(filtered.width(), filtered.height(), doc.width(), doc.height()));
    }
    let max = filtered.as_slice().iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Ok(Vec::new());
    }
    const BINS: usize = 256;
    let bin = |v: f64| ((v / max) * (BINS - 1) as f64).round() as usize;
    let mut hist = vec![0.0; BINS];
    for &v in filtered.as_slice() {
        hist[bin(v)] += 1.0;
    }
    let t = otsu_histogram(&hist);
    let mask = filtered.map(|&v| bin(v) > t);
    let (_, components) = label_components(&mask);
    Ok(components.into_iter().map(|cc| Blob::new(cc.pixels, doc, alpha_deg)).collect())
}

/// Splits blobs taller than `overlap_factor · H̄` into `round(height /
/// (overlap_factor · H̄))` equal bands across the text direction, then drops
/// blobs whose ink fraction is below `residual_ratio`.
pub fn split_and_filter_blobs(blobs: Vec<Blob>, doc: &BinaryDocument, cfg: &InitConfig) -> Vec<Blob> {
    let limit = cfg.overlap_factor * doc.mean_cc_height();
    let mut out = Vec::new();
    for blob in blobs {
        let bands = if limit > 0.0 && blob.height > limit { (blob.height / limit).round() as usize } else { 1 };
        if bands < 2 {
            out.push(blob);
            continue;
        }
        let (s, c) = libm::sincos(blob.angle_deg.to_radians());
        let lo = blob.pixels.iter().map(|&(x, y)| across(x as f64, y as f64, s, c)).fold(f64::INFINITY, f64::min);
        let step = blob.height / bands as f64;
        let mut parts = vec![Vec::new(); bands];
        for &(x, y) in &blob.pixels {
            let k = (((across(x as f64, y as f64, s, c) - lo) / step) as usize).min(bands - 1);
            parts[k].push((x, y));
        }
        out.extend(parts.into_iter().filter(|p| !p.is_empty()).map(|p| Blob::new(p, doc, blob.angle_deg)));
    }
    out.retain(|b| b.text_ratio >= cfg.residual_ratio);
    out
}

/// One least-squares line per blob, over the blob pixels, with uniform
/// priors. Lines are returned in blob order.
pub fn init_lines(blobs: &[Blob]) -> Vec<LineModel> {
    let prior = 1.0 / blobs.len().max(1) as f64;
    blobs
        .iter()
        .filter_map(|b| weighted_fit(b.pixels.iter().map(|&(x, y)| (x as f64, y as f64, 1.0)), Variant::Shear))
        .map(|mut l| {
            l.prior = prior;
            l
        })
        .collect()
}

/// The whole initialization: filter bank, blobs, split/filter, line fits.
pub fn initial_lines(doc: &BinaryDocument, cfg: &InitConfig) -> Result<(Vec<Blob>, Vec<LineModel>, f64)> {
    let (filtered, alpha) = best_orientation_filter(doc, cfg)?;
    let blobs = split_and_filter_blobs(extract_blobs(&filtered, doc, alpha)?, doc, cfg);
    let lines = init_lines(&blobs);
    Ok((blobs, lines, alpha))
}
