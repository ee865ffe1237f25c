//! Synthetic handwriting-like pages with per-pixel line ground truth.
//!
//! Each line is a run of "words"; a word is a chain of overlapping elliptic
//! rings (letters) with occasional ascender/descender strokes, so every word
//! is one connected component. Lines follow
//! `y = tan(skew)·(x − x_mid) + y_l + amp·sin(2πx / period)`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::document::BinaryDocument;
use crate::raster::Raster;
use crate::{Error, Result};

/// Page description. `gap_factor · line_height` is the blank space between
/// the bodies of successive lines, so line centres are
/// `(1 + gap_factor) · line_height` apart.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub line_count: usize,
    pub line_height: f64,
    pub gap_factor: f64,
    pub skew_deg: f64,
    /// Amplitude of the sinusoidal vertical displacement, in pixels.
    pub curvature_amp: f64,
    /// Period of the displacement; `None` uses the page width.
    pub curvature_period: Option<f64>,
    pub touch_probability: f64,
    pub diacritic_rate: f64,
    /// Extra text blocks `(x, y, w, h, spec)` drawn inside the page. Their
    /// `width`/`height` are replaced by the rectangle size and their `seed`
    /// is derived from the parent's.
    pub regions: Vec<(usize, usize, usize, usize, SynthSpec)>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 1000,
            height: 800,
            line_count: 6,
            line_height: 30.0,
            gap_factor: 3.0,
            skew_deg: 0.0,
            curvature_amp: 0.0,
            curvature_period: None,
            touch_probability: 0.0,
            diacritic_rate: 0.0,
            regions: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synth spec: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("page size must be positive");
        }
        if !(self.line_height >= 4.0 && self.line_height.is_finite()) {
            return bad("line_height must be at least 4 px");
        }
        if !(self.gap_factor > 0.0 && self.gap_factor.is_finite()) {
            return bad("gap_factor must be positive");
        }
        if !(0.0..=1.0).contains(&self.touch_probability) || !(0.0..=1.0).contains(&self.diacritic_rate) {
            return bad("touch_probability and diacritic_rate must lie in [0, 1]");
        }
        if !(self.skew_deg.abs() < 60.0) || !self.curvature_amp.is_finite() || self.curvature_amp < 0.0 {
            return bad("skew must be below 60 degrees and curvature amplitude non-negative");
        }
        if matches!(self.curvature_period, Some(p) if !(p > 0.0)) {
            return bad("curvature period must be positive");
        }
        for (x, y, w, h, _) in &self.regions {
            if x + w > self.width || y + h > self.height || *w == 0 || *h == 0 {
                return bad("region rectangle outside the page");
            }
        }
        Ok(())
    }
}

/// Renders the page and returns it with a ground-truth raster whose pixel
/// values are line ids (1-based, 0 = background).
pub fn generate(spec: &SynthSpec) -> Result<(BinaryDocument, Raster<u32>)> {
    spec.validate()?;
    let mut canvas = Canvas { mask: Raster::filled(spec.width, spec.height, false), gt: Raster::filled(spec.width, spec.height, 0) };
    let mut next_id = 1u32;
    render_block(&mut canvas, spec, 0, 0, &mut next_id)?;
    for (k, (x, y, w, h, sub)) in spec.regions.iter().enumerate() {
        let mut sub = sub.clone();
        sub.width = *w;
        sub.height = *h;
        sub.seed = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1);
        sub.regions.clear();
        sub.validate()?;
        render_block(&mut canvas, &sub, *x, *y, &mut next_id)?;
    }
    let doc = BinaryDocument::from_mask(canvas.mask)?;
    Ok((doc, canvas.gt))
}

struct Canvas {
    mask: Raster<bool>,
    gt: Raster<u32>,
}

impl Canvas {
    /// First writer keeps the ground-truth label of a pixel.
    fn paint(&mut self, x: i64, y: i64, id: u32) {
        if self.mask.in_bounds(x, y) {
            let (x, y) = (x as usize, y as usize);
            self.mask.set(x, y, true);
            if *self.gt.get(x, y) == 0 {
                self.gt.set(x, y, id);
            }
        }
    }

    /// Elliptic ring with outer semi-axes `(rx, ry)` and stroke `t`.
    fn ring(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, t: f64, id: u32) {
        let (ix, iy) = ((rx - t).max(0.0), (ry - t).max(0.0));
        for y in (cy - ry).floor() as i64..=(cy + ry).ceil() as i64 {
            for x in (cx - rx).floor() as i64..=(cx + rx).ceil() as i64 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let outer = (dx / rx) * (dx / rx) + (dy / ry) * (dy / ry);
                let inner = if ix > 0.0 && iy > 0.0 { (dx / ix) * (dx / ix) + (dy / iy) * (dy / iy) } else { 0.0 };
                if outer <= 1.0 && (ix == 0.0 || iy == 0.0 || inner > 1.0) {
                    self.paint(x, y, id);
                }
            }
        }
    }

    /// Vertical stroke of width `t` from `y0` to `y1` around column `x`.
    fn stroke(&mut self, x: f64, y0: f64, y1: f64, t: f64, id: u32) {
        let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        for y in lo.round() as i64..=hi.round() as i64 {
            for x in (x - t / 2.0).round() as i64..(x + t / 2.0).round() as i64 + 1 {
                self.paint(x, y, id);
            }
        }
    }

    fn disc(&mut self, cx: f64, cy: f64, r: f64, id: u32) {
        for y in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
            for x in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.paint(x, y, id);
                }
            }
        }
    }
}

/// Letters of one line, kept so touching strokes can target a letter of the
/// next line.
struct Letter {
    x: f64,
    y: f64,
    ry: f64,
}

fn render_block(canvas: &mut Canvas, spec: &SynthSpec, ox: usize, oy: usize, next_id: &mut u32) -> Result<()> {
    if spec.line_count == 0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let lh = spec.line_height;
    let pitch = (1.0 + spec.gap_factor) * lh;
    let slope = spec.skew_deg.to_radians().tan();
    let period = spec.curvature_period.unwrap_or(w);
    let margin = (0.04 * w).max(lh);
    let x_mid = w / 2.0;
    let centre = |x: f64, yl: f64| slope * (x - x_mid) + yl + spec.curvature_amp * libm::sin(2.0 * core::f64::consts::PI * x / period);

    // Vertical extent: body half-height lh/2, strokes and dots add up to 0.9·lh.
    let drift = slope.abs() * (x_mid - margin) + spec.curvature_amp + 0.9 * lh;
    let block = (spec.line_count - 1) as f64 * pitch;
    let first = h / 2.0 - block / 2.0;
    if first - drift < 0.0 || first + block + drift > h || w <= 2.0 * margin + 4.0 * lh {
        return Err(Error::InvalidConfig(format!(
            "synth spec: {} lines of height {lh} with pitch {pitch} do not fit a {}x{} block",
            spec.line_count, spec.width, spec.height
        )));
    }

    let t = (0.12 * lh).max(2.0);
    // Strokes may reach into the inter-line gap but stop well short of the next line.
    let stroke_len = 0.3 * lh * spec.gap_factor.clamp(0.0, 1.0);
    let (ox, oy) = (ox as f64, oy as f64);
    let mut letters: Vec<Vec<Letter>> = Vec::with_capacity(spec.line_count);
    let mut ids = Vec::with_capacity(spec.line_count);
    for i in 0..spec.line_count {
        let id = *next_id;
        *next_id += 1;
        ids.push(id);
        let yl = first + i as f64 * pitch;
        let start = margin + rng.random_range(0.0..0.1) * w;
        let end = w - margin - rng.random_range(0.0..0.2) * w;
        let mut row = Vec::new();
        let mut x = start;
        while x < end {
            // One word.
            let letters_in_word = rng.random_range(2..=7);
            let mut prev_rx = 0.0f64;
            for k in 0..letters_in_word {
                let rx = rng.random_range(0.25..0.45) * lh;
                let ry = rng.random_range(0.35..0.5) * lh;
                if k > 0 {
                    x += 0.8 * (prev_rx + rx);
                }
                if x + rx > end {
                    break;
                }
                let y = centre(x, yl);
                canvas.ring(ox + x, oy + y, rx, ry, t, id);
                let roll: f64 = rng.random();
                if stroke_len > 0.0 && roll < 0.15 {
                    canvas.stroke(ox + x + rx - t / 2.0, oy + y, oy + y - ry - stroke_len, t, id);
                } else if stroke_len > 0.0 && roll < 0.25 {
                    canvas.stroke(ox + x - rx + t / 2.0, oy + y, oy + y + ry + stroke_len, t, id);
                }
                if rng.random_bool(spec.diacritic_rate) {
                    let r = (0.08 * lh).max(1.5);
                    canvas.disc(ox + x, oy + y - ry - 0.25 * lh - r, r, id);
                }
                row.push(Letter { x, y, ry });
                prev_rx = rx;
            }
            x += prev_rx + rng.random_range(0.6..1.2) * lh;
        }
        letters.push(row);
    }

    // Touching: a descender of line i reaching the body of line i + 1.
    for i in 0..spec.line_count.saturating_sub(1) {
        if !rng.random_bool(spec.touch_probability) || letters[i].is_empty() || letters[i + 1].is_empty() {
            continue;
        }
        let pick = rng.random_range(0..letters[i].len());
        let from = &letters[i][pick];
        let target = letters[i + 1].iter().min_by(|a, b| (a.x - from.x).abs().total_cmp(&(b.x - from.x).abs())).unwrap();
        let x = (from.x + target.x) / 2.0;
        canvas.stroke(ox + x, oy + from.y + from.ry * 0.5, oy + target.y - target.ry * 0.5, t, ids[i]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn labels(gt: &Raster<u32>) -> BTreeSet<u32> {
        gt.as_slice().iter().copied().filter(|&l| l != 0).collect()
    }

    #[test]
    fn single_line_has_one_label() {
        let spec = SynthSpec { line_count: 1, ..SynthSpec::default() };
        let (doc, gt) = generate(&spec).unwrap();
        assert_eq!(labels(&gt), BTreeSet::from([1]));
        // Ground truth covers exactly the ink.
        for (m, g) in doc.mask().as_slice().iter().zip(gt.as_slice()) {
            assert_eq!(*m, *g != 0);
        }
    }

    #[test]
    fn spaced_lines_are_separable_bands() {
        let spec = SynthSpec { line_count: 5, gap_factor: 3.0, seed: 4, ..SynthSpec::default() };
        let (doc, gt) = generate(&spec).unwrap();
        assert_eq!(labels(&gt).len(), 5);
        // Row profile: ink rows of each label form disjoint, ordered intervals.
        let mut spans = [(usize::MAX, 0usize); 6];
        for (x, y, &l) in gt.iter_xy() {
            let _ = x;
            if l != 0 {
                let s = &mut spans[l as usize];
                s.0 = s.0.min(y);
                s.1 = s.1.max(y);
            }
        }
        for l in 1..5 {
            assert!(spans[l].1 < spans[l + 1].0, "bands {l} and {} overlap", l + 1);
        }
        let empty_rows = (0..doc.height()).filter(|&y| doc.mask().row(y).iter().all(|&p| !p)).count();
        assert!(empty_rows > 0);
    }

    #[test]
    fn touching_lines_share_a_component() {
        let spec = SynthSpec { line_count: 2, touch_probability: 1.0, seed: 9, ..SynthSpec::default() };
        let (doc, gt) = generate(&spec).unwrap();
        let mixed = doc.components().iter().any(|cc| {
            let ids: BTreeSet<u32> = cc.pixels.iter().map(|&(x, y)| *gt.get(x as usize, y as usize)).collect();
            ids.len() >= 2
        });
        assert!(mixed);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec { skew_deg: 3.0, curvature_amp: 5.0, diacritic_rate: 0.2, seed: 11, ..SynthSpec::default() };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.1, b.1);
        let c = generate(&SynthSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn default_coverage_is_moderate() {
        for seed in 0..5 {
            let (doc, _) = generate(&SynthSpec { seed, ..SynthSpec::default() }).unwrap();
            let cover = doc.text_pixel_count() as f64 / (doc.width() * doc.height()) as f64;
            assert!((0.02..=0.20).contains(&cover), "coverage {cover}");
        }
    }

    #[test]
    fn regions_continue_ids() {
        let column = SynthSpec { line_count: 3, line_height: 20.0, ..SynthSpec::default() };
        let spec = SynthSpec {
            line_count: 0,
            regions: vec![(0, 0, 480, 800, column.clone()), (520, 0, 480, 800, column)],
            ..SynthSpec::default()
        };
        let (_, gt) = generate(&spec).unwrap();
        assert_eq!(labels(&gt), BTreeSet::from([1, 2, 3, 4, 5, 6]));
        for (x, _, &l) in gt.iter_xy() {
            if l != 0 {
                assert_eq!(l <= 3, x < 480);
            }
        }
    }

    #[test]
    fn rejects_pages_that_do_not_fit() {
        let spec = SynthSpec { line_count: 40, ..SynthSpec::default() };
        assert!(matches!(generate(&spec), Err(Error::InvalidConfig(_))));
        assert!(generate(&SynthSpec { gap_factor: 0.0, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { touch_probability: 1.5, ..SynthSpec::default() }).is_err());
    }
}
