//! Contest-style evaluation of line label rasters: MatchScore one-to-one
//! matching, detection rate / recognition accuracy / F-measure, pixel-level
//! precision and recall, and normal-approximation confidence intervals.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::math::normal_quantile;
use crate::raster::Raster;
use crate::{Error, Result};

/// MatchScore acceptance threshold used by the contest tool.
pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 0.95;

/// Line-level matching summary. Rates are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// Detected lines `M`.
    pub detected: usize,
    /// Ground-truth lines `N`.
    pub ground_truth: usize,
    pub one_to_one: usize,
    pub dr: f64,
    pub ra: f64,
    pub fm: f64,
    pub per_doc_fm: Vec<f64>,
    /// 95% interval over `per_doc_fm`, when at least two documents are present.
    pub ci95: Option<(f64, f64)>,
}

impl MatchReport {
    fn from_counts(detected: usize, ground_truth: usize, one_to_one: usize) -> Self {
        let dr = if ground_truth > 0 { 100.0 * one_to_one as f64 / ground_truth as f64 } else { 0.0 };
        let ra = if detected > 0 { 100.0 * one_to_one as f64 / detected as f64 } else { 0.0 };
        let fm = if dr + ra > 0.0 { 2.0 * dr * ra / (dr + ra) } else { 0.0 };
        MatchReport { detected, ground_truth, one_to_one, dr, ra, fm, per_doc_fm: alloc::vec![fm], ci95: None }
    }

    /// Pools several documents: counts are summed, rates recomputed from the
    /// totals, and the interval is taken over the per-document F-measures.
    pub fn aggregate(reports: &[MatchReport]) -> MatchReport {
        let sum = |f: fn(&MatchReport) -> usize| reports.iter().map(f).sum::<usize>();
        let mut total = MatchReport::from_counts(sum(|r| r.detected), sum(|r| r.ground_truth), sum(|r| r.one_to_one));
        total.per_doc_fm = reports.iter().flat_map(|r| r.per_doc_fm.iter().copied()).collect();
        total.ci95 = confidence_interval(&total.per_doc_fm, 0.05).ok();
        total
    }
}

/// Pixel counts per label and per (gt, pred) label pair over non-zero pixels.
struct Overlaps {
    gt: BTreeMap<u32, usize>,
    pred: BTreeMap<u32, usize>,
    pairs: BTreeMap<(u32, u32), usize>,
}

fn overlaps(pred: &Raster<u32>, gt: &Raster<u32>) -> Result<Overlaps> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    let mut o = Overlaps { gt: BTreeMap::new(), pred: BTreeMap::new(), pairs: BTreeMap::new() };
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        if g != 0 {
            *o.gt.entry(g).or_default() += 1;
        }
        if p != 0 {
            *o.pred.entry(p).or_default() += 1;
        }
        if g != 0 && p != 0 {
            *o.pairs.entry((g, p)).or_default() += 1;
        }
    }
    Ok(o)
}

/// MatchScore table `|G_i ∩ R_j| / |G_i ∪ R_j|` and one-to-one counting:
/// a pair matches when its score reaches `accept` and each side has no other
/// partner at or above the threshold.
pub fn match_score(pred: &Raster<u32>, gt: &Raster<u32>, accept: f64) -> Result<MatchReport> {
    let o = overlaps(pred, gt)?;
    let above: Vec<(u32, u32)> = o
        .pairs
        .iter()
        .filter(|&(&(g, p), &inter)| {
            let union = o.gt[&g] + o.pred[&p] - inter;
            inter as f64 / union as f64 >= accept
        })
        .map(|(&k, _)| k)
        .collect();
    let mut gt_hits: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_hits: BTreeMap<u32, usize> = BTreeMap::new();
    for &(g, p) in &above {
        *gt_hits.entry(g).or_default() += 1;
        *pred_hits.entry(p).or_default() += 1;
    }
    let o2o = above.iter().filter(|(g, p)| gt_hits[g] == 1 && pred_hits[p] == 1).count();
    Ok(MatchReport::from_counts(o.pred.len(), o.gt.len(), o2o))
}

/// Pixel precision, recall and F-measure after assigning predicted lines to
/// ground-truth lines greedily by overlap (ties: lowest gt id, then lowest
/// predicted id).
pub fn pixel_prf(pred: &Raster<u32>, gt: &Raster<u32>) -> Result<(f64, f64, f64)> {
    let o = overlaps(pred, gt)?;
    let mut pairs: Vec<((u32, u32), usize)> = o.pairs.iter().map(|(&k, &v)| (k, v)).collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let (mut used_g, mut used_p) = (BTreeMap::new(), BTreeMap::new());
    let mut agree = 0usize;
    for ((g, p), n) in pairs {
        if used_g.contains_key(&g) || used_p.contains_key(&p) {
            continue;
        }
        used_g.insert(g, ());
        used_p.insert(p, ());
        agree += n;
    }
    let pred_fg: usize = o.pred.values().sum();
    let gt_fg: usize = o.gt.values().sum();
    let precision = if pred_fg > 0 { agree as f64 / pred_fg as f64 } else { 0.0 };
    let recall = if gt_fg > 0 { agree as f64 / gt_fg as f64 } else { 0.0 };
    let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok((precision, recall, f))
}

/// Half width `z_{1-α/2} s / √n` of the normal-approximation interval.
pub fn half_width(std_dev: f64, n: usize, alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0) * std_dev / (n as f64).sqrt()
}

/// `mean ± z_{1-α/2} s / √n` with the sample standard deviation `s`.
pub fn confidence_interval(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidConfig(alloc::format!("confidence interval needs at least 2 values, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("alpha {alpha} outside (0, 1)")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let h = half_width(var.sqrt(), n, alpha);
    Ok((mean - h, mean + h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bands(width: usize, labels: &[u32]) -> Raster<u32> {
        let mut data = Vec::new();
        for &l in labels {
            data.extend(core::iter::repeat_n(l, width));
        }
        Raster::from_vec(width, labels.len(), data)
    }

    #[test]
    fn identity_is_perfect() {
        let gt = bands(10, &[0, 1, 1, 0, 2, 2, 0, 3, 0]);
        let r = match_score(&gt, &gt, DEFAULT_ACCEPT_THRESHOLD).unwrap();
        assert_eq!((r.detected, r.ground_truth, r.one_to_one), (3, 3, 3));
        assert_eq!((r.dr, r.ra, r.fm), (100.0, 100.0, 100.0));
        assert_eq!(pixel_prf(&gt, &gt).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn split_line_does_not_match() {
        let gt = Raster::from_vec(100, 1, vec![1; 100]);
        let mut pred = vec![1; 50];
        pred.extend(vec![2; 50]);
        let pred = Raster::from_vec(100, 1, pred);
        let r = match_score(&pred, &gt, DEFAULT_ACCEPT_THRESHOLD).unwrap();
        assert_eq!((r.detected, r.ground_truth, r.one_to_one), (2, 1, 0));
        assert_eq!(r.fm, 0.0);
    }

    #[test]
    fn empty_prediction() {
        let gt = bands(4, &[1, 2]);
        let pred = Raster::filled(4, 2, 0);
        let r = match_score(&pred, &gt, DEFAULT_ACCEPT_THRESHOLD).unwrap();
        assert_eq!((r.detected, r.one_to_one, r.dr, r.ra, r.fm), (0, 0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn relabeling_is_invariant() {
        let gt = bands(6, &[1, 1, 2, 3, 3]);
        let pred = bands(6, &[7, 7, 9, 4, 4]);
        let r = match_score(&pred, &gt, DEFAULT_ACCEPT_THRESHOLD).unwrap();
        assert_eq!(r.one_to_one, 3);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(matches!(
            match_score(&Raster::filled(2, 2, 0), &Raster::filled(3, 2, 0), 0.95),
            Err(Error::ShapeMismatch(2, 2, 3, 2))
        ));
    }

    #[test]
    fn half_coverage_prf() {
        let gt = bands(10, &[1, 1, 2, 2]);
        let pred = bands(10, &[1, 0, 2, 0]);
        let (p, r, f) = pixel_prf(&pred, &gt).unwrap();
        assert_eq!((p, r), (1.0, 0.5));
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        let noise = bands(10, &[0, 0, 0, 0, 5]);
        let gt5 = bands(10, &[1, 1, 2, 2, 0]);
        assert_eq!(pixel_prf(&noise, &gt5).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn interval_arithmetic() {
        assert_eq!(confidence_interval(&[97.0; 5], 0.05).unwrap(), (97.0, 97.0));
        let (lo, hi) = confidence_interval(&[90.0, 100.0], 0.05).unwrap();
        let h = 1.959963984540054 * 50f64.sqrt() / 2f64.sqrt();
        assert!((lo - (95.0 - h)).abs() < 1e-9 && (hi - (95.0 + h)).abs() < 1e-9);
        assert!((h - 9.8).abs() < 0.01);
        // n = 150 and s ≈ 7.8 reproduce a ±1.25 interval around 97.05.
        let s = 1.25 * 150f64.sqrt() / 1.959963984540054;
        assert!((s - 7.81).abs() < 0.01);
        assert!((half_width(s, 150, 0.05) - 1.25).abs() < 1e-9);
        assert!(confidence_interval(&[1.0], 0.05).is_err());
    }

    #[test]
    fn aggregate_pools_counts() {
        let a = MatchReport::from_counts(3, 3, 3);
        let b = MatchReport::from_counts(4, 2, 1);
        let t = MatchReport::aggregate(&[a, b]);
        assert_eq!((t.detected, t.ground_truth, t.one_to_one), (7, 5, 4));
        assert_eq!(t.per_doc_fm.len(), 2);
        assert!(t.ci95.is_some());
    }
}
