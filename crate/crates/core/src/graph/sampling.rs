use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SamplePoint;
use crate::document::BinaryDocument;
use crate::{Error, Result};

/// Side of the square cells used to stratify the sample.
pub const SAMPLING_CELL: usize = 32;

/// Draws `ceil(ratio * T)` distinct text pixels, stratified over square cells.
///
/// Each cell receives `floor(ratio * n_c)` points, leftover points go to the
/// cells with the largest fractional quota, and any cell holding at least
/// `ceil(ratio * cell_area)` ink pixels that still has none takes one point
/// from the best-served cell. Points are returned sorted by `(y, x)`.
pub fn sample_text_pixels(doc: &BinaryDocument, ratio: f64, seed: u64) -> Result<Vec<SamplePoint>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("sampling ratio {ratio} outside (0, 1]")));
    }
    let (w, h) = (doc.width(), doc.height());
    let cols = w.div_ceil(SAMPLING_CELL);
    let rows = h.div_ceil(SAMPLING_CELL);
    let mut cells: Vec<Vec<(u32, u32)>> = (0..cols * rows).map(|_| Vec::new()).collect();
    for (x, y, &ink) in doc.mask().iter_xy() {
        if ink {
            cells[(y / SAMPLING_CELL) * cols + x / SAMPLING_CELL].push((x as u32, y as u32));
        }
    }
    let total: usize = cells.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    // Guard against ratio * total landing a hair above an integer.
    let target = ((ratio * total as f64 - 1e-9).ceil() as usize).clamp(1, total);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alloc_count: Vec<usize> = cells.iter().map(|c| ((ratio * c.len() as f64) + 1e-9).floor() as usize).collect();
    let mut assigned: usize = alloc_count.iter().sum();
    if assigned < target {
        let mut order: Vec<(f64, u64, usize)> = cells
            .iter()
            .enumerate()
            .filter(|(i, c)| alloc_count[*i] < c.len())
            .map(|(i, c)| {
                let q = ratio * c.len() as f64;
                (q - q.floor(), rng.random::<u64>(), i)
            })
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, _, i) in order.iter().cycle().take(4 * order.len()) {
            if assigned == target {
                break;
            }
            if alloc_count[i] < cells[i].len() {
                alloc_count[i] += 1;
                assigned += 1;
            }
        }
    }
    while assigned > target {
        let i = (0..cells.len()).max_by_key(|&i| (alloc_count[i], core::cmp::Reverse(i))).unwrap();
        alloc_count[i] -= 1;
        assigned -= 1;
    }

    let min_support = (ratio * (SAMPLING_CELL * SAMPLING_CELL) as f64 - 1e-9).ceil() as usize;
    for i in 0..cells.len() {
        if alloc_count[i] == 0 && !cells[i].is_empty() && cells[i].len() >= min_support {
            let donor = (0..cells.len()).max_by_key(|&j| (alloc_count[j], core::cmp::Reverse(j))).unwrap();
            if alloc_count[donor] >= 2 {
                alloc_count[donor] -= 1;
                alloc_count[i] += 1;
            }
        }
    }

    let mut points = Vec::with_capacity(target);
    for (cell, &k) in cells.iter_mut().zip(&alloc_count) {
        let (chosen, _) = cell.partial_shuffle(&mut rng, k);
        points.extend(chosen.iter().copied());
    }
    points.sort_unstable_by_key(|&(x, y)| (y, x));
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| SamplePoint {
            id,
            x: x as f64,
            y: y as f64,
            component: doc.component_at(x as usize, y as usize).expect("sampled pixel is ink"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::mask_with_rects;

    #[test]
    fn exact_cardinality_on_text() {
        // 1000 ink pixels: a 50x20 bar.
        let doc = BinaryDocument::from_mask(mask_with_rects(200, 100, &[(10, 10, 50, 20)])).unwrap();
        assert_eq!(doc.text_pixel_count(), 1000);
        let pts = sample_text_pixels(&doc, 0.05, 3).unwrap();
        assert_eq!(pts.len(), 50);
        for p in &pts {
            assert!(*doc.mask().get(p.x as usize, p.y as usize));
        }
        let mut uniq: Vec<(u64, u64)> = pts.iter().map(|p| (p.x as u64, p.y as u64)).collect();
        uniq.dedup();
        assert_eq!(uniq.len(), 50);
    }

    #[test]
    fn ratio_one_takes_everything() {
        let doc = BinaryDocument::from_mask(mask_with_rects(64, 64, &[(3, 3, 40, 7), (0, 50, 64, 2)])).unwrap();
        let pts = sample_text_pixels(&doc, 1.0, 0).unwrap();
        assert_eq!(pts.len(), doc.text_pixel_count());
    }

    #[test]
    fn separated_blobs_always_covered() {
        let doc = BinaryDocument::from_mask(mask_with_rects(700, 100, &[(10, 10, 60, 30), (570, 10, 60, 30)])).unwrap();
        for seed in 0..100 {
            let pts = sample_text_pixels(&doc, 0.05, seed).unwrap();
            assert!(pts.iter().any(|p| p.x < 100.0));
            assert!(pts.iter().any(|p| p.x > 500.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let doc = BinaryDocument::from_mask(mask_with_rects(300, 300, &[(10, 10, 200, 40), (10, 100, 150, 30)])).unwrap();
        let a = sample_text_pixels(&doc, 0.05, 42).unwrap();
        let b = sample_text_pixels(&doc, 0.05, 42).unwrap();
        let c = sample_text_pixels(&doc, 0.05, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_mask_and_bad_ratio() {
        let doc = BinaryDocument::from_mask(mask_with_rects(10, 10, &[])).unwrap();
        assert_eq!(sample_text_pixels(&doc, 0.05, 0).unwrap_err(), Error::EmptyMask);
        let doc = BinaryDocument::from_mask(mask_with_rects(10, 10, &[(0, 0, 2, 2)])).unwrap();
        assert!(sample_text_pixels(&doc, 0.0, 0).is_err());
        assert!(sample_text_pixels(&doc, 1.5, 0).is_err());
    }
}
