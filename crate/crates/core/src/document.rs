//! Binarized page raster with its 8-connected components.

use alloc::vec::Vec;

use crate::math::otsu_histogram;
use crate::raster::Raster;
use crate::{Error, Result};

/// One 8-connected ink component. Bounding box is inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectedComponent {
    pub id: usize,
    pub pixels: Vec<(u32, u32)>,
    pub bbox: (u32, u32, u32, u32),
}

impl ConnectedComponent {
    pub fn width(&self) -> u32 {
        self.bbox.2 - self.bbox.0 + 1
    }

    pub fn height(&self) -> u32 {
        self.bbox.3 - self.bbox.1 + 1
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }
}

#[derive(Debug, Clone)]
pub struct BinaryDocument {
    mask: Raster<bool>,
    components: Vec<ConnectedComponent>,
    /// Component index + 1 per pixel, 0 for background.
    labels: Raster<u32>,
    mean_cc_height: f64,
    mean_cc_width: f64,
}

impl BinaryDocument {
    /// Builds a document from a text mask (`true` = ink).
    pub fn from_mask(mask: Raster<bool>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyImage);
        }
        let (labels, components) = label_components(&mask);
        let (mean_cc_height, mean_cc_width) = if components.is_empty() {
            (0.0, 0.0)
        } else {
            let n = components.len() as f64;
            (
                components.iter().map(|c| c.height() as f64).sum::<f64>() / n,
                components.iter().map(|c| c.width() as f64).sum::<f64>() / n,
            )
        };
        Ok(Self { mask, components, labels, mean_cc_height, mean_cc_width })
    }

    /// Binarizes an 8-bit grayscale raster where dark pixels are ink.
    ///
    /// Pixels with value `<= threshold` become ink. Without an explicit
    /// threshold Otsu's method is used; a bilevel image therefore passes
    /// through unchanged. A single-valued image is ink only if it is dark.
    pub fn from_gray(gray: &Raster<u8>, threshold: Option<u8>) -> Result<Self> {
        if gray.is_empty() {
            return Err(Error::EmptyImage);
        }
        let t = match threshold {
            Some(t) => t,
            None => {
                let mut hist = [0.0f64; 256];
                for &v in gray.as_slice() {
                    hist[v as usize] += 1.0;
                }
                let occupied = hist.iter().filter(|&&h| h > 0.0).count();
                if occupied == 1 {
                    let v = gray.as_slice()[0];
                    if v < 128 {
                        v
                    } else {
                        return Self::from_mask(gray.map(|_| false));
                    }
                } else {
                    otsu_histogram(&hist) as u8
                }
            }
        };
        Self::from_mask(gray.map(|&v| v <= t))
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn mask(&self) -> &Raster<bool> {
        &self.mask
    }

    pub fn components(&self) -> &[ConnectedComponent] {
        &self.components
    }

    /// Index of the component owning pixel `(x, y)`, if it is ink.
    pub fn component_at(&self, x: usize, y: usize) -> Option<usize> {
        match *self.labels.get(x, y) {
            0 => None,
            l => Some(l as usize - 1),
        }
    }

    pub fn mean_cc_height(&self) -> f64 {
        self.mean_cc_height
    }

    pub fn mean_cc_width(&self) -> f64 {
        self.mean_cc_width
    }

    pub fn text_pixel_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&b| b).count()
    }
}

/// 8-connected labelling by iterative flood fill, in raster scan order.
pub(crate) fn label_components(mask: &Raster<bool>) -> (Raster<u32>, Vec<ConnectedComponent>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Raster::filled(w, h, 0u32);
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) || *labels.get(x, y) != 0 {
                continue;
            }
            let id = components.len();
            let tag = id as u32 + 1;
            let mut pixels = Vec::new();
            let mut bbox = (x as u32, y as u32, x as u32, y as u32);
            labels.set(x, y, tag);
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                pixels.push((cx as u32, cy as u32));
                bbox.0 = bbox.0.min(cx as u32);
                bbox.1 = bbox.1.min(cy as u32);
                bbox.2 = bbox.2.max(cx as u32);
                bbox.3 = bbox.3.max(cy as u32);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if (dx, dy) == (0, 0) || !mask.in_bounds(nx, ny) {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if *mask.get(nx, ny) && *labels.get(nx, ny) == 0 {
                            labels.set(nx, ny, tag);
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            pixels.sort_unstable_by_key(|&(px, py)| (py, px));
            components.push(ConnectedComponent { id, pixels, bbox });
        }
    }
    (labels, components)
}

/// Draws a filled axis-aligned rectangle of ink; used by tests and examples.
pub fn mask_with_rects(width: usize, height: usize, rects: &[(usize, usize, usize, usize)]) -> Raster<bool> {
    let mut mask = Raster::filled(width, height, false);
    for &(x0, y0, w, h) in rects {
        for y in y0..(y0 + h).min(height) {
            for x in x0..(x0 + w).min(width) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Union-find labelling over the 4 backward neighbours, independent of
    /// the flood fill.
    fn union_find_count(mask: &Raster<bool>) -> usize {
        let (w, h) = (mask.width(), mask.height());
        let mut parent: Vec<usize> = (0..w * h).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for y in 0..h {
            for x in 0..w {
                if !*mask.get(x, y) {
                    continue;
                }
                let i = y * w + x;
                let nbrs = [(-1i64, 0i64), (-1, -1), (0, -1), (1, -1)];
                for (dx, dy) in nbrs {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if mask.in_bounds(nx, ny) && *mask.get(nx as usize, ny as usize) {
                        let a = find(&mut parent, i);
                        let b = find(&mut parent, ny as usize * w + nx as usize);
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        (0..w * h).filter(|&i| mask.as_slice()[i] && find(&mut parent, i) == i).count()
    }

    #[test]
    fn blank_page_has_no_components() {
        let doc = BinaryDocument::from_mask(Raster::filled(100, 100, false)).unwrap();
        assert!(doc.components().is_empty());
        assert_eq!(doc.text_pixel_count(), 0);
    }

    #[test]
    fn single_square_statistics() {
        let doc = BinaryDocument::from_mask(mask_with_rects(50, 50, &[(5, 5, 10, 10)])).unwrap();
        assert_eq!(doc.components().len(), 1);
        assert_eq!(doc.mean_cc_height(), 10.0);
        assert_eq!(doc.mean_cc_width(), 10.0);
    }

    #[test]
    fn two_squares_mean_height() {
        let doc = BinaryDocument::from_mask(mask_with_rects(100, 100, &[(0, 0, 10, 10), (40, 40, 20, 20)]))
            .unwrap();
        assert_eq!(doc.components().len(), 2);
        assert_eq!(doc.mean_cc_height(), 15.0);
    }

    #[test]
    fn diagonal_pixels_join_under_eight_connectivity() {
        let mut mask = Raster::filled(4, 4, false);
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        mask.set(2, 2, true);
        let doc = BinaryDocument::from_mask(mask).unwrap();
        assert_eq!(doc.components().len(), 1);
        assert_eq!(doc.components()[0].bbox, (0, 0, 2, 2));
    }

    #[test]
    fn zero_pixel_image_is_an_error() {
        let r: Raster<bool> = Raster::from_vec(0, 0, Vec::new());
        assert_eq!(BinaryDocument::from_mask(r).unwrap_err(), Error::EmptyImage);
    }

    #[test]
    fn gray_bilevel_passes_through() {
        let gray = Raster::from_vec(3, 1, vec![0u8, 255, 0]);
        let doc = BinaryDocument::from_gray(&gray, None).unwrap();
        assert_eq!(doc.mask().as_slice(), &[true, false, true]);
        let white = Raster::filled(4, 4, 255u8);
        assert_eq!(BinaryDocument::from_gray(&white, None).unwrap().text_pixel_count(), 0);
    }

    #[test]
    fn components_match_union_find_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(5..60), rng.random_range(5..60));
            let density = rng.random_range(0.1..0.6);
            let data = (0..w * h).map(|_| rng.random_bool(density)).collect();
            let mask = Raster::from_vec(w, h, data);
            let doc = BinaryDocument::from_mask(mask.clone()).unwrap();
            assert_eq!(doc.components().len(), union_find_count(&mask));
            let total: usize = doc.components().iter().map(|c| c.pixels.len()).sum();
            assert_eq!(total, doc.text_pixel_count());
            for c in doc.components() {
                for &(x, y) in &c.pixels {
                    assert_eq!(doc.component_at(x as usize, y as usize), Some(c.id));
                }
            }
        }
    }
}
