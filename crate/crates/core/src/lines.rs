//! Regression-line model: likelihood, flattened fitting feature, plateau
//! width, closed-form M-step, line prior and partition function.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::graph::SamplePoint;
use crate::{Error, Result};

/// Floor applied to every line variance, in px².
pub const SIGMA2_MIN: f64 = 1.0;

/// Total responsibility below which a line is treated as having no support.
pub const DEAD_WEIGHT: f64 = 1e-9;

/// One regression line `y = a x + b` centred at `x = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Vertical (residual) variance.
    pub sigma_t2: f64,
    /// Horizontal (along-line) variance.
    pub sigma_s2: f64,
    pub prior: f64,
    /// Half interline space; residuals within `r * plateau` are not penalized.
    pub plateau: f64,
}

impl LineModel {
    /// A line with floored variances, zero prior and no plateau.
    pub fn new(a: f64, b: f64, c: f64, sigma_t2: f64, sigma_s2: f64) -> Self {
        LineModel {
            a,
            b,
            c,
            sigma_t2: sigma_t2.max(SIGMA2_MIN),
            sigma_s2: sigma_s2.max(SIGMA2_MIN),
            prior: 0.0,
            plateau: 0.0,
        }
    }

    pub fn y_at(&self, x: f64) -> f64 {
        self.a * x + self.b
    }

    /// Signed vertical residual `y - a x - b`.
    pub fn residual(&self, x: f64, y: f64) -> f64 {
        y - self.a * x - self.b
    }

    /// Perpendicular distance from `(x, y)` to the infinite line.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        self.residual(x, y).abs() / (1.0 + self.a * self.a).sqrt()
    }

    /// Direction of the line in radians.
    pub fn angle(&self) -> f64 {
        self.a.atan()
    }

    /// Horizontal extent `c ± 2σ_s` of the line's support.
    pub fn segment(&self) -> (f64, f64) {
        let half = 2.0 * self.sigma_s2.sqrt();
        (self.c - half, self.c + half)
    }

    /// Distance from `(x, y)` to the segment of the line over [`LineModel::segment`].
    pub fn segment_distance(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = self.segment();
        let xc = x.clamp(lo, hi);
        let (dx, dy) = (x - xc, y - self.y_at(xc));
        (dx * dx + dy * dy).sqrt()
    }
}

/// Which parametrization the M-step and fitting feature use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Vertical residuals and horizontal position, as in the main model.
    #[default]
    Shear,
    /// Principal-axis slope with the along-line coordinate `x + a y`.
    RotationInvariant,
}

impl Variant {
    /// Coordinate along the line compared against `c`.
    pub fn along(self, line: &LineModel, x: f64, y: f64) -> f64 {
        match self {
            Variant::Shear => x,
            Variant::RotationInvariant => x + line.a * y,
        }
    }
}

/// Row-stochastic `N × L` matrix of label posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Posteriors {
    /// Wraps row-major data. Rows are not renormalized.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "posterior data has wrong length");
        Posteriors { rows, cols, data }
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Posteriors::from_vec(rows, cols, vec![1.0 / cols as f64; rows * cols])
    }

    /// Delta posteriors from hard labels.
    pub fn from_labels(labels: &[usize], cols: usize) -> Self {
        let mut data = vec![0.0; labels.len() * cols];
        for (v, &l) in labels.iter().enumerate() {
            data[v * cols + l] = 1.0;
        }
        Posteriors::from_vec(labels.len(), cols, data)
    }

    /// Number of vertices `N`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of lines `L`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, v: usize, l: usize) -> f64 {
        self.data[v * self.cols + l]
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.cols..(v + 1) * self.cols]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.data[v * self.cols..(v + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Most probable label of vertex `v`; ties take the lowest index.
    pub fn argmax(&self, v: usize) -> usize {
        let row = self.row(v);
        let mut best = 0;
        for (l, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = l;
            }
        }
        best
    }

    /// Total responsibility of every line.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for v in 0..self.rows {
            for (s, p) in sums.iter_mut().zip(self.row(v)) {
                *s += p;
            }
        }
        sums
    }

    /// Keeps the listed columns (in order) and renormalizes rows; a row with
    /// no remaining mass becomes uniform.
    pub fn select_columns(&self, keep: &[usize]) -> Posteriors {
        let cols = keep.len();
        let mut data = Vec::with_capacity(self.rows * cols);
        for v in 0..self.rows {
            let row = self.row(v);
            let start = data.len();
            data.extend(keep.iter().map(|&l| row[l]));
            let sum: f64 = data[start..].iter().sum();
            for p in &mut data[start..] {
                *p = if sum > 0.0 { *p / sum } else { 1.0 / cols as f64 };
            }
        }
        Posteriors::from_vec(self.rows, cols, data)
    }

    /// Mean over vertices of the symmetric KL divergence to `other`.
    pub fn mean_symmetric_kl(&self, other: &Posteriors) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        if self.rows == 0 {
            return 0.0;
        }
        const FLOOR: f64 = 1e-300;
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&p, &q)| {
                let (p, q) = (p.max(FLOOR), q.max(FLOOR));
                (p - q) * (p.ln() - q.ln())
            })
            .sum();
        total / self.rows as f64
    }
}

/// Flattened local-fitting log-potential of `point` under `line`.
///
/// Residuals `|y - a x - b| <= r * plateau` keep only the along-line term;
/// farther points also pay the vertical Gaussian term. Always `<= 0`.
pub fn local_fitting(line: &LineModel, point: &SamplePoint, r: f64, variant: Variant) -> f64 {
    let d = line.residual(point.x, point.y);
    let s = variant.along(line, point.x, point.y) - line.c;
    let along = -s * s / (2.0 * line.sigma_s2);
    if d.abs() <= r * line.plateau {
        along
    } else {
        along - d * d / (2.0 * line.sigma_t2)
    }
}

/// Un-flattened Gaussian exponent of `point` under `line`.
pub fn gaussian_exponent(line: &LineModel, x: f64, y: f64, variant: Variant) -> f64 {
    let d = line.residual(x, y);
    let s = variant.along(line, x, y) - line.c;
    -d * d / (2.0 * line.sigma_t2) - s * s / (2.0 * line.sigma_s2)
}

/// Partition function `2π (σ_t² σ_s²)^{1/2}` of one line's likelihood.
pub fn partition_zv(line: &LineModel) -> f64 {
    2.0 * PI * (line.sigma_t2 * line.sigma_s2).sqrt()
}

/// `log` of [`partition_zv`].
pub fn log_partition_zv(line: &LineModel) -> f64 {
    (2.0 * PI).ln() + 0.5 * (line.sigma_t2.ln() + line.sigma_s2.ln())
}

/// Unary log-likelihood matrix (`N × L`, row-major) used by the E-step:
/// flattened fitting feature minus the line's log partition function.
pub fn unary_log_likelihood(points: &[SamplePoint], lines: &[LineModel], r: f64, variant: Variant) -> Vec<f64> {
    let log_z: Vec<f64> = lines.iter().map(log_partition_zv).collect();
    let mut out = Vec::with_capacity(points.len() * lines.len());
    for p in points {
        for (line, lz) in lines.iter().zip(&log_z) {
            out.push(local_fitting(line, p, r, variant) - lz);
        }
    }
    out
}

/// Vertex terms of the EM objective:
/// `Σ_v Σ_l post(v,l) [g(v,l) - log Z_v(l)]` with the un-flattened exponent.
pub fn q_vertex_terms(points: &[SamplePoint], post: &Posteriors, lines: &[LineModel], variant: Variant) -> f64 {
    let mut q = 0.0;
    for (v, p) in points.iter().enumerate() {
        for (l, line) in lines.iter().enumerate() {
            let w = post.get(v, l);
            if w != 0.0 {
                q += w * (gaussian_exponent(line, p.x, p.y, variant) - log_partition_zv(line));
            }
        }
    }
    q
}

/// Sets each line's plateau to half the smallest vertical gap, measured at
/// its own centre, to any other line. A lone line gets `2 σ_t`.
pub fn compute_plateau(lines: &mut [LineModel]) {
    let alive = vec![true; lines.len()];
    compute_plateau_among(lines, &alive);
}

/// [`compute_plateau`] restricted to the lines flagged in `alive`; the
/// others keep their plateau and are ignored as neighbours.
pub fn compute_plateau_among(lines: &mut [LineModel], alive: &[bool]) {
    let snapshot: Vec<LineModel> = lines.to_vec();
    for (l, line) in lines.iter_mut().enumerate() {
        if !alive[l] {
            continue;
        }
        let y = line.y_at(line.c);
        let gap = snapshot
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != l && alive[k])
            .map(|(_, other)| (other.y_at(line.c) - y).abs())
            .fold(f64::INFINITY, f64::min);
        line.plateau = if gap.is_finite() { gap / 2.0 } else { 2.0 * line.sigma_t2.sqrt() };
    }
}

/// Line priors: column means of the posteriors.
pub fn line_prior(post: &Posteriors) -> Vec<f64> {
    let n = post.rows().max(1) as f64;
    post.column_sums().into_iter().map(|s| s / n).collect()
}

/// Weighted fit of one line to `(x, y, w)` triples.
///
/// Shear: weighted least squares of `y` on `x`. Rotation invariant: the
/// principal axis of the weighted scatter with `c` measured along `x + a y`.
/// A degenerate horizontal spread gives `a = 0`. Variances are floored.
/// Returns `None` when the total weight is not positive.
pub fn weighted_fit(samples: impl Iterator<Item = (f64, f64, f64)> + Clone, variant: Variant) -> Option<LineModel> {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (x, y, w) in samples.clone() {
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    if !(sw > 0.0) {
        return None;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y, w) in samples.clone() {
        let (dx, dy) = (x - mx, y - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let tiny = 1e-12 * sw;
    let a = match variant {
        Variant::Shear if sxx <= tiny => 0.0,
        Variant::Shear => sxy / sxx,
        Variant::RotationInvariant if sxx <= tiny && syy <= tiny => 0.0,
        Variant::RotationInvariant => (0.5 * (2.0 * sxy).atan2(sxx - syy)).tan(),
    };
    let b = my - a * mx;
    let probe = LineModel::new(a, b, 0.0, SIGMA2_MIN, SIGMA2_MIN);
    let c = samples.clone().map(|(x, y, w)| w * variant.along(&probe, x, y)).sum::<f64>() / sw;
    let (mut st, mut ss) = (0.0, 0.0);
    for (x, y, w) in samples {
        let d = y - a * x - b;
        let s = variant.along(&probe, x, y) - c;
        st += w * d * d;
        ss += w * s * s;
    }
    Some(LineModel::new(a, b, c, st / sw, ss / sw))
}

/// Closed-form M-step: one weighted fit per posterior column.
///
/// Each returned line carries its prior (column mean) and a zero plateau.
/// A column with zero total responsibility is an error.
pub fn mstep_update(points: &[SamplePoint], post: &Posteriors, variant: Variant) -> Result<Vec<LineModel>> {
    assert_eq!(points.len(), post.rows(), "one posterior row per point");
    let priors = line_prior(post);
    (0..post.cols())
        .map(|l| {
            let samples = points.iter().enumerate().map(move |(v, p)| (p.x, p.y, post.get(v, l)));
            let mut line = weighted_fit(samples, variant).ok_or(Error::DegenerateLine(l))?;
            line.prior = priors[l];
            Ok(line)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> SamplePoint {
        SamplePoint { id: 0, x, y, component: 0 }
    }

    fn unit_line() -> LineModel {
        let mut l = LineModel::new(0.0, 0.0, 0.0, 1.0, 1.0);
        l.plateau = 10.0;
        l
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Vec<SamplePoint>, Posteriors) {
        let points: Vec<SamplePoint> =
            (0..n).map(|_| pt(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0))).collect();
        let mut data = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..l).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            data.extend(row.iter().map(|w| w / s));
        }
        (points, Posteriors::from_vec(n, l, data))
    }

    #[test]
    fn local_fitting_examples() {
        let line = unit_line();
        assert_eq!(local_fitting(&line, &pt(0.0, 2.0), 0.3, Variant::Shear), 0.0);
        assert_eq!(local_fitting(&line, &pt(0.0, 4.0), 0.3, Variant::Shear), -8.0);
        let mut l2 = LineModel::new(1.5, -3.0, 7.0, 4.0, 9.0);
        l2.plateau = 0.0;
        let p = pt(7.0, l2.y_at(7.0));
        assert_eq!(local_fitting(&l2, &p, 0.3, Variant::Shear), 0.0);
        assert!(local_fitting(&l2, &pt(-3.0, 40.0), 0.3, Variant::Shear) < 0.0);
    }

    #[test]
    fn local_fitting_continuous_off_plateau_boundary() {
        let line = unit_line();
        for &y in &[0.5, 1.7, 5.0, 9.0] {
            let a = local_fitting(&line, &pt(0.3, y), 0.3, Variant::Shear);
            let b = local_fitting(&line, &pt(0.3 + 1e-7, y + 1e-7), 0.3, Variant::Shear);
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn plateau_examples() {
        let mut two = [LineModel::new(0.0, 0.0, 5.0, 1.0, 1.0), LineModel::new(0.0, 20.0, 50.0, 1.0, 1.0)];
        compute_plateau(&mut two);
        assert_eq!(two[0].plateau, 10.0);
        assert_eq!(two[1].plateau, 10.0);
        let mut one = [LineModel::new(0.0, 0.0, 0.0, 4.0, 1.0)];
        compute_plateau(&mut one);
        assert_eq!(one[0].plateau, 4.0);
        let mut same = [LineModel::new(0.1, 3.0, 0.0, 4.0, 1.0); 2];
        compute_plateau(&mut same);
        assert_eq!(same[0].plateau, 0.0);
    }

    #[test]
    fn partition_examples() {
        assert!((partition_zv(&LineModel::new(0.0, 0.0, 0.0, 1.0, 1.0)) - 2.0 * PI).abs() < 1e-15);
        assert!((partition_zv(&LineModel::new(0.0, 0.0, 0.0, 4.0, 9.0)) - 12.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_quadrature() {
        for &(a, st, ss) in &[(0.0, 1.0, 1.0), (0.4, 4.0, 9.0), (-1.2, 2.5, 30.0)] {
            let line = LineModel::new(a, 3.0, -2.0, st, ss);
            // Integrate over (s, d) = (x - c, y - a x - b); unit Jacobian.
            let (hs, hd) = (8.0 * ss.sqrt(), 8.0 * st.sqrt());
            let steps = 1200;
            let (ds, dd) = (2.0 * hs / steps as f64, 2.0 * hd / steps as f64);
            let mut total = 0.0;
            for i in 0..steps {
                let x = line.c - hs + (i as f64 + 0.5) * ds;
                for j in 0..steps {
                    let y = line.y_at(x) - hd + (j as f64 + 0.5) * dd;
                    total += gaussian_exponent(&line, x, y, Variant::Shear).exp();
                }
            }
            total *= ds * dd;
            let z = partition_zv(&line);
            assert!(((total - z) / z).abs() < 1e-4, "{total} vs {z}");
        }
    }

    #[test]
    fn line_prior_examples() {
        let labels = [0, 1, 1, 2, 2, 2, 1, 1, 1, 1];
        let p = line_prior(&Posteriors::from_labels(&labels, 3));
        assert_eq!(p, [0.1, 0.6, 0.3]);
        let p = line_prior(&Posteriors::uniform(7, 4));
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, post) = random_instance(&mut rng, 13, 3);
        let p = line_prior(&post);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for l in 0..3 {
            let direct: f64 = (0..13).map(|v| post.get(v, l)).sum::<f64>() / 13.0;
            assert!((direct - p[l]).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_fit_floors_residual_variance() {
        let points: Vec<SamplePoint> = (0..5).map(|i| pt(i as f64, 2.0 * i as f64 + 1.0)).collect();
        let lines = mstep_update(&points, &Posteriors::uniform(5, 1), Variant::Shear).unwrap();
        assert!((lines[0].a - 2.0).abs() < 1e-12);
        assert!((lines[0].b - 1.0).abs() < 1e-12);
        assert_eq!(lines[0].sigma_t2, SIGMA2_MIN);
        assert_eq!(lines[0].c, 2.0);
        assert_eq!(lines[0].prior, 1.0);
    }

    #[test]
    fn symmetric_posteriors_give_identical_lines() {
        let points: Vec<SamplePoint> = (0..8).map(|i| pt(i as f64 * 3.0, (i % 3) as f64 * 5.0)).collect();
        let lines = mstep_update(&points, &Posteriors::uniform(8, 2), Variant::Shear).unwrap();
        assert_eq!(lines[0], lines[1]);
    }

    #[test]
    fn zero_responsibility_is_an_error() {
        let points = [pt(0.0, 0.0), pt(1.0, 1.0)];
        let post = Posteriors::from_labels(&[0, 0], 2);
        assert_eq!(mstep_update(&points, &post, Variant::Shear).unwrap_err(), Error::DegenerateLine(1));
    }

    #[test]
    fn shear_matches_ordinary_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<SamplePoint> = (0..50)
            .map(|_| {
                let x = rng.random_range(0.0..200.0);
                pt(x, 0.3 * x + 12.0 + rng.random_range(-6.0..6.0))
            })
            .collect();
        let line = mstep_update(&points, &Posteriors::uniform(50, 1), Variant::Shear).unwrap()[0];
        // Normal equations solved directly.
        let n = 50.0;
        let (sx, sy) = (points.iter().map(|p| p.x).sum::<f64>(), points.iter().map(|p| p.y).sum::<f64>());
        let sxx = points.iter().map(|p| p.x * p.x).sum::<f64>();
        let sxy = points.iter().map(|p| p.x * p.y).sum::<f64>();
        let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let b = (sy - a * sx) / n;
        assert!((line.a - a).abs() < 1e-9);
        assert!((line.b - b).abs() < 1e-9);
        let rss = points.iter().map(|p| (p.y - a * p.x - b).powi(2)).sum::<f64>() / n;
        assert!((line.sigma_t2 - rss).abs() < 1e-9);
    }

    fn q_at(points: &[SamplePoint], post: &Posteriors, lines: &[LineModel], l: usize, k: usize, delta: f64) -> f64 {
        let mut lines = lines.to_vec();
        let ln = &mut lines[l];
        match k {
            0 => ln.a += delta,
            1 => ln.b += delta,
            2 => ln.c += delta,
            3 => ln.sigma_t2 += delta,
            _ => ln.sigma_s2 += delta,
        }
        q_vertex_terms(points, post, &lines, Variant::Shear)
    }

    #[test]
    fn mstep_is_stationary_point_of_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 30 {
            let n = rng.random_range(4..=20);
            let l = rng.random_range(1..=3);
            let (points, post) = random_instance(&mut rng, n, l);
            let lines = mstep_update(&points, &post, Variant::Shear).unwrap();
            if lines.iter().any(|ln| ln.sigma_t2 <= SIGMA2_MIN || ln.sigma_s2 <= SIGMA2_MIN) {
                continue;
            }
            let h = 1e-6;
            for li in 0..l {
                for k in 0..5 {
                    let g = (q_at(&points, &post, &lines, li, k, h) - q_at(&points, &post, &lines, li, k, -h)) / (2.0 * h);
                    assert!(g.abs() < 1e-5, "line {li} coord {k}: {g}");
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn mstep_never_decreases_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.random_range(3..=20);
            let l = rng.random_range(1..=3);
            let (points, post) = random_instance(&mut rng, n, l);
            let old: Vec<LineModel> = (0..l)
                .map(|_| {
                    LineModel::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0.0..60.0),
                        rng.random_range(0.0..60.0),
                        rng.random_range(1.0..400.0),
                        rng.random_range(1.0..400.0),
                    )
                })
                .collect();
            let new = mstep_update(&points, &post, Variant::Shear).unwrap();
            let (q_old, q_new) = (q_vertex_terms(&points, &post, &old, Variant::Shear), q_vertex_terms(&points, &post, &new, Variant::Shear));
            assert!(q_new >= q_old - 1e-9, "{q_new} < {q_old}");
        }
    }

    #[test]
    fn rotation_invariant_tracks_rotated_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<(f64, f64)> = (0..40)
            .map(|_| {
                let x = rng.random_range(0.0..300.0);
                (x, 0.1 * x + 50.0 + rng.random_range(-4.0..4.0))
            })
            .collect();
        let fit = |pts: &[(f64, f64)]| {
            weighted_fit(pts.iter().map(|&(x, y)| (x, y, 1.0)), Variant::RotationInvariant).unwrap().angle()
        };
        let original = fit(&base);
        let (cx, cy) = (base.iter().map(|p| p.0).sum::<f64>() / 40.0, base.iter().map(|p| p.1).sum::<f64>() / 40.0);
        for deg in [10.0f64, 20.0, 30.0] {
            let beta = deg.to_radians();
            let (s, c) = beta.sin_cos();
            let rotated: Vec<(f64, f64)> =
                base.iter().map(|&(x, y)| (cx + c * (x - cx) - s * (y - cy), cy + s * (x - cx) + c * (y - cy))).collect();
            assert!((fit(&rotated) - (original + beta)).abs() < 1e-6);
        }
    }

    #[test]
    fn select_columns_and_kl() {
        let post = Posteriors::from_vec(2, 3, vec![0.5, 0.25, 0.25, 0.0, 0.0, 1.0]);
        let kept = post.select_columns(&[0, 1]);
        assert_eq!(kept.row(0), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(kept.row(1), &[0.5, 0.5]);
        assert_eq!(post.mean_symmetric_kl(&post), 0.0);
        assert!(post.mean_symmetric_kl(&Posteriors::uniform(2, 3)) > 0.0);
        assert_eq!(post.argmax(0), 0);
        assert_eq!(post.argmax(1), 2);
    }

    proptest! {
        #[test]
        fn local_fitting_is_nonpositive(x in -500.0f64..500.0, y in -500.0f64..500.0, a in -2.0f64..2.0,
                                         st in 1.0f64..100.0, ss in 1.0f64..1e4, s in 0.0f64..50.0) {
            let mut line = LineModel::new(a, 1.0, 3.0, st, ss);
            line.plateau = s;
            prop_assert!(local_fitting(&line, &pt(x, y), 0.3, Variant::Shear) <= 0.0);
            prop_assert!(local_fitting(&line, &pt(x, y), 0.3, Variant::RotationInvariant) <= 0.0);
        }

        #[test]
        fn posterior_rows_stay_stochastic(raw in proptest::collection::vec(0.01f64..1.0, 12)) {
            let mut data = raw.clone();
            for row in data.chunks_mut(3) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= s);
            }
            let post = Posteriors::from_vec(4, 3, data);
            let p = line_prior(&post);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
