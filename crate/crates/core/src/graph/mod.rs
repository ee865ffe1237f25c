//! Sampled pixel variables and the Delaunay topology of the MRF.

mod delaunay;
mod regions;
mod sampling;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

pub use delaunay::{in_circle, orient2d, triangulate};
pub use regions::{region_threshold, segment_regions};
pub use sampling::{sample_text_pixels, SAMPLING_CELL};

use crate::{Error, Result};

/// An observed pixel `e_v = (x, y)`, carrying one hidden label variable.
///
/// `id` is the sample's index in the page-level sample list and survives
/// region splitting; the position inside an [`MrfGraph`] is the local index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub component: usize,
}

/// One incident edge seen from a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub neighbor: usize,
    /// 0 if the vertex is the edge's first endpoint, 1 otherwise.
    pub side: usize,
}

#[derive(Debug, Clone)]
pub struct MrfGraph {
    vertices: Vec<SamplePoint>,
    edges: Vec<(usize, usize)>,
    triangles: Vec<[usize; 3]>,
    counting: Vec<f64>,
    offsets: Vec<usize>,
    incidence: Vec<Incidence>,
}

impl MrfGraph {
    /// Builds a graph from explicit edges. Edges are normalized to `(min, max)`,
    /// sorted and deduplicated; self loops are rejected.
    pub fn new(
        vertices: Vec<SamplePoint>,
        edges: Vec<(usize, usize)>,
        triangles: Vec<[usize; 3]>,
        counting_number: f64,
    ) -> Result<Self> {
        if !(counting_number > 0.0 && counting_number.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "counting number must be positive, got {counting_number}"
            )));
        }
        let n = vertices.len();
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        if edges.iter().any(|&(i, j)| i == j || j >= n) {
            return Err(Error::DegenerateGraph("edge endpoint out of range or self loop"));
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0usize; n];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut incidence = vec![Incidence { edge: 0, neighbor: 0, side: 0 }; offsets[n]];
        for (e, &(i, j)) in edges.iter().enumerate() {
            incidence[fill[i]] = Incidence { edge: e, neighbor: j, side: 0 };
            fill[i] += 1;
            incidence[fill[j]] = Incidence { edge: e, neighbor: i, side: 1 };
            fill[j] += 1;
        }
        for v in 0..n {
            incidence[offsets[v]..offsets[v + 1]].sort_unstable_by_key(|inc| inc.neighbor);
        }
        Ok(Self { counting: vec![counting_number; n], vertices, edges, triangles, offsets, incidence })
    }

    /// Delaunay graph of the points. Needs at least three non-collinear points.
    pub fn delaunay(points: Vec<SamplePoint>, counting_number: f64) -> Result<Self> {
        let coords: Vec<(i64, i64)> = points
            .iter()
            .map(|p| (libm::round(p.x) as i64, libm::round(p.y) as i64))
            .collect();
        let triangles = triangulate(&coords)?;
        let mut edges = Vec::with_capacity(triangles.len() * 3);
        for t in &triangles {
            edges.push((t[0], t[1]));
            edges.push((t[1], t[2]));
            edges.push((t[2], t[0]));
        }
        Self::new(points, edges, triangles, counting_number)
    }

    /// Fallback topology for point sets without a triangulation: a path
    /// through the points ordered along their dominant axis (a single
    /// vertex yields no edges).
    pub fn chain(points: Vec<SamplePoint>, counting_number: f64) -> Result<Self> {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p.x, p.y)).unzip();
        let spread = |v: &[f64]| {
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let by_x = points.is_empty() || spread(&xs) >= spread(&ys);
        order.sort_by(|&a, &b| {
            let (ka, kb) = if by_x { (xs[a], xs[b]) } else { (ys[a], ys[b]) };
            ka.total_cmp(&kb).then(a.cmp(&b))
        });
        let edges = order.windows(2).map(|w| (w[0], w[1])).collect();
        Self::new(points, edges, Vec::new(), counting_number)
    }

    /// Delaunay graph, falling back to [`MrfGraph::chain`] for fewer than three
    /// or collinear points.
    pub fn build(points: Vec<SamplePoint>, counting_number: f64) -> Result<Self> {
        match Self::delaunay(points.clone(), counting_number) {
            Err(Error::DegenerateGraph(_)) | Err(Error::TooFewSamples { .. }) => {
                Self::chain(points, counting_number)
            }
            other => other,
        }
    }

    /// Concatenates graphs into one graph with disconnected parts.
    pub fn disjoint_union(parts: &[&MrfGraph]) -> Self {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        let mut triangles = Vec::new();
        let mut counting = Vec::new();
        for g in parts {
            let base = vertices.len();
            vertices.extend_from_slice(&g.vertices);
            counting.extend_from_slice(&g.counting);
            edges.extend(g.edges.iter().map(|&(i, j)| (i + base, j + base)));
            triangles.extend(g.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        let mut g = Self::new(vertices, edges, triangles, 1.0).expect("parts are valid graphs");
        g.counting = counting;
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[SamplePoint] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Counting number `c_v`.
    pub fn counting_number(&self, v: usize) -> f64 {
        self.counting[v]
    }

    pub fn set_counting_numbers(&mut self, c: f64) {
        assert!(c > 0.0, "counting numbers must be positive");
        self.counting.iter_mut().for_each(|x| *x = c);
    }

    /// Number of incident edges `A_v`.
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Incident edges of `v`, in ascending neighbour order.
    pub fn incident(&self, v: usize) -> &[Incidence] {
        &self.incidence[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Line-oriented text dump: `V id x y` per vertex, `E i j` per edge,
    /// using graph-local indices.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "V {} {} {}", i, p.x, p.y);
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "E {} {}", i, j);
        }
        out
    }
}
