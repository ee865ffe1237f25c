//! Incremental Bowyer-Watson triangulation on integer coordinates.
//!
//! Predicates are evaluated exactly in `i128`. The convex hull is closed
//! with ghost triangles that share a vertex at infinity, so no bounding
//! super-triangle is needed and hull edges come out right. Points are
//! inserted in Hilbert order and located by a visibility walk.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};

const GHOST: u32 = u32::MAX;
/// Coordinates must stay below this magnitude for the exact predicates.
const COORD_LIMIT: i64 = 1 << 24;

/// Sign of the signed area of `(a, b, c)`: positive when counter-clockwise.
pub fn orient2d(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> Ordering {
    let det = (b.0 - a.0) as i128 * (c.1 - a.1) as i128 - (b.1 - a.1) as i128 * (c.0 - a.0) as i128;
    det.cmp(&0)
}

/// Positive when `d` is strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
pub fn in_circle(a: (i64, i64), b: (i64, i64), c: (i64, i64), d: (i64, i64)) -> Ordering {
    let (adx, ady) = ((a.0 - d.0) as i128, (a.1 - d.1) as i128);
    let (bdx, bdy) = ((b.0 - d.0) as i128, (b.1 - d.1) as i128);
    let (cdx, cdy) = ((c.0 - d.0) as i128, (c.1 - d.1) as i128);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
    det.cmp(&0)
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    /// `n[i]` is the neighbour across the edge opposite `v[i]`.
    n: [u32; 3],
    alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }

    /// Index `j` such that the edge opposite `v[j]` is `(a, b)` in this
    /// triangle's orientation.
    fn edge_slot(&self, a: u32, b: u32) -> Option<usize> {
        (0..3).find(|&j| self.v[(j + 1) % 3] == a && self.v[(j + 2) % 3] == b)
    }
}

struct Triangulation<'a> {
    pts: &'a [(i64, i64)],
    tris: Vec<Tri>,
    free: Vec<u32>,
    stamp: Vec<u32>,
    conflict: Vec<bool>,
    epoch: u32,
    last: u32,
}

impl<'a> Triangulation<'a> {
    fn p(&self, i: u32) -> (i64, i64) {
        self.pts[i as usize]
    }

    fn in_conflict(&self, t: &Tri, q: (i64, i64)) -> bool {
        if t.is_ghost() {
            let (u, v) = (self.p(t.v[0]), self.p(t.v[1]));
            match orient2d(u, v, q) {
                Ordering::Greater => true,
                Ordering::Equal => strictly_between(u, v, q),
                Ordering::Less => false,
            }
        } else {
            in_circle(self.p(t.v[0]), self.p(t.v[1]), self.p(t.v[2]), q) == Ordering::Greater
        }
    }

    fn alloc(&mut self, t: Tri) -> u32 {
        if let Some(i) = self.free.pop() {
            self.tris[i as usize] = t;
            i
        } else {
            self.tris.push(t);
            self.stamp.push(0);
            self.conflict.push(false);
            (self.tris.len() - 1) as u32
        }
    }

    /// Finds a triangle in conflict with `q`, walking from the last one created.
    fn locate(&self, q: (i64, i64)) -> u32 {
        let mut t = self.last;
        let cap = 4 * self.tris.len() + 16;
        for _ in 0..cap {
            let tri = &self.tris[t as usize];
            if tri.is_ghost() {
                if self.in_conflict(tri, q) {
                    return t;
                }
                t = tri.n[2];
                continue;
            }
            let next = (0..3).find(|&i| {
                let a = self.p(tri.v[(i + 1) % 3]);
                let b = self.p(tri.v[(i + 2) % 3]);
                orient2d(a, b, q) == Ordering::Less
            });
            match next {
                Some(i) => t = tri.n[i],
                None => return t,
            }
        }
        // The visibility walk terminates on Delaunay triangulations; scan as a
        // safety net anyway.
        (0..self.tris.len() as u32)
            .find(|&i| self.tris[i as usize].alive && self.in_conflict(&self.tris[i as usize], q))
            .expect("some triangle conflicts with a new point")
    }

    fn insert(&mut self, pi: u32) {
        let q = self.p(pi);
        let start = self.locate(q);
        self.epoch += 1;
        let epoch = self.epoch;

        let mut cavity = vec![start];
        self.stamp[start as usize] = epoch;
        self.conflict[start as usize] = true;
        // (a, b, outside) for each cavity boundary edge.
        let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
        let mut k = 0;
        while k < cavity.len() {
            let t = self.tris[cavity[k] as usize];
            k += 1;
            for i in 0..3 {
                let nb = t.n[i];
                let nbi = nb as usize;
                if self.stamp[nbi] != epoch {
                    self.stamp[nbi] = epoch;
                    self.conflict[nbi] = self.in_conflict(&self.tris[nbi], q);
                    if self.conflict[nbi] {
                        cavity.push(nb);
                    }
                }
                if !self.conflict[nbi] {
                    boundary.push((t.v[(i + 1) % 3], t.v[(i + 2) % 3], nb));
                }
            }
        }

        for &c in &cavity {
            self.tris[c as usize].alive = false;
            self.free.push(c);
        }
        let mut created: Vec<(u32, u32, u32)> = Vec::with_capacity(boundary.len());
        for &(a, b, outside) in &boundary {
            let idx = self.alloc(Tri { v: [a, b, pi], n: [GHOST, GHOST, outside], alive: true });
            let out = &mut self.tris[outside as usize];
            let slot = out.edge_slot(b, a).expect("outside triangle shares the boundary edge");
            out.n[slot] = idx;
            created.push((a, b, idx));
        }
        for &(a, b, idx) in &created {
            let across_a = created.iter().find(|c| c.0 == b).expect("closed cavity boundary").2;
            let across_b = created.iter().find(|c| c.1 == a).expect("closed cavity boundary").2;
            let t = &mut self.tris[idx as usize];
            t.n[0] = across_a;
            t.n[1] = across_b;
        }
        for &(a, b, idx) in &created {
            let shift = if a == GHOST {
                1
            } else if b == GHOST {
                2
            } else {
                debug_assert_eq!(orient2d(self.p(a), self.p(b), q), Ordering::Greater);
                0
            };
            if shift != 0 {
                let t = &mut self.tris[idx as usize];
                let (v, n) = (t.v, t.n);
                for i in 0..3 {
                    t.v[i] = v[(i + shift) % 3];
                    t.n[i] = n[(i + shift) % 3];
                }
            }
        }
        self.last = created.iter().map(|c| c.2).find(|&i| !self.tris[i as usize].is_ghost()).unwrap_or(created[0].2);
    }
}

fn strictly_between(u: (i64, i64), v: (i64, i64), q: (i64, i64)) -> bool {
    let dot = (q.0 - u.0) as i128 * (v.0 - u.0) as i128 + (q.1 - u.1) as i128 * (v.1 - u.1) as i128;
    let len2 = (v.0 - u.0) as i128 * (v.0 - u.0) as i128 + (v.1 - u.1) as i128 * (v.1 - u.1) as i128;
    dot > 0 && dot < len2
}

/// Position of `(x, y)` along a Hilbert curve over a `2^16` grid.
fn hilbert_index(mut x: u32, mut y: u32) -> u64 {
    let n: u32 = 1 << 16;
    let mut d: u64 = 0;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += s as u64 * s as u64 * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            core::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// Delaunay triangles of `pts` as counter-clockwise index triples.
///
/// Points on a common circle are triangulated by insertion order. Fails on
/// fewer than three points, duplicates, coordinates beyond `2^24`, or when
/// every point is collinear.
pub fn triangulate(pts: &[(i64, i64)]) -> Result<Vec<[usize; 3]>> {
    if pts.len() < 3 {
        return Err(Error::DegenerateGraph("fewer than three points"));
    }
    if pts.len() >= GHOST as usize {
        return Err(Error::DegenerateGraph("too many points"));
    }
    if pts.iter().any(|p| p.0.abs() >= COORD_LIMIT || p.1.abs() >= COORD_LIMIT) {
        return Err(Error::DegenerateGraph("coordinate out of range"));
    }
    let (minx, miny) = pts.iter().fold((i64::MAX, i64::MAX), |m, p| (m.0.min(p.0), m.1.min(p.1)));
    let (maxx, maxy) = pts.iter().fold((i64::MIN, i64::MIN), |m, p| (m.0.max(p.0), m.1.max(p.1)));
    let span = (maxx - minx).max(maxy - miny).max(1) as f64;
    let scale = 65535.0 / span;
    let mut order: Vec<u32> = (0..pts.len() as u32).collect();
    let key = |i: u32| {
        let p = pts[i as usize];
        let hx = ((p.0 - minx) as f64 * scale) as u32;
        let hy = ((p.1 - miny) as f64 * scale) as u32;
        (hilbert_index(hx, hy), p, i)
    };
    order.sort_by_cached_key(|&i| key(i));
    if order.windows(2).any(|w| pts[w[0] as usize] == pts[w[1] as usize]) {
        // Equal points get equal Hilbert keys and sort next to each other.
        return Err(Error::DegenerateGraph("duplicate point"));
    }

    let (a, b) = (order[0], order[1]);
    let Some(ck) = (2..order.len()).find(|&k| orient2d(pts[a as usize], pts[b as usize], pts[order[k] as usize]) != Ordering::Equal)
    else {
        return Err(Error::DegenerateGraph("all points collinear"));
    };
    let c = order[ck];
    let (a, b) = if orient2d(pts[a as usize], pts[b as usize], pts[c as usize]) == Ordering::Greater {
        (a, b)
    } else {
        (b, a)
    };

    let mut tr = Triangulation {
        pts,
        tris: Vec::new(),
        free: Vec::new(),
        stamp: Vec::new(),
        conflict: Vec::new(),
        epoch: 0,
        last: 0,
    };
    let seed = [
        [a, b, c],
        [b, a, GHOST],
        [c, b, GHOST],
        [a, c, GHOST],
    ];
    for v in seed {
        tr.alloc(Tri { v, n: [GHOST; 3], alive: true });
    }
    // Pair the seed triangles' edges.
    let mut edge_owner: BTreeMap<(u32, u32), (u32, usize)> = BTreeMap::new();
    for (t, tri) in tr.tris.iter().enumerate() {
        for j in 0..3 {
            edge_owner.insert((tri.v[(j + 1) % 3], tri.v[(j + 2) % 3]), (t as u32, j));
        }
    }
    for t in 0..tr.tris.len() {
        for j in 0..3 {
            let tri = tr.tris[t];
            let (u, v) = (tri.v[(j + 1) % 3], tri.v[(j + 2) % 3]);
            tr.tris[t].n[j] = edge_owner[&(v, u)].0;
        }
    }

    for (k, &pi) in order.iter().enumerate().skip(2) {
        if k != ck {
            tr.insert(pi);
        }
    }
    Ok(tr
        .tris
        .iter()
        .filter(|t| t.alive && !t.is_ghost())
        .map(|t| [t.v[0] as usize, t.v[1] as usize, t.v[2] as usize])
        .collect())
}
