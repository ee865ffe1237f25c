use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use super::MrfGraph;
use crate::math::mean_std;

/// Pruning threshold `mean + 2 * std` of the longest side over all triangles.
/// `None` when the graph has no triangles.
pub fn region_threshold(graph: &MrfGraph) -> Option<f64> {
    if graph.triangles().is_empty() {
        return None;
    }
    let longest: Vec<f64> = graph.triangles().iter().map(|t| longest_side(graph, t)).collect();
    let (mean, std) = mean_std(&longest);
    Some(mean + 2.0 * std)
}

fn longest_side(graph: &MrfGraph, t: &[usize; 3]) -> f64 {
    let v = graph.vertices();
    let d = |a: usize, b: usize| {
        let (dx, dy) = (v[a].x - v[b].x, v[a].y - v[b].y);
        (dx * dx + dy * dy).sqrt()
    };
    d(t[0], t[1]).max(d(t[1], t[2])).max(d(t[2], t[0]))
}

/// Splits the graph into independent text regions.
///
/// Triangles whose longest side exceeds [`region_threshold`] are dropped; the
/// edges of the surviving triangles are split into connected components, each
/// returned as a self-contained graph. Vertices left without edges become
/// singleton regions. Graphs without triangles are split along their edges
/// unchanged. Regions are ordered by their smallest original vertex index.
pub fn segment_regions(graph: &MrfGraph) -> Vec<MrfGraph> {
    let n = graph.vertex_count();
    let (edges, triangles): (Vec<(usize, usize)>, Vec<[usize; 3]>) = match region_threshold(graph) {
        None => (graph.edges().to_vec(), Vec::new()),
        Some(limit) => {
            let kept: Vec<[usize; 3]> =
                graph.triangles().iter().copied().filter(|t| longest_side(graph, t) <= limit).collect();
            let mut edges: Vec<(usize, usize)> = kept
                .iter()
                .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            edges.sort_unstable();
            edges.dedup();
            (edges, kept)
        }
    };

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(a, b) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    // Roots are the smallest index of each component.
    let mut region_of = vec![usize::MAX; n];
    let mut local = vec![0usize; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if region_of[r] == usize::MAX {
            region_of[r] = members.len();
            members.push(Vec::new());
        }
        let k = region_of[r];
        region_of[v] = k;
        local[v] = members[k].len();
        members[k].push(v);
    }
    let mut region_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); members.len()];
    for &(a, b) in &edges {
        region_edges[region_of[a]].push((local[a], local[b]));
    }
    let mut region_tris: Vec<Vec<[usize; 3]>> = vec![Vec::new(); members.len()];
    for t in &triangles {
        region_tris[region_of[t[0]]].push([local[t[0]], local[t[1]], local[t[2]]]);
    }
    members
        .into_iter()
        .zip(region_edges)
        .zip(region_tris)
        .map(|((vs, es), ts)| {
            let counting = graph.counting_number(vs[0]);
            let pts = vs.iter().map(|&v| graph.vertices()[v]).collect();
            MrfGraph::new(pts, es, ts, counting).expect("subgraph of a valid graph")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SamplePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(coords: &[(f64, f64)]) -> Vec<SamplePoint> {
        coords.iter().enumerate().map(|(id, &(x, y))| SamplePoint { id, x, y, component: 0 }).collect()
    }

    #[test]
    fn uniform_grid_is_one_region() {
        let coords: Vec<(f64, f64)> = (0..6).flat_map(|y| (0..6).map(move |x| (x as f64 * 2.0, y as f64 * 2.0))).collect();
        let g = MrfGraph::delaunay(pts(&coords), 1.0).unwrap();
        let regions = segment_regions(&g);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].edges(), g.edges());
        assert_eq!(regions[0].vertex_count(), g.vertex_count());
    }

    #[test]
    fn distant_clusters_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut coords = Vec::new();
        // Two 40-point clusters with ~2 px spacing, 200 px apart.
        for &ox in &[0.0, 200.0] {
            while coords.iter().filter(|c: &&(f64, f64)| (c.0 - ox).abs() < 50.0).count() < 40 {
                let c = (ox + rng.random_range(0..14) as f64, rng.random_range(0..14) as f64);
                if !coords.contains(&c) {
                    coords.push(c);
                }
            }
        }
        let g = MrfGraph::delaunay(pts(&coords), 1.0).unwrap();
        let regions = segment_regions(&g);
        // Oracle: cluster membership by x coordinate; every region lies on one side.
        let big: Vec<&MrfGraph> = regions.iter().filter(|r| r.vertex_count() > 1).collect();
        assert!(big.len() >= 2);
        for r in &regions {
            let left = r.vertices().iter().filter(|p| p.x < 100.0).count();
            assert!(left == 0 || left == r.vertex_count());
        }
        let total: usize = regions.iter().map(|r| r.vertex_count()).sum();
        assert_eq!(total, g.vertex_count());
    }

    #[test]
    fn regions_partition_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut coords = Vec::new();
        while coords.len() < 200 {
            let c = (rng.random_range(0..500) as f64, rng.random_range(0..80) as f64);
            if !coords.contains(&c) {
                coords.push(c);
            }
        }
        let g = MrfGraph::delaunay(pts(&coords), 1.0).unwrap();
        let mut ids: Vec<usize> = segment_regions(&g).iter().flat_map(|r| r.vertices().iter().map(|p| p.id)).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn edgeless_graph_yields_singletons() {
        let g = MrfGraph::new(pts(&[(0.0, 0.0), (5.0, 5.0), (9.0, 1.0)]), Vec::new(), Vec::new(), 1.0).unwrap();
        let regions = segment_regions(&g);
        assert_eq!(regions.len(), 3);
        assert!(regions.iter().all(|r| r.vertex_count() == 1 && r.edges().is_empty()));
    }
}
