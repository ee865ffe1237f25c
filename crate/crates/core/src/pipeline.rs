//! End-to-end segmentation: initial lines, sampling and regions, the EM loop
//! (message-passing E-step, regression M-step), surplus pruning, fragment
//! merging and the final per-component / per-pixel labelling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::document::BinaryDocument;
use crate::graph::{sample_text_pixels, segment_regions, MrfGraph, SamplePoint};
use crate::init::{initial_lines, Blob, InitConfig};
use crate::lines::{compute_plateau_among, unary_log_likelihood, weighted_fit, LineModel, Posteriors, Variant, DEAD_WEIGHT};
use crate::math::softmax_in_place;
use crate::mrf::{message_passing, ArmijoStep, MessagePassingConfig, Moments, PriorParams, DEFAULT_PAIRWISE_MOMENTS, PAIRWISE_CASES};
use crate::raster::Raster;
use crate::{Error, Result};

/// EM and post-processing settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the mean symmetric KL between successive posteriors drops below this.
    pub kld_threshold: f64,
    /// Lines whose prior ends below this are pruned.
    pub prune_epsilon: f64,
    /// Plateau ratio `r` of the flattened fitting feature.
    pub plateau_ratio: f64,
    pub sampling_ratio: f64,
    /// Counting number `c_v` of every vertex.
    pub counting_number: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Target frequencies of the pairwise cases (equal, adjacent, farther).
    pub pairwise_moments: [f64; PAIRWISE_CASES],
    /// Solver settings; the pipeline default regularizes `θ` (see
    /// [`DEFAULT_REGULARIZATION`]).
    pub message_passing: MessagePassingConfig,
}

/// Per-edge weight of the Gaussian penalty on `θ` used by the pipeline. Fixed
/// pairwise moments never match a particular page exactly; unpenalized moment
/// matching then drives `θ` toward infinity and the solver stalls.
pub const DEFAULT_REGULARIZATION: f64 = 0.1;

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 50,
            kld_threshold: 1e-4,
            prune_epsilon: 1e-3,
            plateau_ratio: 0.3,
            sampling_ratio: 0.05,
            counting_number: 1.0,
            variant: Variant::Shear,
            seed: 0,
            pairwise_moments: DEFAULT_PAIRWISE_MOMENTS,
            message_passing: MessagePassingConfig { regularization: DEFAULT_REGULARIZATION, ..MessagePassingConfig::default() },
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.kld_threshold, self.prune_epsilon, self.plateau_ratio, self.counting_number];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(format!("EM thresholds must be positive: {self:?}")));
        }
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("sampling ratio {} outside (0, 1]", self.sampling_ratio)));
        }
        Moments::new(self.pairwise_moments, Vec::new())?;
        Ok(())
    }
}

/// Outcome of [`run_em`] on one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    /// Lines after the last M-step, priors included.
    pub lines: Vec<LineModel>,
    /// Posteriors of the last E-step.
    pub posteriors: Posteriors,
    pub converged: bool,
    pub iterations: usize,
    pub theta: PriorParams,
    pub armijo: Vec<ArmijoStep>,
    /// Line priors after every M-step.
    pub prior_trace: Vec<Vec<f64>>,
    /// Mean symmetric KL between successive posteriors, from the second iteration.
    pub kld_trace: Vec<f64>,
}

/// Per-group statistics kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub regions: usize,
    pub vertices: usize,
    pub edges: usize,
    pub initial_lines: usize,
    pub after_prune: usize,
    pub final_lines: usize,
    pub iterations: usize,
    pub converged: bool,
    pub prior_trace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Orientation picked by the filter bank, degrees.
    pub alpha_deg: f64,
    pub initial_lines: usize,
    pub samples: usize,
    pub regions: usize,
    pub groups: Vec<GroupReport>,
    pub armijo: Vec<ArmijoStep>,
}

impl Diagnostics {
    /// Learning steps whose dual value dropped by more than `slack`.
    pub fn armijo_violations(&self, slack: f64) -> usize {
        self.armijo.iter().filter(|s| s.dual_after < s.dual_before - slack).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Surviving lines; line id `k + 1` refers to `lines[k]`.
    pub lines: Vec<LineModel>,
    /// Line id of every connected component (the majority label of its
    /// sampled variables when they disagree); 0 only when no line exists.
    pub component_labels: Vec<u32>,
    /// Line id of every ink pixel, 0 for background.
    pub pixel_labels: Raster<u32>,
    pub converged: bool,
    /// Largest EM iteration count over groups.
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

/// Mean over vertices of `softmax(unary_v + log prior)`.
fn line_targets(unary: &[f64], priors: &[f64], n: usize) -> Vec<f64> {
    let l = priors.len();
    let mut mu = vec![0.0; l];
    let mut row = vec![0.0; l];
    for v in 0..n {
        for k in 0..l {
            row[k] = if priors[k] > 0.0 { unary[v * l + k] + priors[k].ln() } else { f64::NEG_INFINITY };
        }
        softmax_in_place(&mut row);
        for (m, p) in mu.iter_mut().zip(&row) {
            *m += p / n as f64;
        }
    }
    mu
}

/// Line log-likelihoods of every vertex; dead lines get a log-potential far
/// below every live one so they receive no belief mass.
fn likelihoods(points: &[SamplePoint], lines: &[LineModel], alive: &[bool], cfg: &EmConfig) -> Vec<f64> {
    let mut u = unary_log_likelihood(points, lines, cfg.plateau_ratio, cfg.variant);
    let l = lines.len();
    if alive.iter().all(|&a| a) {
        return u;
    }
    for row in u.chunks_mut(l) {
        let top = row.iter().zip(alive).filter(|(_, &a)| a).map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
        for (x, &a) in row.iter_mut().zip(alive) {
            if !a {
                *x = top - 1e3;
            }
        }
    }
    u
}

/// Unary log-potentials handed to the solver: each vertex's likelihoods
/// scaled by its total entropy weight `c_v + deg(v)`.
///
/// With every edge entropy counted once, the free energy tempers a vertex's
/// data term by that weight; without compensation a vertex with six
/// neighbours sees its likelihood ratios shrink sevenfold and the soft
/// M-step drags every line towards its neighbours. An isolated vertex keeps
/// its likelihoods unchanged.
pub fn scaled_unaries(graph: &MrfGraph, likelihood: &[f64], l: usize) -> Vec<f64> {
    let mut u = likelihood.to_vec();
    for (v, row) in u.chunks_mut(l).enumerate() {
        let w = graph.counting_number(v) + graph.degree(v) as f64;
        row.iter_mut().for_each(|x| *x *= w);
    }
    u
}

/// Runs EM on one graph from `initial` lines.
///
/// Each iteration: message passing with the current unaries (learning the
/// prior, warm-started from the previous `θ`), then weighted regression
/// updates, priors and plateaus. The line-probability targets are refreshed
/// from the new lines and priors. A line whose responsibility vanishes is
/// frozen with prior 0.
pub fn run_em(graph: &MrfGraph, initial: &[LineModel], moments: &Moments, cfg: &EmConfig) -> Result<EmOutcome> {
    cfg.validate()?;
    let l = initial.len();
    if l == 0 {
        return Err(Error::InvalidConfig("run_em needs at least one initial line".into()));
    }
    let points = graph.vertices();
    let n = points.len();
    let mut lines = initial.to_vec();
    let mut alive = vec![true; l];
    let uniform = 1.0 / l as f64;
    for line in &mut lines {
        line.prior = uniform;
    }
    compute_plateau_among(&mut lines, &alive);
    let mut loglik = likelihoods(points, &lines, &alive, cfg);
    let mut mu_line = if moments.line.len() == l { moments.line.clone() } else { line_targets(&loglik, &vec![uniform; l], n) };
    let mut theta = PriorParams::zeros(l);
    let mut previous: Option<Posteriors> = None;
    let mut out = EmOutcome {
        lines: Vec::new(),
        posteriors: Posteriors::uniform(n, l),
        converged: false,
        iterations: 0,
        theta: theta.clone(),
        armijo: Vec::new(),
        prior_trace: Vec::new(),
        kld_trace: Vec::new(),
    };
    for it in 1..=cfg.max_iterations {
        out.iterations = it;
        let target = Moments { pairwise: moments.pairwise, line: mu_line.clone() };
        let unary = scaled_unaries(graph, &loglik, l);
        let (learned, beliefs, report) = message_passing(graph, &unary, &target, &theta, &cfg.message_passing)?;
        theta = learned;
        out.armijo.extend(report.armijo);
        let post = beliefs.posteriors();

        let sums = post.column_sums();
        for k in 0..l {
            if !alive[k] {
                continue;
            }
            let fitted = if sums[k] < DEAD_WEIGHT {
                None
            } else {
                weighted_fit(points.iter().enumerate().map(|(v, p)| (p.x, p.y, post.get(v, k))), cfg.variant)
            };
            match fitted {
                Some(mut line) => {
                    line.prior = sums[k] / n as f64;
                    lines[k] = line;
                }
                None => {
                    alive[k] = false;
                    lines[k].prior = 0.0;
                }
            }
        }
        compute_plateau_among(&mut lines, &alive);
        loglik = likelihoods(points, &lines, &alive, cfg);
        let priors: Vec<f64> = lines.iter().map(|x| x.prior).collect();
        mu_line = line_targets(&loglik, &priors, n);
        out.prior_trace.push(priors);

        let done = match &previous {
            Some(prev) => {
                let kld = post.mean_symmetric_kl(prev);
                out.kld_trace.push(kld);
                kld < cfg.kld_threshold
            }
            None => false,
        };
        previous = Some(post);
        if done {
            out.converged = true;
            break;
        }
    }
    out.lines = lines;
    out.posteriors = previous.expect("at least one iteration ran");
    out.theta = theta;
    Ok(out)
}

/// Removes lines with prior below `epsilon`, renormalizes the remaining
/// priors and posterior rows, and returns the kept original indices. If
/// every line falls below `epsilon` the highest-prior line is kept.
pub fn prune_surplus(lines: &[LineModel], post: &Posteriors, epsilon: f64) -> (Vec<LineModel>, Posteriors, Vec<usize>) {
    let mut keep: Vec<usize> = (0..lines.len()).filter(|&k| lines[k].prior >= epsilon).collect();
    if keep.is_empty() && !lines.is_empty() {
        let best = (0..lines.len()).fold(0, |b, k| if lines[k].prior > lines[b].prior { k } else { b });
        keep.push(best);
    }
    let total: f64 = keep.iter().map(|&k| lines[k].prior).sum();
    let kept = keep
        .iter()
        .map(|&k| {
            let mut line = lines[k];
            line.prior = if total > 0.0 { line.prior / total } else { 1.0 / keep.len() as f64 };
            line
        })
        .collect();
    (kept, post.select_columns(&keep), keep)
}

/// Lines sharing at least this fraction of their samples' components are
/// bands of one text line (see [`shared_component_fraction`]).
pub const DUPLICATE_SHARE: f64 = 0.5;

/// Whether lines `i` and `j` are pieces of one text line: nearly parallel
/// and either fragments (close or overlapping horizontally, each passing
/// within `1.5 σ_t` of the other's centre) or duplicates (overlapping
/// horizontally and splitting the same connected components).
fn mergeable(lines: &[LineModel], points: &[SamplePoint], post: &Posteriors, i: usize, j: usize) -> bool {
    let (p, q) = (&lines[i], &lines[j]);
    if (p.angle() - q.angle()).abs() >= 5f64.to_radians() {
        return false;
    }
    fragments(p, q) || (overlapping(p, q) && shared_component_fraction(points, post, i, j) >= DUPLICATE_SHARE)
}

fn overlapping(p: &LineModel, q: &LineModel) -> bool {
    let ((p0, p1), (q0, q1)) = (p.segment(), q.segment());
    p0.max(q0) < p1.min(q1)
}

fn fragments(p: &LineModel, q: &LineModel) -> bool {
    let ((p0, p1), (q0, q1)) = (p.segment(), q.segment());
    let half = ((p1 - p0) / 2.0).max((q1 - q0) / 2.0);
    let gap = p0.max(q0) - p1.min(q1);
    if gap >= 2.0 * half {
        return false;
    }
    (p.y_at(q.c) - q.y_at(q.c)).abs() <= 1.5 * q.sigma_t2.sqrt() && (q.y_at(p.c) - p.y_at(p.c)).abs() <= 1.5 * p.sigma_t2.sqrt()
}

/// Share of the samples dominated by line `i` or `j` that lie in connected
/// components holding samples dominated by both. Distinct text lines share
/// components only where strokes touch; two lines splitting one text line
/// into bands share nearly all of them.
pub fn shared_component_fraction(points: &[SamplePoint], post: &Posteriors, i: usize, j: usize) -> f64 {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (v, p) in points.iter().enumerate() {
        let k = post.argmax(v);
        if k == i || k == j {
            let c = counts.entry(p.component).or_default();
            if k == i {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
    }
    let (shared, total) = counts.values().fold((0, 0), |(s, t), &(a, b)| (s + if a > 0 && b > 0 { a + b } else { 0 }, t + a + b));
    if total == 0 {
        0.0
    } else {
        shared as f64 / total as f64
    }
}

/// Merges fragment and duplicate pairs until none is left. A merged line is refitted by
/// weighted least squares over the points whose most probable label is one
/// of the pair, weighted by their combined responsibility; posterior columns
/// and priors are summed. Returns the lines, posteriors and the map from
/// input line index to output line index.
pub fn merge_fragments(
    lines: &[LineModel],
    points: &[SamplePoint],
    post: &Posteriors,
    variant: Variant,
) -> (Vec<LineModel>, Posteriors, Vec<usize>) {
    let mut lines = lines.to_vec();
    let mut post = post.clone();
    let mut map: Vec<usize> = (0..lines.len()).collect();
    'search: loop {
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                if !mergeable(&lines, points, &post, i, j) {
                    continue;
                }
                let samples = points.iter().enumerate().filter_map(|(v, p)| {
                    let dominant = post.argmax(v);
                    (dominant == i || dominant == j).then(|| (p.x, p.y, post.get(v, i) + post.get(v, j)))
                });
                let Some(mut merged) = weighted_fit(samples, variant) else { continue };
                merged.prior = lines[i].prior + lines[j].prior;
                merged.plateau = lines[i].plateau.max(lines[j].plateau);
                lines[i] = merged;
                lines.remove(j);
                let cols = post.cols();
                let mut data = Vec::with_capacity(post.rows() * (cols - 1));
                for v in 0..post.rows() {
                    let row = post.row(v);
                    for (k, &p) in row.iter().enumerate() {
                        if k == i {
                            data.push(p + row[j]);
                        } else if k != j {
                            data.push(p);
                        }
                    }
                }
                post = Posteriors::from_vec(post.rows(), cols - 1, data);
                for m in &mut map {
                    *m = match (*m).cmp(&j) {
                        core::cmp::Ordering::Equal => i,
                        core::cmp::Ordering::Greater => *m - 1,
                        core::cmp::Ordering::Less => *m,
                    };
                }
                continue 'search;
            }
        }
        break;
    }
    (lines, post, map)
}

/// Labels components and pixels from per-sample line indices.
///
/// `samples` pairs each sampled variable with an index into `lines`.
/// A component whose variables agree takes that line; a component with
/// mixed labels is split pixel-wise by perpendicular distance to the lines
/// its variables voted for; a component without variables goes to the line
/// closest (as a segment) to its centroid. Returned ids are `index + 1`.
pub fn final_labeling(doc: &BinaryDocument, lines: &[LineModel], samples: &[(SamplePoint, usize)]) -> (Vec<u32>, Raster<u32>) {
    let ccs = doc.components();
    let mut votes: Vec<Vec<usize>> = vec![Vec::new(); ccs.len()];
    for (p, k) in samples {
        votes[p.component].push(*k);
    }
    let mut component_labels = vec![0u32; ccs.len()];
    let mut pixels = Raster::filled(doc.width(), doc.height(), 0u32);
    if lines.is_empty() {
        return (component_labels, pixels);
    }
    for (c, cc) in ccs.iter().enumerate() {
        let distinct: BTreeSet<usize> = votes[c].iter().copied().collect();
        match distinct.len() {
            0 => {
                let (cx, cy) = cc.centroid();
                let best = (0..lines.len())
                    .min_by(|&a, &b| lines[a].segment_distance(cx, cy).total_cmp(&lines[b].segment_distance(cx, cy)))
                    .unwrap();
                component_labels[c] = best as u32 + 1;
                for &(x, y) in &cc.pixels {
                    pixels.set(x as usize, y as usize, best as u32 + 1);
                }
            }
            1 => {
                let id = *distinct.first().unwrap() as u32 + 1;
                component_labels[c] = id;
                for &(x, y) in &cc.pixels {
                    pixels.set(x as usize, y as usize, id);
                }
            }
            _ => {
                let candidates: Vec<usize> = distinct.into_iter().collect();
                let majority = candidates
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let (na, nb) = (votes[c].iter().filter(|&&k| k == a).count(), votes[c].iter().filter(|&&k| k == b).count());
                        na.cmp(&nb).then(b.cmp(&a))
                    })
                    .unwrap();
                component_labels[c] = majority as u32 + 1;
                for &(x, y) in &cc.pixels {
                    let (fx, fy) = (x as f64, y as f64);
                    let best = candidates
                        .iter()
                        .copied()
                        .min_by(|&a, &b| lines[a].distance(fx, fy).total_cmp(&lines[b].distance(fx, fy)))
                        .unwrap();
                    pixels.set(x as usize, y as usize, best as u32 + 1);
                }
            }
        }
    }
    (component_labels, pixels)
}

/// One independent EM problem: connected regions sharing candidate lines.
struct Group {
    regions: usize,
    graph: MrfGraph,
    lines: Vec<LineModel>,
}

struct GroupResult {
    lines: Vec<LineModel>,
    labels: Vec<(SamplePoint, usize)>,
    report: GroupReport,
    armijo: Vec<ArmijoStep>,
}

fn process_group(group: Group, cfg: &EmConfig) -> Result<GroupResult> {
    let mut lines = group.lines;
    lines.sort_by(|p, q| p.y_at(p.c).total_cmp(&q.y_at(q.c)).then(p.c.total_cmp(&q.c)));
    let moments = Moments { pairwise: cfg.pairwise_moments, line: Vec::new() };
    let em = run_em(&group.graph, &lines, &moments, cfg)?;
    let (pruned, post, _) = prune_surplus(&em.lines, &em.posteriors, cfg.prune_epsilon);
    let after_prune = pruned.len();
    let points = group.graph.vertices();
    let (merged, post, _) = merge_fragments(&pruned, points, &post, cfg.variant);
    let labels = points.iter().enumerate().map(|(v, p)| (*p, post.argmax(v))).collect();
    let report = GroupReport {
        regions: group.regions,
        vertices: group.graph.vertex_count(),
        edges: group.graph.edges().len(),
        initial_lines: lines.len(),
        after_prune,
        final_lines: merged.len(),
        iterations: em.iterations,
        converged: em.converged,
        prior_trace: em.prior_trace,
    };
    Ok(GroupResult { lines: merged, labels, report, armijo: em.armijo })
}

/// Groups regions that share a candidate line (union-find over regions);
/// `links[r]` lists the line indices attached to region `r`. Regions with
/// no line are dropped.
fn group_regions(regions: Vec<MrfGraph>, links: &[BTreeSet<usize>], lines: &[LineModel]) -> Vec<Group> {
    let r = regions.len();
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: Vec<Option<usize>> = vec![None; lines.len()];
    for (k, set) in links.iter().enumerate() {
        for &l in set {
            match owner[l] {
                None => owner[l] = Some(k),
                Some(o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, k));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); r];
    for k in 0..r {
        if !links[k].is_empty() {
            let root = find(&mut parent, k);
            members[root].push(k);
        }
    }
    members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let parts: Vec<&MrfGraph> = m.iter().map(|&k| &regions[k]).collect();
            let ids: BTreeSet<usize> = m.iter().flat_map(|&k| links[k].iter().copied()).collect();
            Group { regions: m.len(), graph: MrfGraph::disjoint_union(&parts), lines: ids.into_iter().map(|l| lines[l]).collect() }
        })
        .collect()
}

fn empty_result(doc: &BinaryDocument) -> SegmentationResult {
    SegmentationResult {
        lines: Vec::new(),
        component_labels: vec![0; doc.components().len()],
        pixel_labels: Raster::filled(doc.width(), doc.height(), 0),
        converged: true,
        iterations: 0,
        diagnostics: Diagnostics::default(),
    }
}

/// Samples the page and builds its Delaunay graph and regions.
fn sample_regions(doc: &BinaryDocument, cfg: &EmConfig) -> Result<(usize, Vec<MrfGraph>)> {
    let points = sample_text_pixels(doc, cfg.sampling_ratio, cfg.seed)?;
    let n = points.len();
    let graph = MrfGraph::build(points, cfg.counting_number)?;
    Ok((n, segment_regions(&graph)))
}

fn assemble(doc: &BinaryDocument, groups: Vec<Group>, mut diagnostics: Diagnostics, cfg: &EmConfig) -> Result<SegmentationResult> {
    let mut all_lines: Vec<LineModel> = Vec::new();
    let mut samples: Vec<(SamplePoint, usize)> = Vec::new();
    let (mut converged, mut iterations) = (true, 0);
    for group in groups {
        let res = process_group(group, cfg)?;
        let base = all_lines.len();
        all_lines.extend(res.lines);
        samples.extend(res.labels.into_iter().map(|(p, k)| (p, k + base)));
        converged &= res.report.converged;
        iterations = iterations.max(res.report.iterations);
        diagnostics.groups.push(res.report);
        diagnostics.armijo.extend(res.armijo);
    }
    // Page-level ids follow the vertical order of the line centres.
    let mut order: Vec<usize> = (0..all_lines.len()).collect();
    order.sort_by(|&p, &q| {
        let (a, b) = (&all_lines[p], &all_lines[q]);
        a.y_at(a.c).total_cmp(&b.y_at(b.c)).then(a.c.total_cmp(&b.c))
    });
    let mut rank = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let lines: Vec<LineModel> = order.iter().map(|&k| all_lines[k]).collect();
    for s in &mut samples {
        s.1 = rank[s.1];
    }
    let (component_labels, pixel_labels) = final_labeling(doc, &lines, &samples);
    Ok(SegmentationResult { lines, component_labels, pixel_labels, converged, iterations, diagnostics })
}

/// Full pipeline on one page.
pub fn segment(doc: &BinaryDocument, cfg: &EmConfig, init: &InitConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    init.validate()?;
    if doc.text_pixel_count() == 0 {
        return Ok(empty_result(doc));
    }
    let (blobs, mut lines, alpha) = initial_lines(doc, init)?;
    let (samples, regions) = sample_regions(doc, cfg)?;
    let mut diagnostics = Diagnostics { alpha_deg: alpha, initial_lines: lines.len(), samples, regions: regions.len(), ..Default::default() };

    let links: Vec<BTreeSet<usize>> = if lines.is_empty() {
        // No blob survived: a single line over every sample.
        let all: Vec<&SamplePoint> = regions.iter().flat_map(|g| g.vertices()).collect();
        let fit = weighted_fit(all.iter().map(|p| (p.x, p.y, 1.0)), Variant::Shear).ok_or(Error::EmptyMask)?;
        lines.push(fit);
        diagnostics.initial_lines = 1;
        regions.iter().map(|_| BTreeSet::from([0])).collect()
    } else {
        let owner = blob_owner(doc, &blobs);
        regions
            .iter()
            .map(|g| {
                g.vertices()
                    .iter()
                    .filter_map(|p| match *owner.get(p.x as usize, p.y as usize) {
                        0 => None,
                        b => Some(b as usize - 1),
                    })
                    .collect()
            })
            .collect()
    };
    let groups = group_regions(regions, &links, &lines);
    assemble(doc, groups, diagnostics, cfg)
}

/// Pipeline with caller-supplied initial lines instead of the filter bank;
/// every region shares the whole line set.
pub fn segment_with_lines(doc: &BinaryDocument, lines: &[LineModel], cfg: &EmConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    if doc.text_pixel_count() == 0 {
        return Ok(empty_result(doc));
    }
    if lines.is_empty() {
        return Err(Error::InvalidConfig("segment_with_lines needs at least one line".into()));
    }
    let (samples, regions) = sample_regions(doc, cfg)?;
    let diagnostics = Diagnostics { initial_lines: lines.len(), samples, regions: regions.len(), ..Default::default() };
    let links: Vec<BTreeSet<usize>> = regions.iter().map(|_| (0..lines.len()).collect()).collect();
    let groups = group_regions(regions, &links, lines);
    assemble(doc, groups, diagnostics, cfg)
}

/// Raster of blob index + 1 (0 outside every blob).
fn blob_owner(doc: &BinaryDocument, blobs: &[Blob]) -> Raster<u32> {
    let mut owner = Raster::filled(doc.width(), doc.height(), 0u32);
    for (k, b) in blobs.iter().enumerate() {
        for &(x, y) in &b.pixels {
            owner.set(x as usize, y as usize, k as u32 + 1);
        }
    }
    owner
}
