//! Label prior over the Delaunay graph and the message-passing solver that
//! minimizes the convex free energy while learning the prior parameters by
//! moment matching.
//!
//! Beliefs are parametrized by directed log-messages `log m_{v→u}`:
//!
//! ```text
//! p_u(h_i, h_j) ∝ exp(-θ·f(h_i, h_j)) m_{i→u}(h_i) m_{j→u}(h_j)
//! p_v(h)        ∝ (exp(g_v(h)) Π_u m_{v←u}(h))^{1/(c_v + A_v)}
//! ```
//!
//! Each vertex update exactly maximizes the concave dual
//! `D = -Σ_u log Z_u - Σ_v c_v log Z_v - Σ_k θ_k M_k` over that vertex's
//! messages, and each sweep starts with one Armijo gradient-ascent step on
//! `θ`. The dual gradient in `θ_k` is the moment residual
//! `Σ_u E_{p_u}[f_k] - M_k`, and in the messages it is the
//! sum-marginalization residual, so a stationary point satisfies both.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::graph::MrfGraph;
use crate::lines::Posteriors;
use crate::math::{log_sum_exp, xlogx};
use crate::{Error, Result};

/// Number of pairwise cases: equal labels, adjacent labels, farther apart.
pub const PAIRWISE_CASES: usize = 3;

/// Built-in pairwise moments used when no training statistics are supplied.
pub const DEFAULT_PAIRWISE_MOMENTS: [f64; PAIRWISE_CASES] = [0.90, 0.09, 0.01];

/// Pairwise case of a label pair: 0 if equal, 1 if adjacent, 2 otherwise.
pub fn pairwise_feature(hi: usize, hj: usize) -> usize {
    match hi.abs_diff(hj) {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// Parameters of the label prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorParams {
    /// Weights of the three pairwise cases.
    pub pairwise: [f64; PAIRWISE_CASES],
    /// One weight per line; the edge feature is `½([h_i = l] + [h_j = l])`.
    pub line: Vec<f64>,
}

impl PriorParams {
    pub fn zeros(lines: usize) -> Self {
        PriorParams { pairwise: [0.0; PAIRWISE_CASES], line: vec![0.0; lines] }
    }

    pub fn lines(&self) -> usize {
        self.line.len()
    }

    /// `θ·f(h_i, h_j)` for one edge configuration.
    pub fn edge_energy(&self, hi: usize, hj: usize) -> f64 {
        self.pairwise[pairwise_feature(hi, hj)] + 0.5 * (self.line[hi] + self.line[hj])
    }

    fn as_vector(&self) -> Vec<f64> {
        let mut v = self.pairwise.to_vec();
        v.extend_from_slice(&self.line);
        v
    }

    fn from_vector(v: &[f64]) -> Self {
        PriorParams { pairwise: [v[0], v[1], v[2]], line: v[PAIRWISE_CASES..].to_vec() }
    }
}

/// Target feature frequencies per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    /// Frequencies of the three pairwise cases; sum to 1.
    pub pairwise: [f64; PAIRWISE_CASES],
    /// Target line probabilities; sum to 1.
    pub line: Vec<f64>,
}

impl Moments {
    pub fn new(pairwise: [f64; PAIRWISE_CASES], line: Vec<f64>) -> Result<Self> {
        let ok = pairwise.iter().all(|&m| (0.0..=1.0).contains(&m)) && (pairwise.iter().sum::<f64>() - 1.0).abs() < 1e-6;
        if !ok {
            return Err(Error::InvalidConfig(alloc::format!("pairwise moments {pairwise:?} are not a distribution")));
        }
        Ok(Moments { pairwise, line })
    }

    /// Default pairwise moments with uniform line targets.
    pub fn with_uniform_lines(lines: usize) -> Self {
        Moments { pairwise: DEFAULT_PAIRWISE_MOMENTS, line: vec![1.0 / lines.max(1) as f64; lines] }
    }
}

/// Empirical pairwise-case frequencies of a labelling over the graph's edges.
pub fn pairwise_moments_from_labels(graph: &MrfGraph, labels: &[usize]) -> [f64; PAIRWISE_CASES] {
    let mut counts = [0.0; PAIRWISE_CASES];
    for &(i, j) in graph.edges() {
        counts[pairwise_feature(labels[i], labels[j])] += 1.0;
    }
    let total = graph.edges().len().max(1) as f64;
    counts.map(|c| c / total)
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MessagePassingConfig {
    pub max_sweeps: usize,
    /// Convergence threshold on the sum-marginalization residual and the
    /// per-edge moment residual.
    pub tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    /// Step tried on the first sweep; later sweeps start from twice the last
    /// accepted step, capped at this value.
    pub initial_step: f64,
    /// Learn `θ` by moment matching; when false `θ` stays at its initial value.
    pub learn: bool,
    /// Per-edge weight `ρ` of a Gaussian penalty `ρ |E| |θ|² / 2` on the
    /// learned parameters. Zero gives exact moment matching; a positive value
    /// keeps `θ` finite when the targets are far from what the data supports.
    pub regularization: f64,
    /// Keep one [`SweepRecord`] per sweep.
    pub record_sweeps: bool,
}

impl Default for MessagePassingConfig {
    fn default() -> Self {
        MessagePassingConfig {
            max_sweeps: 200,
            tol: 1e-6,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            learn: true,
            regularization: 0.0,
            record_sweeps: false,
        }
    }
}

/// Per-sweep diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub dual: f64,
    pub residual: f64,
}

/// One learning step: dual value before and after, and the accepted step
/// size (0 when no step satisfied the Armijo condition).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoStep {
    pub dual_before: f64,
    pub dual_after: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MessagePassingReport {
    pub sweeps: usize,
    pub converged: bool,
    pub marginal_residual: f64,
    /// Largest `|Σ_u E f_k - M_k - ρ|E|θ_k| / |E|` over learned features.
    pub moment_residual: f64,
    pub dual: f64,
    pub armijo: Vec<ArmijoStep>,
    pub trace: Vec<SweepRecord>,
}

/// Node and edge beliefs plus the directed log-messages that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    labels: usize,
    node: Vec<f64>,
    edge: Vec<f64>,
    log_messages: Vec<f64>,
}

impl BeliefState {
    pub fn labels(&self) -> usize {
        self.labels
    }

    /// `p_v` of vertex `v`.
    pub fn node(&self, v: usize) -> &[f64] {
        &self.node[v * self.labels..(v + 1) * self.labels]
    }

    /// `p_u` of edge `e`, row-major over `(h_i, h_j)` with `i < j`.
    pub fn edge(&self, e: usize) -> &[f64] {
        let l2 = self.labels * self.labels;
        &self.edge[e * l2..(e + 1) * l2]
    }

    /// `log m_{v→u}` for edge `e` seen from endpoint `side` (0 = smaller id).
    pub fn log_message(&self, e: usize, side: usize) -> &[f64] {
        let k = 2 * e + side;
        &self.log_messages[k * self.labels..(k + 1) * self.labels]
    }

    pub fn posteriors(&self) -> Posteriors {
        Posteriors::from_vec(self.node.len() / self.labels.max(1), self.labels, self.node.clone())
    }

    /// Largest `|Σ_{h_u∖v} p_u - p_v|` over edges, endpoints and labels.
    pub fn marginal_residual(&self, graph: &MrfGraph) -> f64 {
        marginal_residual(graph, self.labels, &self.node, &self.edge)
    }

    /// Model feature totals `Σ_u E_{p_u}[f_k]`: three pairwise cases, then lines.
    pub fn feature_totals(&self, graph: &MrfGraph) -> Vec<f64> {
        let l = self.labels;
        let mut totals = vec![0.0; PAIRWISE_CASES + l];
        for e in 0..graph.edges().len() {
            accumulate_features(self.edge(e), l, &mut totals);
        }
        totals
    }
}

fn marginal_residual(graph: &MrfGraph, l: usize, node: &[f64], edge: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let pu = &edge[e * l * l..(e + 1) * l * l];
        for h in 0..l {
            let row: f64 = pu[h * l..(h + 1) * l].iter().sum();
            let col: f64 = (0..l).map(|k| pu[k * l + h]).sum();
            worst = worst.max((row - node[i * l + h]).abs()).max((col - node[j * l + h]).abs());
        }
    }
    worst
}

fn accumulate_features(pu: &[f64], l: usize, totals: &mut [f64]) {
    for hi in 0..l {
        for hj in 0..l {
            let p = pu[hi * l + hj];
            totals[pairwise_feature(hi, hj)] += p;
            totals[PAIRWISE_CASES + hi] += 0.5 * p;
            totals[PAIRWISE_CASES + hj] += 0.5 * p;
        }
    }
}

/// Which features are learnable on a graph with `edges` edges and `l` labels.
/// Features that are constant over all configurations are dropped: with them
/// the dual is flat or unbounded along their direction.
fn active_features(edges: usize, l: usize) -> Vec<bool> {
    let mut active = vec![false; PAIRWISE_CASES + l];
    if edges == 0 || l < 2 {
        return active;
    }
    active[0] = true;
    active[1] = true;
    active[2] = l >= 3;
    for a in &mut active[PAIRWISE_CASES..] {
        *a = true;
    }
    active
}

/// Per-edge targets `μ_k`, renormalized over the active pairwise cases.
fn targets(moments: &Moments, active: &[bool]) -> Vec<f64> {
    let mut t: Vec<f64> = moments.pairwise.to_vec();
    let mass: f64 = (0..PAIRWISE_CASES).filter(|&k| active[k]).map(|k| t[k]).sum();
    for (k, tk) in t.iter_mut().enumerate() {
        *tk = if active[k] && mass > 0.0 { *tk / mass } else { 0.0 };
    }
    t.extend_from_slice(&moments.line);
    for (tk, &on) in t.iter_mut().zip(active).skip(PAIRWISE_CASES) {
        if !on {
            *tk = 0.0;
        }
    }
    t
}

/// Precomputed factorization of `exp(-θ·f)`: a pairwise matrix with its
/// minimum energy factored out and the per-label half line weights.
struct EdgeFactor {
    l: usize,
    pair: Vec<f64>,
    pair_min: f64,
    half_line: Vec<f64>,
    energy: Vec<f64>,
}

impl EdgeFactor {
    fn new(theta: &PriorParams) -> Self {
        let l = theta.lines();
        let pair_min = theta.pairwise[..PAIRWISE_CASES.min(l.max(1))].iter().copied().fold(f64::INFINITY, f64::min);
        let mut pair = vec![0.0; l * l];
        let mut energy = vec![0.0; l * l];
        for hi in 0..l {
            for hj in 0..l {
                pair[hi * l + hj] = (-(theta.pairwise[pairwise_feature(hi, hj)] - pair_min)).exp();
                energy[hi * l + hj] = theta.edge_energy(hi, hj);
            }
        }
        EdgeFactor { l, pair, pair_min, half_line: theta.line.iter().map(|t| 0.5 * t).collect(), energy }
    }

    /// `log Σ_{h'} exp(-θ·f(h, h') + lm(h'))` for every `h`.
    fn incoming(&self, lm_other: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let l = self.l;
        let shift = lm_other.iter().zip(&self.half_line).map(|(m, t)| m - t).fold(f64::NEG_INFINITY, f64::max);
        for h in 0..l {
            scratch[h] = (lm_other[h] - self.half_line[h] - shift).exp();
        }
        for h in 0..l {
            let s: f64 = self.pair[h * l..(h + 1) * l].iter().zip(&scratch[..l]).map(|(p, w)| p * w).sum();
            out[h] = if s > 0.0 && s.is_finite() {
                s.ln() + shift - self.pair_min - self.half_line[h]
            } else {
                let terms: Vec<f64> = (0..l).map(|k| -self.energy[h * l + k] + lm_other[k]).collect();
                log_sum_exp(&terms)
            };
        }
    }

    /// Log joint `-θ·f + lm_i + lm_j` normalized in place; returns `log Z_u`.
    fn edge_belief(&self, lm_i: &[f64], lm_j: &[f64], out: &mut [f64]) -> f64 {
        let l = self.l;
        for hi in 0..l {
            for hj in 0..l {
                out[hi * l + hj] = -self.energy[hi * l + hj] + lm_i[hi] + lm_j[hj];
            }
        }
        let lz = log_sum_exp(out);
        for x in out.iter_mut() {
            *x = (*x - lz).exp();
        }
        lz
    }

    fn log_partition(&self, lm_i: &[f64], lm_j: &[f64]) -> f64 {
        let l = self.l;
        let a: Vec<f64> = (0..l).map(|h| lm_i[h] - self.half_line[h]).collect();
        let b: Vec<f64> = (0..l).map(|h| lm_j[h] - self.half_line[h]).collect();
        let (ma, mb) = (a.iter().copied().fold(f64::NEG_INFINITY, f64::max), b.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let wb: Vec<f64> = b.iter().map(|x| (x - mb).exp()).collect();
        let mut s = 0.0;
        for hi in 0..l {
            let wa = (a[hi] - ma).exp();
            s += wa * self.pair[hi * l..(hi + 1) * l].iter().zip(&wb).map(|(p, w)| p * w).sum::<f64>();
        }
        if s > 0.0 && s.is_finite() {
            s.ln() + ma + mb - self.pair_min
        } else {
            let terms: Vec<f64> =
                (0..l * l).map(|k| -self.energy[k] + lm_i[k / l] + lm_j[k % l]).collect();
            log_sum_exp(&terms)
        }
    }
}

/// State shared by the sweep loop.
struct Solver<'a> {
    graph: &'a MrfGraph,
    unary: &'a [f64],
    l: usize,
    lm: Vec<f64>,
}

impl Solver<'_> {
    fn msg(&self, e: usize, side: usize) -> &[f64] {
        let k = 2 * e + side;
        &self.lm[k * self.l..(k + 1) * self.l]
    }

    /// Exact block update of all messages leaving `v`. Writes `log p_v`.
    fn update_vertex(&mut self, v: usize, factor: &EdgeFactor, incoming: &mut [f64], scratch: &mut [f64], log_pv: &mut [f64]) {
        let l = self.l;
        let inc = self.graph.incident(v);
        log_pv.copy_from_slice(&self.unary[v * l..(v + 1) * l]);
        for (k, edge) in inc.iter().enumerate() {
            let other = self.msg(edge.edge, 1 - edge.side);
            factor.incoming(other, &mut incoming[k * l..(k + 1) * l], scratch);
            for h in 0..l {
                log_pv[h] += incoming[k * l + h];
            }
        }
        let denom = self.graph.counting_number(v) + inc.len() as f64;
        for x in log_pv.iter_mut() {
            *x /= denom;
        }
        let lz = log_sum_exp(log_pv);
        for x in log_pv.iter_mut() {
            *x -= lz;
        }
        for (k, edge) in inc.iter().enumerate() {
            let slot = (2 * edge.edge + edge.side) * l;
            let out = &mut self.lm[slot..slot + l];
            let mut max = f64::NEG_INFINITY;
            for h in 0..l {
                out[h] = log_pv[h] - incoming[k * l + h];
                max = max.max(out[h]);
            }
            for x in out.iter_mut() {
                *x -= max;
            }
        }
    }

    /// `Σ_v c_v log Z_v` with `Z_v = Σ_h exp((g_v(h) - Σ_u log m_{v→u}(h)) / c_v)`.
    fn vertex_dual_term(&self) -> f64 {
        let l = self.l;
        let mut total = 0.0;
        let mut buf = vec![0.0; l];
        for v in 0..self.graph.vertex_count() {
            let cv = self.graph.counting_number(v);
            buf.copy_from_slice(&self.unary[v * l..(v + 1) * l]);
            for edge in self.graph.incident(v) {
                for (b, m) in buf.iter_mut().zip(self.msg(edge.edge, edge.side)) {
                    *b -= m;
                }
            }
            for b in buf.iter_mut() {
                *b /= cv;
            }
            total += cv * log_sum_exp(&buf);
        }
        total
    }

    fn edge_dual_term(&self, factor: &EdgeFactor) -> f64 {
        (0..self.graph.edges().len()).map(|e| factor.log_partition(self.msg(e, 0), self.msg(e, 1))).sum()
    }

    /// Edge beliefs and the feature totals they imply.
    fn edge_statistics(&self, factor: &EdgeFactor, beliefs: &mut [f64]) -> Vec<f64> {
        let l = self.l;
        let l2 = l * l;
        let mut totals = vec![0.0; PAIRWISE_CASES + l];
        for e in 0..self.graph.edges().len() {
            let out = &mut beliefs[e * l2..(e + 1) * l2];
            factor.edge_belief(self.msg(e, 0), self.msg(e, 1), out);
            accumulate_features(out, l, &mut totals);
        }
        totals
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs the constrained free-energy solver on one graph.
///
/// `unary` is the `N × L` row-major matrix of unary log-potentials. Messages
/// start at 1 and `θ` at `theta_init`. Returns the learned parameters, the
/// beliefs and a report; hitting `max_sweeps` is not an error (the report is
/// flagged non-converged).
pub fn message_passing(
    graph: &MrfGraph,
    unary: &[f64],
    moments: &Moments,
    theta_init: &PriorParams,
    cfg: &MessagePassingConfig,
) -> Result<(PriorParams, BeliefState, MessagePassingReport)> {
    let n = graph.vertex_count();
    let l = theta_init.lines();
    if l == 0 {
        return Err(Error::InvalidConfig("at least one label is required".into()));
    }
    if unary.len() != n * l {
        return Err(Error::InvalidConfig(alloc::format!("unary matrix has {} entries, expected {}", unary.len(), n * l)));
    }
    if moments.line.len() != l {
        return Err(Error::InvalidConfig(alloc::format!("{} line moments for {l} labels", moments.line.len())));
    }
    if !(cfg.regularization >= 0.0 && cfg.regularization.is_finite()) {
        return Err(Error::InvalidConfig("regularization must be finite and non-negative".into()));
    }
    if cfg.max_sweeps == 0 {
        return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
    }
    if let Some(k) = unary.iter().position(|u| !u.is_finite()) {
        return Err(Error::NonFiniteBelief { vertex: k / l, sweep: 0 });
    }
    let m = graph.edges().len();
    let learn: Vec<bool> = active_features(m, l).into_iter().map(|a| a && cfg.learn).collect();
    let mu = targets(moments, &learn);
    let big_m: Vec<f64> = mu.iter().map(|t| t * m as f64).collect();

    let mut solver = Solver { graph, unary, l, lm: vec![0.0; 2 * m * l] };
    let mut theta = theta_init.as_vector();
    let mut factor = EdgeFactor::new(theta_init);
    let mut edge_beliefs = vec![0.0; m * l * l];
    let mut node_log = vec![0.0; n * l];
    let max_degree = (0..n).map(|v| graph.degree(v)).max().unwrap_or(0);
    let mut incoming = vec![0.0; max_degree.max(1) * l];
    let mut scratch = vec![0.0; l];
    let mut report = MessagePassingReport::default();
    let mut step = cfg.initial_step;
    let mut totals = solver.edge_statistics(&factor, &mut edge_beliefs);

    let rho = cfg.regularization * m as f64;
    let gradient = |totals: &[f64], th: &[f64]| -> Vec<f64> {
        totals
            .iter()
            .zip(&big_m)
            .zip(&learn)
            .zip(th)
            .map(|(((t, mk), &on), th)| if on { t - mk - rho * th } else { 0.0 })
            .collect()
    };
    let penalty = |th: &[f64]| -> f64 {
        0.5 * rho * th.iter().zip(&learn).filter(|(_, &on)| on).map(|(t, _)| t * t).sum::<f64>()
    };
    let dual_theta_part = |solver: &Solver, factor: &EdgeFactor, th: &[f64]| -> f64 {
        -solver.edge_dual_term(factor) - dot(th, &big_m) - penalty(th)
    };

    for sweep in 1..=cfg.max_sweeps {
        report.sweeps = sweep;
        // Learning step on θ with messages held fixed.
        let grad = gradient(&totals, &theta);
        let g2 = dot(&grad, &grad);
        if g2 > 0.0 {
            let vertex_term = solver.vertex_dual_term();
            let before = dual_theta_part(&solver, &factor, &theta) - vertex_term;
            let mut eta = step;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + eta * g).collect();
                let trial_factor = EdgeFactor::new(&PriorParams::from_vector(&trial));
                let after = dual_theta_part(&solver, &trial_factor, &trial) - vertex_term;
                if after.is_finite() && after >= before + cfg.armijo_c1 * eta * g2 {
                    accepted = Some((trial, trial_factor, after));
                    break;
                }
                eta *= cfg.backtrack;
            }
            match accepted {
                Some((trial, trial_factor, after)) => {
                    theta = trial;
                    factor = trial_factor;
                    report.armijo.push(ArmijoStep { dual_before: before, dual_after: after, step: eta });
                    step = (2.0 * eta).min(cfg.initial_step);
                }
                None => report.armijo.push(ArmijoStep { dual_before: before, dual_after: before, step: 0.0 }),
            }
        }

        for v in 0..n {
            solver.update_vertex(v, &factor, &mut incoming, &mut scratch, &mut node_log[v * l..(v + 1) * l]);
            if node_log[v * l..(v + 1) * l].iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteBelief { vertex: v, sweep });
            }
        }

        totals = solver.edge_statistics(&factor, &mut edge_beliefs);
        let node: Vec<f64> = node_log.iter().map(|x| x.exp()).collect();
        report.marginal_residual = marginal_residual(graph, l, &node, &edge_beliefs);
        let grad = gradient(&totals, &theta);
        report.moment_residual = if m > 0 { grad.iter().fold(0.0f64, |w, g| w.max(g.abs())) / m as f64 } else { 0.0 };
        let residual = report.marginal_residual.max(report.moment_residual);
        if cfg.record_sweeps {
            let dual = dual_theta_part(&solver, &factor, &theta) - solver.vertex_dual_term();
            report.trace.push(SweepRecord { sweep, dual, residual });
        }
        if residual < cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.dual = dual_theta_part(&solver, &factor, &theta) - solver.vertex_dual_term();
    let beliefs = BeliefState {
        labels: l,
        node: node_log.iter().map(|x| x.exp()).collect(),
        edge: edge_beliefs,
        log_messages: solver.lm,
    };
    Ok((PriorParams::from_vector(&theta), beliefs, report))
}

/// Objective minimized by [`message_passing`] at fixed `θ`:
/// `Σ_u Σ p_u log p_u + Σ_v c_v Σ p_v log p_v - Σ_v Σ g_v p_v + Σ_u Σ θ·f p_u`.
///
/// The unary term carries a minus sign so that its minimizer puts mass where
/// the log-potential is high, matching `p_v ∝ exp(g_v)`.
pub fn free_energy(graph: &MrfGraph, unary: &[f64], theta: &PriorParams, beliefs: &BeliefState) -> f64 {
    let l = beliefs.labels();
    let mut f = 0.0;
    for (e, _) in graph.edges().iter().enumerate() {
        let pu = beliefs.edge(e);
        for hi in 0..l {
            for hj in 0..l {
                let p = pu[hi * l + hj];
                f += xlogx(p) + p * theta.edge_energy(hi, hj);
            }
        }
    }
    for v in 0..graph.vertex_count() {
        let cv = graph.counting_number(v);
        for (h, &p) in beliefs.node(v).iter().enumerate() {
            f += cv * xlogx(p) - p * unary[v * l + h];
        }
    }
    f
}

/// Exact node and edge marginals of
/// `p(h) ∝ exp(Σ_v g_v(h_v) - Σ_u θ·f(h_u))` by enumeration.
pub fn brute_force_marginals(graph: &MrfGraph, unary: &[f64], theta: &PriorParams) -> Result<BeliefState> {
    const LIMIT: f64 = 1e6;
    let n = graph.vertex_count();
    let l = theta.lines();
    let states = (l as f64).powi(n as i32);
    if states > LIMIT {
        return Err(Error::StateSpaceTooLarge(states));
    }
    let states = states as usize;
    let mut log_weights = Vec::with_capacity(states);
    let mut h = vec![0usize; n];
    for s in 0..states {
        let mut rest = s;
        for hv in h.iter_mut() {
            *hv = rest % l;
            rest /= l;
        }
        let mut w: f64 = h.iter().enumerate().map(|(v, &hv)| unary[v * l + hv]).sum();
        for &(i, j) in graph.edges() {
            w -= theta.edge_energy(h[i], h[j]);
        }
        log_weights.push(w);
    }
    let lz = log_sum_exp(&log_weights);
    let mut node = vec![0.0; n * l];
    let mut edge = vec![0.0; graph.edges().len() * l * l];
    for (s, lw) in log_weights.iter().enumerate() {
        let p = (lw - lz).exp();
        let mut rest = s;
        for hv in h.iter_mut() {
            *hv = rest % l;
            rest /= l;
        }
        for (v, &hv) in h.iter().enumerate() {
            node[v * l + hv] += p;
        }
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            edge[e * l * l + h[i] * l + h[j]] += p;
        }
    }
    Ok(BeliefState { labels: l, node, edge, log_messages: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SamplePoint;
    use crate::math::softmax_in_place;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: &[(usize, usize)]) -> MrfGraph {
        let pts = (0..n).map(|i| SamplePoint { id: i, x: i as f64, y: (i * i) as f64, component: 0 }).collect();
        MrfGraph::new(pts, edges.to_vec(), Vec::new(), 1.0).unwrap()
    }

    fn fixed_theta_cfg() -> MessagePassingConfig {
        MessagePassingConfig { learn: false, max_sweeps: 5000, tol: 1e-12, ..Default::default() }
    }

    #[test]
    fn pairwise_cases() {
        assert_eq!(pairwise_feature(3, 3), 0);
        assert_eq!(pairwise_feature(2, 3), 1);
        assert_eq!(pairwise_feature(0, 4), 2);
        assert_eq!(pairwise_feature(4, 0), 2);
    }

    #[test]
    fn isolated_vertex_is_softmax() {
        let g = graph(1, &[]);
        let unary = [0.3, -2.0, 1.1];
        let (_, b, rep) =
            message_passing(&g, &unary, &Moments::with_uniform_lines(3), &PriorParams::zeros(3), &Default::default())
                .unwrap();
        let mut expect = unary;
        softmax_in_place(&mut expect);
        for h in 0..3 {
            assert!((b.node(0)[h] - expect[h]).abs() < 1e-12);
        }
        assert!(rep.converged);
    }

    #[test]
    fn free_energy_examples() {
        let g1 = graph(1, &[]);
        let uniform = BeliefState { labels: 2, node: vec![0.5, 0.5], edge: vec![], log_messages: vec![] };
        assert!((free_energy(&g1, &[0.0, 0.0], &PriorParams::zeros(2), &uniform) + 2f64.ln()).abs() < 1e-15);
        let delta = BeliefState { labels: 2, node: vec![1.0, 0.0], edge: vec![], log_messages: vec![] };
        assert_eq!(free_energy(&g1, &[0.0, -5.0], &PriorParams::zeros(2), &delta), 0.0);
        let g2 = graph(2, &[(0, 1)]);
        let both = BeliefState { labels: 2, node: vec![0.5; 4], edge: vec![0.25; 4], log_messages: vec![] };
        let f = free_energy(&g2, &[0.0; 4], &PriorParams::zeros(2), &both);
        assert!((f + 4.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn brute_force_small_cases() {
        let g = graph(1, &[]);
        let b = brute_force_marginals(&g, &[1.0, 2.0], &PriorParams::zeros(2)).unwrap();
        let mut s = [1.0, 2.0];
        softmax_in_place(&mut s);
        assert!((b.node(0)[1] - s[1]).abs() < 1e-14);

        let g = graph(2, &[]);
        let b = brute_force_marginals(&g, &[0.0, 1.0, -1.0, 0.5], &PriorParams::zeros(2)).unwrap();
        let (mut a, mut c) = ([0.0, 1.0], [-1.0, 0.5]);
        softmax_in_place(&mut a);
        softmax_in_place(&mut c);
        assert!((b.node(0)[0] - a[0]).abs() < 1e-14 && (b.node(1)[1] - c[1]).abs() < 1e-14);

        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let unary: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let theta = PriorParams { pairwise: [0.0, 1.0, 3.0], line: vec![0.2, -0.1, 0.0] };
        let b = brute_force_marginals(&g, &unary, &theta).unwrap();
        for v in 0..4 {
            assert!((b.node(v).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(b.marginal_residual(&g) < 1e-12);
        assert!(matches!(brute_force_marginals(&graph(13, &[]), &[0.0; 39], &PriorParams::zeros(3)), Err(Error::StateSpaceTooLarge(_))));
    }

    /// Minimizes the fixed-θ free energy of a single edge over its joint
    /// `p_u` by exponentiated-gradient descent; node beliefs are the marginals.
    fn mirror_descent_two_vertex(unary: &[f64], theta: &PriorParams) -> Vec<f64> {
        let l = theta.lines();
        let mut p = vec![1.0 / (l * l) as f64; l * l];
        for _ in 0..200_000 {
            let pi: Vec<f64> = (0..l).map(|h| (0..l).map(|k| p[h * l + k]).sum()).collect();
            let pj: Vec<f64> = (0..l).map(|h| (0..l).map(|k| p[k * l + h]).sum()).collect();
            let mut logp: Vec<f64> = (0..l * l)
                .map(|k| {
                    let (hi, hj) = (k / l, k % l);
                    let grad = p[k].ln() + 1.0 + theta.edge_energy(hi, hj) + pi[hi].ln() + 1.0 - unary[hi]
                        + pj[hj].ln() + 1.0 - unary[l + hj];
                    p[k].ln() - 0.2 * grad
                })
                .collect();
            softmax_in_place(&mut logp);
            p = logp;
        }
        let mut node = vec![0.0; 2 * l];
        for hi in 0..l {
            for hj in 0..l {
                node[hi] += p[hi * l + hj];
                node[l + hj] += p[hi * l + hj];
            }
        }
        node
    }

    #[test]
    fn two_vertex_fixed_point_minimizes_free_energy() {
        let g = graph(2, &[(0, 1)]);
        let unary = [0.4, -1.3, 1.0, 0.2];
        let theta = PriorParams { pairwise: [-0.5, 0.8, 0.0], line: vec![0.3, -0.2] };
        let (_, b, rep) = message_passing(&g, &unary, &Moments::with_uniform_lines(2), &theta, &fixed_theta_cfg()).unwrap();
        assert!(rep.converged);
        assert!(b.marginal_residual(&g) < 1e-8);
        assert!((b.edge(0).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let oracle = mirror_descent_two_vertex(&unary, &theta);
        for v in 0..2 {
            for h in 0..2 {
                assert!((b.node(v)[h] - oracle[v * 2 + h]).abs() < 1e-6);
            }
        }
        // Strong duality at the optimum of the fixed-θ problem.
        let primal = free_energy(&g, &unary, &theta, &b);
        assert!((primal - rep.dual).abs() < 1e-7, "{primal} vs {}", rep.dual);
    }

    fn ring(n: usize) -> MrfGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        graph(n, &edges)
    }

    fn exact_moments(g: &MrfGraph, unary: &[f64], theta: &PriorParams) -> Moments {
        let b = brute_force_marginals(g, unary, theta).unwrap();
        let m = g.edges().len() as f64;
        let totals = b.feature_totals(g);
        Moments {
            pairwise: [totals[0] / m, totals[1] / m, totals[2] / m],
            line: totals[PAIRWISE_CASES..].iter().map(|t| t / m).collect(),
        }
    }

    #[test]
    fn ring_learning_matches_enumerated_moments() {
        let g = ring(6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let l = 3;
        let unary: Vec<f64> = (0..6 * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        let star = PriorParams { pairwise: [-1.0, 0.5, 1.5], line: vec![0.4, -0.3, 0.1] };
        let moments = exact_moments(&g, &unary, &star);
        let cfg = MessagePassingConfig { max_sweeps: 20_000, ..Default::default() };
        let (_, b, rep) = message_passing(&g, &unary, &moments, &PriorParams::zeros(l), &cfg).unwrap();
        assert!(rep.converged, "{rep:?}");
        let totals = b.feature_totals(&g);
        for k in 0..PAIRWISE_CASES {
            assert!((totals[k] / 6.0 - moments.pairwise[k]).abs() < 1e-4);
        }
        for k in 0..l {
            assert!((totals[PAIRWISE_CASES + k] / 6.0 - moments.line[k]).abs() < 1e-4);
        }
        for s in &rep.armijo {
            assert!(s.dual_after >= s.dual_before - 1e-12);
        }
    }

    #[test]
    fn learned_solution_has_zero_duality_gap() {
        let g = ring(5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let unary: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let moments = Moments { pairwise: [0.8, 0.2, 0.0], line: vec![0.45, 0.55] };
        let cfg = MessagePassingConfig { max_sweeps: 20_000, tol: 1e-9, ..Default::default() };
        let (theta, b, rep) = message_passing(&g, &unary, &moments, &PriorParams::zeros(2), &cfg).unwrap();
        assert!(rep.converged);
        let m = 5.0;
        let moment_term = theta.pairwise[0] * 0.8 * m + theta.pairwise[1] * 0.2 * m
            + theta.line[0] * 0.45 * m + theta.line[1] * 0.55 * m;
        let primal = free_energy(&g, &unary, &theta, &b) - moment_term;
        assert!((primal - rep.dual).abs() < 1e-6, "{primal} vs {}", rep.dual);
    }

    #[test]
    fn very_negative_unaries_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<SamplePoint> = (0..50)
            .map(|i| SamplePoint { id: i, x: (i % 10) as f64 * 3.0, y: (i / 10) as f64 * 3.0 + (i % 3) as f64, component: 0 })
            .collect();
        let g = MrfGraph::delaunay(pts, 1.0).unwrap();
        let l = 4;
        let unary: Vec<f64> = (0..50 * l).map(|_| rng.random_range(-500.0..-400.0)).collect();
        let (_, b, _) = message_passing(&g, &unary, &Moments::with_uniform_lines(l), &PriorParams::zeros(l), &Default::default())
            .unwrap();
        assert!(b.posteriors().as_slice().iter().all(|p| p.is_finite()));
        for v in 0..50 {
            assert!((b.node(v).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let g = ring(7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let unary: Vec<f64> = (0..21).map(|_| rng.random_range(-3.0..3.0)).collect();
        let run = || message_passing(&g, &unary, &Moments::with_uniform_lines(3), &PriorParams::zeros(3), &Default::default()).unwrap();
        let (t1, b1, _) = run();
        let (t2, b2, _) = run();
        assert_eq!(t1, t2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = ring(3);
        let m = Moments::with_uniform_lines(2);
        assert!(message_passing(&g, &[0.0; 5], &m, &PriorParams::zeros(2), &Default::default()).is_err());
        assert!(message_passing(&g, &[0.0; 6], &Moments::with_uniform_lines(3), &PriorParams::zeros(2), &Default::default()).is_err());
        assert!(Moments::new([0.5, 0.6, 0.0], vec![]).is_err());
    }

    #[test]
    fn empirical_pairwise_moments() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(pairwise_moments_from_labels(&g, &[0, 0, 1, 3]), [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }
}
