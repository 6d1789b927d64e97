//! Action minimization over a fixed point set.
//!
//! The open-path TSP with pinned first and last nodes is the discrete form
//! of "which ordering of the points has the lowest action". Held-Karp
//! solves it exactly up to [`EXACT_CUTOFF`] nodes; a multi-start 2-opt /
//! Or-opt search covers larger instances. The minimum spanning tree drops
//! the path constraint and shows which points cluster into linear runs.
//!
//! All ties are broken lexicographically so results do not depend on the
//! platform or thread count.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathspace::{order_cost, ActionValue, DistanceMatrix};
use crate::rng::stream_rng;

pub const EXACT_CUTOFF: usize = 22;
pub const BRUTE_FORCE_CUTOFF: usize = 10;
pub const DEFAULT_RESTARTS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum MinPathError {
    #[error("{n} points exceed the {solver} limit of {limit}; use the heuristic solver")]
    TooLarge {
        n: usize,
        limit: usize,
        solver: &'static str,
    },
    #[error("start and end must differ (both {0})")]
    SameEndpoints(usize),
    #[error("endpoint {index} out of range for {n} points")]
    EndpointOutOfRange { index: usize, n: usize },
    #[error("need at least {required} points, got {n}")]
    TooSmall { n: usize, required: usize },
    #[error("distance matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("node {0} is not in the tree")]
    NoSuchNode(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverTag {
    Exact,
    Heuristic { restarts: usize, seed: u64 },
    BruteForce,
}

/// A Hamiltonian path from `start` to `end` and its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOrder {
    pub order: Vec<usize>,
    pub start: usize,
    pub end: usize,
    pub cost: ActionValue,
    pub solver: SolverTag,
}

impl PathOrder {
    fn new(dmat: &DistanceMatrix, order: Vec<usize>, solver: SolverTag) -> Self {
        let cost = ActionValue {
            value: order_cost(dmat, &order),
            metric: dmat.metric(),
            n_steps: order.len().saturating_sub(1),
        };
        PathOrder {
            start: order[0],
            end: *order.last().unwrap(),
            order,
            cost,
            solver,
        }
    }

    /// Order as 1-based indices.
    pub fn one_based(&self) -> Vec<usize> {
        self.order.iter().map(|i| i + 1).collect()
    }

    /// A `#` comment line with solver and cost, then one CSV row of 1-based
    /// indices.
    pub fn to_csv(&self) -> String {
        let solver = match self.solver {
            SolverTag::Exact => "exact".to_string(),
            SolverTag::BruteForce => "brute_force".to_string(),
            SolverTag::Heuristic { restarts, seed } => {
                format!("heuristic(restarts={restarts},seed={seed})")
            }
        };
        let row: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        format!(
            "# solver={} metric={} cost={}\n{}\n",
            solver,
            self.cost.metric,
            self.cost.value,
            row.join(",")
        )
    }
}

fn check_endpoints(n: usize, start: usize, end: usize) -> Result<(), MinPathError> {
    for index in [start, end] {
        if index >= n {
            return Err(MinPathError::EndpointOutOfRange { index, n });
        }
    }
    if start == end {
        return Err(MinPathError::SameEndpoints(start));
    }
    Ok(())
}

fn interior(n: usize, start: usize, end: usize) -> Vec<usize> {
    (0..n).filter(|&i| i != start && i != end).collect()
}

/// Held-Karp over the interior nodes. `g[mask][v]` is the cheapest path
/// that starts at `v`, visits exactly `mask`, and finishes at `end`; the
/// order is rebuilt front to back taking the smallest feasible node at each
/// step, which yields the lexicographically smallest optimal order.
pub fn tsp_exact(dmat: &DistanceMatrix, start: usize, end: usize) -> Result<PathOrder, MinPathError> {
    let n = dmat.size();
    if n > EXACT_CUTOFF {
        return Err(MinPathError::TooLarge {
            n,
            limit: EXACT_CUTOFF,
            solver: "exact",
        });
    }
    check_endpoints(n, start, end)?;
    let nodes = interior(n, start, end);
    let m = nodes.len();
    if m == 0 {
        return Ok(PathOrder::new(dmat, vec![start, end], SolverTag::Exact));
    }

    let full = (1usize << m) - 1;
    let mut g = vec![f64::INFINITY; (full + 1) * m];
    for (v, &node) in nodes.iter().enumerate() {
        g[(1 << v) * m + v] = dmat.get(node, end);
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        for v in 0..m {
            if mask & (1 << v) == 0 {
                continue;
            }
            let rest = mask & !(1 << v);
            let mut best = f64::INFINITY;
            let mut bits = rest;
            while bits != 0 {
                let w = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let c = dmat.get(nodes[v], nodes[w]) + g[rest * m + w];
                if c < best {
                    best = c;
                }
            }
            g[mask * m + v] = best;
        }
    }

    let mut target = (0..m)
        .map(|v| dmat.get(start, nodes[v]) + g[full * m + v])
        .fold(f64::INFINITY, f64::min);
    let mut order = Vec::with_capacity(n);
    order.push(start);
    let mut cur = start;
    let mut rem = full;
    while rem != 0 {
        let v = (0..m)
            .filter(|&v| rem & (1 << v) != 0)
            .find(|&v| dmat.get(cur, nodes[v]) + g[rem * m + v] == target)
            .expect("optimal successor exists");
        target = g[rem * m + v];
        rem &= !(1 << v);
        cur = nodes[v];
        order.push(cur);
    }
    order.push(end);
    Ok(PathOrder::new(dmat, order, SolverTag::Exact))
}

/// Exhaustive search over all interior orders, visited in lexicographic
/// order; the first minimum found wins ties.
pub fn tsp_brute_force(
    dmat: &DistanceMatrix,
    start: usize,
    end: usize,
) -> Result<PathOrder, MinPathError> {
    let n = dmat.size();
    if n > BRUTE_FORCE_CUTOFF {
        return Err(MinPathError::TooLarge {
            n,
            limit: BRUTE_FORCE_CUTOFF,
            solver: "brute force",
        });
    }
    check_endpoints(n, start, end)?;
    let mut perm = interior(n, start, end);
    let mut candidate = Vec::with_capacity(n);
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        candidate.clear();
        candidate.push(start);
        candidate.extend_from_slice(&perm);
        candidate.push(end);
        let cost = order_cost(dmat, &candidate);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, candidate.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(PathOrder::new(dmat, best.unwrap().1, SolverTag::BruteForce))
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Multi-start local search. Restart `r` draws from stream `r` of `seed`,
/// builds a perturbed nearest-neighbor path from `start` (restart 0 is
/// unperturbed), then applies 2-opt and Or-opt moves until neither
/// improves. The natural order (start, interior ascending, end) is also
/// locally optimized and competes with the restarts. Best cost wins, then
/// the lexicographically smallest order.
pub fn tsp_heuristic(
    dmat: &DistanceMatrix,
    start: usize,
    end: usize,
    restarts: usize,
    seed: u64,
) -> Result<PathOrder, MinPathError> {
    let n = dmat.size();
    check_endpoints(n, start, end)?;
    let tag = SolverTag::Heuristic { restarts, seed };
    if n <= 3 {
        let mut order = vec![start];
        order.extend(interior(n, start, end));
        order.push(end);
        return Ok(PathOrder::new(dmat, order, tag));
    }

    let natural = {
        let mut order = vec![start];
        order.extend(interior(n, start, end));
        order.push(end);
        local_search(dmat, order)
    };
    let runs: Vec<Vec<usize>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let greed_noise = if r == 0 { 0.0 } else { rng.random::<f64>() };
            let order = nearest_neighbor(dmat, start, end, greed_noise, &mut rng);
            local_search(dmat, order)
        })
        .collect();

    let best = std::iter::once(natural)
        .chain(runs)
        .map(|order| (order_cost(dmat, &order), order))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .unwrap()
        .1;
    debug_assert!(is_two_opt_optimal(dmat, &best));
    Ok(PathOrder::new(dmat, best, tag))
}

fn nearest_neighbor<R: Rng>(
    dmat: &DistanceMatrix,
    start: usize,
    end: usize,
    noise: f64,
    rng: &mut R,
) -> Vec<usize> {
    let mut remaining = interior(dmat.size(), start, end);
    let mut order = Vec::with_capacity(dmat.size());
    order.push(start);
    let mut cur = start;
    while !remaining.is_empty() {
        let mut best = (f64::INFINITY, 0);
        for (slot, &v) in remaining.iter().enumerate() {
            let jitter = if noise > 0.0 { 1.0 + noise * rng.random::<f64>() } else { 1.0 };
            let score = dmat.get(cur, v) * jitter;
            if score < best.0 {
                best = (score, slot);
            }
        }
        cur = remaining.remove(best.1);
        order.push(cur);
    }
    order.push(end);
    order
}

fn improves(delta: f64, scale: f64) -> bool {
    delta < -1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Gain of reversing `order[i..=j]` (interior positions only).
#[inline]
fn two_opt_delta(dmat: &DistanceMatrix, order: &[usize], i: usize, j: usize) -> (f64, f64) {
    let (a, b, c, d) = (order[i - 1], order[i], order[j], order[j + 1]);
    let removed = dmat.get(a, b) + dmat.get(c, d);
    (dmat.get(a, c) + dmat.get(b, d) - removed, removed)
}

fn two_opt_pass(dmat: &DistanceMatrix, order: &mut [usize]) -> bool {
    let n = order.len();
    let mut improved = false;
    for i in 1..n - 1 {
        for j in (i + 1)..n - 1 {
            let (delta, scale) = two_opt_delta(dmat, order, i, j);
            if improves(delta, scale) {
                order[i..=j].reverse();
                improved = true;
            }
        }
    }
    improved
}

/// Moves one segment of 1–3 interior nodes to its best other slot, either
/// orientation. Returns after the first improving move.
fn or_opt_pass(dmat: &DistanceMatrix, order: &mut Vec<usize>) -> bool {
    let n = order.len();
    for len in 1..=3usize {
        for i in 1..n - 1 {
            let last = i + len - 1;
            if last > n - 2 {
                break;
            }
            let prev = order[i - 1];
            let next = order[last + 1];
            let (s0, s1) = (order[i], order[last]);
            let removal_gain =
                dmat.get(prev, s0) + dmat.get(s1, next) - dmat.get(prev, next);
            // insertion edge (order[p], order[p + 1]), outside the segment
            for p in 0..n - 1 {
                if p + 1 >= i && p <= last {
                    continue;
                }
                let (a, b) = (order[p], order[p + 1]);
                let base = dmat.get(a, b);
                let forward = dmat.get(a, s0) + dmat.get(s1, b) - base;
                let backward = dmat.get(a, s1) + dmat.get(s0, b) - base;
                let (cost, reversed) = if backward < forward {
                    (backward, true)
                } else {
                    (forward, false)
                };
                if improves(cost - removal_gain, removal_gain + base) {
                    let mut segment: Vec<usize> = order.drain(i..=last).collect();
                    if reversed {
                        segment.reverse();
                    }
                    let at = if p < i { p + 1 } else { p + 1 - len };
                    order.splice(at..at, segment);
                    return true;
                }
            }
        }
    }
    false
}

fn local_search(dmat: &DistanceMatrix, mut order: Vec<usize>) -> Vec<usize> {
    loop {
        let a = two_opt_pass(dmat, &mut order);
        let b = or_opt_pass(dmat, &mut order);
        if !a && !b {
            return order;
        }
    }
}

/// True when no interior segment reversal lowers the cost.
pub fn is_two_opt_optimal(dmat: &DistanceMatrix, order: &[usize]) -> bool {
    let n = order.len();
    for i in 1..n.saturating_sub(1) {
        for j in (i + 1)..n - 1 {
            let (delta, scale) = two_opt_delta(dmat, order, i, j);
            if improves(delta, scale) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Edges sorted by `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub n: usize,
    pub edges: Vec<TreeEdge>,
    pub total_weight: f64,
}

impl SpanningTree {
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.u == node {
                    Some(e.v)
                } else if e.v == node {
                    Some(e.u)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Edge list CSV with 1-based node indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v,weight\n");
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.u + 1, e.v + 1, e.weight).unwrap();
        }
        out
    }
}

/// Prim's algorithm on the dense matrix, O(n²). Among equal-weight
/// candidates the lexicographically smallest `(min, max)` edge is taken.
pub fn mst(dmat: &DistanceMatrix) -> Result<SpanningTree, MinPathError> {
    let n = dmat.size();
    if n < 2 {
        return Err(MinPathError::TooSmall { n, required: 2 });
    }
    for i in 0..n {
        for j in 0..n {
            if !dmat.get(i, j).is_finite() {
                return Err(MinPathError::NonFinite(i, j));
            }
        }
    }
    let edge_key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    in_tree[0] = true;
    for v in 1..n {
        key[v] = dmat.get(0, v);
        parent[v] = 0;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(p) => {
                    let better = key[v] < key[p]
                        || (key[v] == key[p] && edge_key(parent[v], v) < edge_key(parent[p], p));
                    Some(if better { v } else { p })
                }
            };
        }
        let v = pick.unwrap();
        in_tree[v] = true;
        let (a, b) = edge_key(parent[v], v);
        edges.push(TreeEdge {
            u: a,
            v: b,
            weight: key[v],
        });
        for w in 0..n {
            if in_tree[w] {
                continue;
            }
            let d = dmat.get(v, w);
            if d < key[w] || (d == key[w] && edge_key(v, w) < edge_key(parent[w], w)) {
                key[w] = d;
                parent[w] = v;
            }
        }
    }
    edges.sort_by_key(|e| (e.u, e.v));
    let total_weight = edges.iter().fold(0.0, |acc, e| acc + e.weight);
    Ok(SpanningTree {
        n,
        edges,
        total_weight,
    })
}

/// A simple path in a tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeBranch {
    pub nodes: Vec<usize>,
}

/// For each neighbor of `pivot` (ascending), the longest simple path that
/// leaves `pivot` through it. Equal lengths resolve to the
/// lexicographically smallest node sequence.
pub fn split_branches(tree: &SpanningTree, pivot: usize) -> Result<Vec<TreeBranch>, MinPathError> {
    if pivot >= tree.n {
        return Err(MinPathError::NoSuchNode(pivot));
    }
    let adj = tree.adjacency();
    Ok(adj[pivot]
        .iter()
        .map(|&v| {
            let mut nodes = vec![pivot];
            nodes.extend(longest_descent(&adj, v, pivot));
            TreeBranch { nodes }
        })
        .collect())
}

fn longest_descent(adj: &[Vec<usize>], node: usize, parent: usize) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for &child in &adj[node] {
        if child == parent {
            continue;
        }
        let cand = longest_descent(adj, child, node);
        if cand.len() > best.len() || (cand.len() == best.len() && cand < best) {
            best = cand;
        }
    }
    let mut path = vec![node];
    path.extend(best);
    path
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Undirected DOT graph. Node ids are 1-based paragraph indices; `labels`,
/// when given, supplies display labels by 0-based node.
pub fn tree_to_dot(tree: &SpanningTree, labels: Option<&[String]>) -> String {
    let mut out = String::from("graph mst {\n  node [shape=circle];\n");
    for i in 0..tree.n {
        let label = labels
            .and_then(|l| l.get(i))
            .cloned()
            .unwrap_or_else(|| (i + 1).to_string());
        writeln!(out, "  {} [label=\"{}\"];", i + 1, dot_escape(&label)).unwrap();
    }
    for e in &tree.edges {
        writeln!(out, "  {} -- {} [weight=\"{}\"];", e.u + 1, e.v + 1, e.weight).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathspace::Metric;

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), Metric::SqEuclidean, |i, j| {
            (points[i] - points[j]).powi(2)
        })
    }

    fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
        let mut rng = stream_rng(seed, 0);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        DistanceMatrix::from_fn(n, Metric::SqEuclidean, |i, j| {
            (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)
        })
    }

    #[test]
    fn exact_collinear_is_identity() {
        let d = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let p = tsp_exact(&d, 0, 4).unwrap();
        assert_eq!(p.order, vec![0, 1, 2, 3, 4]);
        assert_eq!(p.cost.value, 4.0);
    }

    #[test]
    fn three_points_are_forced() {
        let d = line(&[0.0, 5.0, 1.0]);
        assert_eq!(tsp_exact(&d, 0, 2).unwrap().order, vec![0, 1, 2]);
        assert_eq!(tsp_brute_force(&d, 0, 2).unwrap().order, vec![0, 1, 2]);
        assert_eq!(tsp_heuristic(&d, 0, 2, 4, 1).unwrap().order, vec![0, 1, 2]);
    }

    #[test]
    fn brute_force_tie_goes_to_smaller_order() {
        // unit square corners 0..3 counter-clockwise, start 0, end 2
        let pts: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let d = DistanceMatrix::from_fn(4, Metric::SqEuclidean, |i, j| {
            (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)
        });
        assert_eq!(tsp_brute_force(&d, 0, 2).unwrap().order, vec![0, 1, 3, 2]);
        assert_eq!(tsp_exact(&d, 0, 2).unwrap().order, vec![0, 1, 3, 2]);
    }

    #[test]
    fn brute_force_beats_random_orders() {
        let d = random_matrix(8, 3);
        let best = tsp_brute_force(&d, 0, 7).unwrap();
        let mut rng = stream_rng(4, 0);
        for _ in 0..1000 {
            let mut mid: Vec<usize> = (1..7).collect();
            rand::seq::SliceRandom::shuffle(mid.as_mut_slice(), &mut rng);
            let mut order = vec![0];
            order.extend(mid);
            order.push(7);
            assert!(best.cost.value <= order_cost(&d, &order));
        }
    }

    #[test]
    fn exact_matches_brute_force() {
        for seed in 0..40 {
            let n = 5 + (seed as usize % 4);
            let d = random_matrix(n, seed);
            let (s, e) = (seed as usize % n, (seed as usize + 2) % n);
            let a = tsp_exact(&d, s, e).unwrap();
            let b = tsp_brute_force(&d, s, e).unwrap();
            assert_eq!(a.cost.value, b.cost.value);
            assert_eq!(a.order, b.order);
        }
    }

    #[test]
    fn solver_limits_and_endpoint_errors() {
        let d = random_matrix(23, 1);
        assert!(matches!(tsp_exact(&d, 0, 1), Err(MinPathError::TooLarge { .. })));
        let d = random_matrix(11, 1);
        assert!(matches!(tsp_brute_force(&d, 0, 1), Err(MinPathError::TooLarge { .. })));
        assert_eq!(tsp_exact(&d, 3, 3), Err(MinPathError::SameEndpoints(3)));
        assert!(matches!(tsp_exact(&d, 0, 11), Err(MinPathError::EndpointOutOfRange { .. })));
    }

    #[test]
    fn heuristic_collinear_any_seed() {
        let pts: Vec<f64> = (0..30).map(f64::from).collect();
        let d = line(&pts);
        for seed in 0..5 {
            let p = tsp_heuristic(&d, 0, 29, 8, seed).unwrap();
            assert_eq!(p.order, (0..30).collect::<Vec<_>>());
        }
    }

    #[test]
    fn heuristic_is_locally_optimal_and_deterministic() {
        let d = random_matrix(40, 9);
        let a = tsp_heuristic(&d, 0, 39, 16, 5).unwrap();
        let b = tsp_heuristic(&d, 0, 39, 16, 5).unwrap();
        assert_eq!(a, b);
        assert!(is_two_opt_optimal(&d, &a.order));
        assert_eq!(a.order[0], 0);
        assert_eq!(a.order[39], 39);
    }

    #[test]
    fn more_restarts_never_hurt() {
        for seed in 0..10 {
            let d = random_matrix(30, 100 + seed);
            let mut last = f64::INFINITY;
            for restarts in [1, 2, 4, 8, 16, 32] {
                let c = tsp_heuristic(&d, 0, 29, restarts, seed).unwrap().cost.value;
                assert!(c <= last);
                last = c;
            }
        }
    }

    #[test]
    fn or_opt_moves_keep_a_permutation() {
        let d = random_matrix(12, 77);
        let mut order: Vec<usize> = (0..12).collect();
        while or_opt_pass(&d, &mut order) {
            assert!(crate::pathspace::is_permutation(&order, 12));
            assert_eq!((order[0], order[11]), (0, 11));
        }
    }

    #[test]
    fn mst_chain_and_pair() {
        let d = line(&[3.0, 0.0, 2.0, 1.0]);
        let t = mst(&d).unwrap();
        let edges: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(edges, vec![(0, 2), (1, 3), (2, 3)]);
        assert_eq!(t.total_weight, 3.0);

        let t = mst(&line(&[0.0, 2.0])).unwrap();
        assert_eq!(t.edges.len(), 1);
        assert_eq!(t.total_weight, 4.0);
        assert!(mst(&line(&[0.0])).is_err());
    }

    #[test]
    fn mst_rejects_non_finite() {
        let d = DistanceMatrix::from_fn(3, Metric::Euclidean, |i, j| {
            if i == 0 && j == 2 {
                f64::INFINITY
            } else {
                1.0
            }
        });
        assert_eq!(mst(&d), Err(MinPathError::NonFinite(0, 2)));
    }

    #[test]
    fn mst_ties_are_lexicographic() {
        // all distances equal: star around node 0
        let d = DistanceMatrix::from_fn(5, Metric::Euclidean, |_, _| 1.0);
        let t = mst(&d).unwrap();
        let edges: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
    }

    fn tree(n: usize, edges: &[(usize, usize)]) -> SpanningTree {
        SpanningTree {
            n,
            edges: edges
                .iter()
                .map(|&(u, v)| TreeEdge { u, v, weight: 1.0 })
                .collect(),
            total_weight: edges.len() as f64,
        }
    }

    #[test]
    fn branches_of_a_chain() {
        let t = tree(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(split_branches(&t, 0).unwrap(), vec![TreeBranch { nodes: vec![0, 1, 2, 3] }]);
        assert_eq!(
            split_branches(&t, 2).unwrap(),
            vec![
                TreeBranch { nodes: vec![2, 1, 0] },
                TreeBranch { nodes: vec![2, 3] }
            ]
        );
        assert_eq!(split_branches(&t, 4), Err(MinPathError::NoSuchNode(4)));
    }

    #[test]
    fn branches_of_a_star() {
        let t = tree(4, &[(0, 2), (1, 2), (2, 3)]);
        let b = split_branches(&t, 2).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|br| br.nodes.len() == 2 && br.nodes[0] == 2));
    }

    #[test]
    fn branch_ties_pick_smaller_sequence() {
        // pivot 0 -> 1, then 1 forks to 3 and 2 (equal depth)
        let t = tree(4, &[(0, 1), (1, 3), (1, 2)]);
        assert_eq!(split_branches(&t, 0).unwrap()[0].nodes, vec![0, 1, 2]);
    }

    #[test]
    fn dot_output_is_stable() {
        let t = tree(2, &[(0, 1)]);
        let dot = tree_to_dot(&t, None);
        assert_eq!(dot, tree_to_dot(&t, None));
        assert_eq!(dot.matches(" -- ").count(), 1);
        assert!(dot.contains("  1 -- 2 [weight=\"1\"];"));
        let labelled = tree_to_dot(&t, Some(&["a\"b".to_string(), "c".to_string()]));
        assert!(labelled.contains("[label=\"a\\\"b\"]"));
    }

    #[test]
    fn path_order_csv_is_one_based() {
        let d = line(&[0.0, 1.0, 2.0]);
        let p = tsp_exact(&d, 0, 2).unwrap();
        assert_eq!(p.to_csv(), "# solver=exact metric=sq_euclidean cost=2\n1,2,3\n");
        assert!(mst(&d).unwrap().to_csv().starts_with("u,v,weight\n1,2,1\n"));
    }
}
