//! Average paths and the discrete action.
//!
//! With unit time steps and no potential, the action of a path is the sum
//! of squared distances between consecutive points.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{narrative_permutations, GroupMeta};
use crate::semantic::EmbeddingSet;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("order is not a permutation of 0..{n}")]
    NotAPermutation { n: usize },
    #[error("a path needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("embedding does not cover the group ({0})")]
    Mismatch(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    SqEuclidean,
    Euclidean,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sq_euclidean" => Ok(Metric::SqEuclidean),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!("unknown metric '{other}' (sq_euclidean|euclidean)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::SqEuclidean => "sq_euclidean",
            Metric::Euclidean => "euclidean",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Ordered,
    Shuffled { seed: u64 },
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Ordered => f.write_str("ordered"),
            Provenance::Shuffled { seed } => write!(f, "shuffled({seed})"),
        }
    }
}

/// Position-wise ensemble mean of paragraph vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragePath {
    pub points: Vec<Vec<f64>>,
    pub provenance: Provenance,
    /// 1-based.
    pub anchor_a: usize,
    /// 1-based.
    pub anchor_b: usize,
}

impl AveragePath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Points `range` (0-based, half open) as a new path.
    pub fn slice(&self, range: std::ops::Range<usize>) -> AveragePath {
        AveragePath {
            points: self.points[range].to_vec(),
            ..self.clone()
        }
    }

    /// CSV: a `#` header comment with provenance and anchors, then one row
    /// per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# provenance={} anchor_a={} anchor_b={} n={} k={}",
            self.provenance,
            self.anchor_a,
            self.anchor_b,
            self.len(),
            self.dim()
        )
        .unwrap();
        let header: Vec<String> = (0..self.dim()).map(|c| format!("c{c}")).collect();
        writeln!(out, "position,{}", header.join(",")).unwrap();
        for (j, p) in self.points.iter().enumerate() {
            let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{}", j + 1, row.join(",")).unwrap();
        }
        out
    }
}

/// Pairwise summation; error grows with `log n` rather than `n`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn check_cover(set: &EmbeddingSet, meta: &GroupMeta) -> Result<(), PathError> {
    if !set.covers(meta) {
        return Err(PathError::Mismatch(format!(
            "embedding has {}x{}, group has {}x{}",
            set.n_narratives(),
            set.n_paragraphs(),
            meta.n_narratives(),
            meta.n_paragraphs
        )));
    }
    Ok(())
}

/// Point `j` is the mean over narratives of paragraph `j`.
pub fn average_path(set: &EmbeddingSet, meta: &GroupMeta) -> Result<AveragePath, PathError> {
    check_cover(set, meta)?;
    let identity: Vec<Vec<usize>> =
        vec![(0..set.n_paragraphs()).collect(); set.n_narratives()];
    let points = mean_points(set, &identity);
    Ok(AveragePath {
        points,
        provenance: Provenance::Ordered,
        anchor_a: meta.anchor_a,
        anchor_b: meta.anchor_b,
    })
}

/// Shuffled control: each narrative's paragraphs are independently
/// permuted (including anchors) before averaging. Uses the same
/// permutations as `corpus::permute_group` with the same seed.
pub fn shuffled_average_path(
    set: &EmbeddingSet,
    meta: &GroupMeta,
    seed: u64,
    pin_anchors: bool,
) -> Result<AveragePath, PathError> {
    let pinned = if pin_anchors {
        vec![meta.anchor_a - 1, meta.anchor_b - 1]
    } else {
        Vec::new()
    };
    let perms = narrative_permutations(set.n_narratives(), set.n_paragraphs(), seed, &pinned);
    shuffled_average_path_with(set, meta, &perms, seed)
}

/// Shuffled average with explicit permutations: `perms[i][j]` is the
/// paragraph of narrative `i` placed at position `j`.
pub fn shuffled_average_path_with(
    set: &EmbeddingSet,
    meta: &GroupMeta,
    perms: &[Vec<usize>],
    seed: u64,
) -> Result<AveragePath, PathError> {
    check_cover(set, meta)?;
    let n = set.n_paragraphs();
    if perms.len() != set.n_narratives() {
        return Err(PathError::Mismatch(format!(
            "{} permutations for {} narratives",
            perms.len(),
            set.n_narratives()
        )));
    }
    for perm in perms {
        if !is_permutation(perm, n) {
            return Err(PathError::NotAPermutation { n });
        }
    }
    Ok(AveragePath {
        points: mean_points(set, perms),
        provenance: Provenance::Shuffled { seed },
        anchor_a: meta.anchor_a,
        anchor_b: meta.anchor_b,
    })
}

fn mean_points(set: &EmbeddingSet, perms: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n_nar = set.n_narratives();
    let inv = 1.0 / n_nar as f64;
    (0..set.n_paragraphs())
        .map(|j| {
            (0..set.k())
                .map(|c| {
                    let column: Vec<f64> = (0..n_nar)
                        .map(|i| set.vector(i, perms[i][j])[c])
                        .collect();
                    pairwise_sum(&column) * inv
                })
                .collect()
        })
        .collect()
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub metric: Metric,
    pub n_steps: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_j ‖p_j − p_{j−1}‖²`.
pub fn action(path: &AveragePath) -> Result<ActionValue, PathError> {
    if path.len() < 2 {
        return Err(PathError::TooShort(path.len()));
    }
    let value = path
        .points
        .windows(2)
        .map(|w| sq_dist(&w[0], &w[1]))
        .fold(0.0, |acc, d| acc + d);
    Ok(ActionValue {
        value,
        metric: Metric::SqEuclidean,
        n_steps: path.len() - 1,
    })
}

/// Symmetric, zero-diagonal pairwise distances, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    /// From a full row-major matrix. Symmetry, the zero diagonal and
    /// finiteness are checked.
    pub fn from_entries(n: usize, entries: Vec<f64>, metric: Metric) -> Result<Self, String> {
        if entries.len() != n * n {
            return Err(format!("{} entries for a {n}x{n} matrix", entries.len()));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(format!("nonzero diagonal at {i}"));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("entry ({i},{j}) = {v}"));
                }
                if v != entries[j * n + i] {
                    return Err(format!("asymmetric at ({i},{j})"));
                }
            }
        }
        Ok(DistanceMatrix { n, entries, metric })
    }

    /// Unchecked constructor for callers that build entries themselves;
    /// only symmetry of construction is assumed.
    pub fn from_fn(n: usize, metric: Metric, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        DistanceMatrix { n, entries, metric }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DistanceMatrix {
        DistanceMatrix {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
            metric: self.metric,
        }
    }

    /// Principal submatrix over `indices`, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        let m = indices.len();
        let mut entries = Vec::with_capacity(m * m);
        for &a in indices {
            for &b in indices {
                entries.push(self.get(a, b));
            }
        }
        DistanceMatrix {
            n: m,
            entries,
            metric: self.metric,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# metric={} n={}", self.metric, self.n).unwrap();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

pub fn distance_matrix(path: &AveragePath, metric: Metric) -> DistanceMatrix {
    let n = path.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    // evaluate from the lower index so (i, j) and (j, i) agree bitwise
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    let d2 = sq_dist(&path.points[a], &path.points[b]);
                    match metric {
                        Metric::SqEuclidean => d2,
                        Metric::Euclidean => d2.sqrt(),
                    }
                })
                .collect()
        })
        .collect();
    DistanceMatrix {
        n,
        entries: rows.concat(),
        metric,
    }
}

/// Sum of matrix entries between consecutive nodes of `order`, summed
/// front to back.
pub fn action_of_order(dmat: &DistanceMatrix, order: &[usize]) -> Result<ActionValue, PathError> {
    if !is_permutation(order, dmat.size()) {
        return Err(PathError::NotAPermutation { n: dmat.size() });
    }
    Ok(ActionValue {
        value: order_cost(dmat, order),
        metric: dmat.metric(),
        n_steps: order.len().saturating_sub(1),
    })
}

pub(crate) fn order_cost(dmat: &DistanceMatrix, order: &[usize]) -> f64 {
    order
        .windows(2)
        .map(|w| dmat.get(w[0], w[1]))
        .fold(0.0, |acc, d| acc + d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::MethodTag;

    fn set_from(vectors: Vec<Vec<Vec<f64>>>) -> (EmbeddingSet, GroupMeta) {
        let n = vectors[0].len();
        let meta = GroupMeta::numbered(vectors.len(), n.max(2), 1, n.max(2), "t").unwrap();
        let meta = GroupMeta {
            n_paragraphs: n,
            ..meta
        };
        let set = EmbeddingSet::new(meta.ids.clone(), vectors, MethodTag::External).unwrap();
        (set, meta)
    }

    fn path(points: Vec<Vec<f64>>) -> AveragePath {
        AveragePath {
            points,
            provenance: Provenance::Ordered,
            anchor_a: 1,
            anchor_b: 2,
        }
    }

    #[test]
    fn single_narrative_average_is_itself() {
        let v = vec![vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]]];
        let (set, meta) = set_from(v.clone());
        let avg = average_path(&set, &meta).unwrap();
        assert_eq!(avg.points, v[0]);
    }

    #[test]
    fn opposite_narratives_cancel() {
        let a = vec![vec![1.0, -2.0], vec![0.25, 4.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|p| p.iter().map(|x| -x).collect()).collect();
        let (set, meta) = set_from(vec![a, b]);
        let avg = average_path(&set, &meta).unwrap();
        assert!(avg.points.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn three_narrative_means() {
        let (set, meta) = set_from(vec![
            vec![vec![1.0], vec![2.0]],
            vec![vec![4.0], vec![-2.0]],
            vec![vec![7.0], vec![9.0]],
        ]);
        let avg = average_path(&set, &meta).unwrap();
        assert!((avg.points[0][0] - 4.0).abs() < 1e-12);
        assert!((avg.points[1][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_permutations_reproduce_ordered_path() {
        let (set, meta) = set_from(vec![
            vec![vec![1.0], vec![2.0], vec![5.0]],
            vec![vec![3.0], vec![-2.0], vec![0.0]],
        ]);
        let ident = vec![vec![0, 1, 2]; 2];
        let shuffled = shuffled_average_path_with(&set, &meta, &ident, 0).unwrap();
        assert_eq!(shuffled.points, average_path(&set, &meta).unwrap().points);
        let bad = vec![vec![0, 0, 2]; 2];
        assert!(shuffled_average_path_with(&set, &meta, &bad, 0).is_err());
    }

    #[test]
    fn single_position_shuffle_is_ordered() {
        let (set, meta) = set_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 5.0]]]);
        let s = shuffled_average_path(&set, &meta, 4, false).unwrap();
        assert_eq!(s.points, average_path(&set, &meta).unwrap().points);
    }

    #[test]
    fn action_examples() {
        assert_eq!(action(&path(vec![vec![2.0, 1.0]; 4])).unwrap().value, 0.0);
        let a = action(&path(vec![vec![0.0], vec![1.0], vec![3.0]])).unwrap();
        assert_eq!(a.value, 5.0);
        assert_eq!(a.n_steps, 2);
        assert!(action(&path(vec![vec![0.0]])).is_err());
    }

    #[test]
    fn distance_matrix_examples() {
        let p = path(vec![vec![0.0], vec![3.0]]);
        assert_eq!(distance_matrix(&p, Metric::SqEuclidean).get(0, 1), 9.0);
        assert_eq!(distance_matrix(&p, Metric::Euclidean).get(1, 0), 3.0);
    }

    #[test]
    fn order_action_examples() {
        let p = path((0..5).map(|i| vec![2.0 * i as f64]).collect());
        let d = distance_matrix(&p, Metric::SqEuclidean);
        let ident: Vec<usize> = (0..5).collect();
        assert_eq!(action_of_order(&d, &ident).unwrap().value, 4.0 * 4.0);
        let rev: Vec<usize> = (0..5).rev().collect();
        assert_eq!(action_of_order(&d, &rev).unwrap().value, 16.0);
        assert!(matches!(
            action_of_order(&d, &[0, 1, 1, 3, 4]),
            Err(PathError::NotAPermutation { n: 5 })
        ));
        assert!(action_of_order(&d, &[0, 1, 2]).is_err());
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 1 << 16];
        let exact = 0.1 * (1u64 << 16) as f64;
        assert!((pairwise_sum(&v) - exact).abs() < 1e-9);
    }

    #[test]
    fn csv_has_provenance_header() {
        let mut p = path(vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        p.provenance = Provenance::Shuffled { seed: 9 };
        let csv = p.to_csv();
        assert!(csv.starts_with("# provenance=shuffled(9) anchor_a=1 anchor_b=2 n=2 k=2\n"));
        assert!(csv.contains("\n2,2,3\n"));
        let d = distance_matrix(&p, Metric::Euclidean).to_csv();
        assert!(d.starts_with("# metric=euclidean n=2\n"));
    }

    #[test]
    fn checked_matrix_constructor() {
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 1.0, 0.0], Metric::Euclidean).is_ok());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 2.0, 0.0], Metric::Euclidean).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 0.0], Metric::Euclidean).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, f64::NAN, f64::NAN, 0.0], Metric::Euclidean).is_err());
    }
}
