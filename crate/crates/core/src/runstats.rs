//! How well ordered is a recovered path.
//!
//! Orders here are 0-based permutations (as produced by `minpath`); the
//! serialized forms are 1-based.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RunStatsError {
    #[error("order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("empty order")]
    Empty,
    #[error("report sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("gap tolerance must be at least 1, got {0}")]
    InvalidGap(usize),
}

/// A maximal block of positions. `start` is a 0-based position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub order: Vec<usize>,
    pub runs: Vec<Run>,
    pub prefix_run: usize,
    pub suffix_run: usize,
    pub kendall_tau: f64,
    pub inversions: usize,
    pub gap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descending_runs: Option<Vec<Run>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Largest forward step that still continues a run; 1 is strict.
    /// With `gap = g` a step `d` continues a run when `1 - g <= d <= g`
    /// and `d != 0`, so "13 15 14 16" is one run at `g = 2`.
    pub gap: usize,
    pub descending: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            gap: 1,
            descending: false,
        }
    }
}

fn check_permutation(order: &[usize]) -> Result<(), RunStatsError> {
    if order.is_empty() {
        return Err(RunStatsError::Empty);
    }
    let n = order.len();
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return Err(RunStatsError::NotAPermutation(n));
        }
        seen[v] = true;
    }
    Ok(())
}

fn split_runs(order: &[usize], continues: impl Fn(i64) -> bool) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = 0;
    for p in 1..=order.len() {
        let joined = p < order.len() && continues(order[p] as i64 - order[p - 1] as i64);
        if !joined {
            runs.push(Run {
                start,
                len: p - start,
            });
            start = p;
        }
    }
    runs
}

/// Inversion count by merge sort, O(n log n).
pub fn inversions(order: &[usize]) -> usize {
    fn sort(v: &mut [usize], buf: &mut Vec<usize>) -> usize {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut count = sort(&mut v[..mid], buf) + sort(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                buf.push(v[j]);
                count += mid - i;
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        count
    }
    let mut v = order.to_vec();
    let mut buf = Vec::with_capacity(v.len());
    sort(&mut v, &mut buf)
}

/// Kendall tau-a against the identity. A single element counts as perfectly
/// ordered.
pub fn kendall_tau(order: &[usize]) -> f64 {
    let n = order.len();
    if n < 2 {
        return 1.0;
    }
    let pairs = (n * (n - 1) / 2) as f64;
    1.0 - 2.0 * inversions(order) as f64 / pairs
}

pub fn ordered_runs(order: &[usize]) -> Result<RunReport, RunStatsError> {
    ordered_runs_with(order, RunOptions::default())
}

pub fn ordered_runs_with(order: &[usize], options: RunOptions) -> Result<RunReport, RunStatsError> {
    check_permutation(order)?;
    if options.gap == 0 {
        return Err(RunStatsError::InvalidGap(0));
    }
    let g = options.gap as i64;
    let runs = split_runs(order, |d| d != 0 && d <= g && d >= 1 - g);
    let descending_runs = options
        .descending
        .then(|| split_runs(order, |d| d == -1));
    let n = order.len();
    Ok(RunReport {
        n,
        order: order.to_vec(),
        prefix_run: runs[0].len,
        suffix_run: runs[runs.len() - 1].len,
        runs,
        kendall_tau: kendall_tau(order),
        inversions: inversions(order),
        gap: options.gap,
        descending_runs,
    })
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two CSV rows: the 1-based order, then a marker row where positions
    /// in the prefix or suffix run are `*` and the rest are empty.
    pub fn to_csv(&self) -> String {
        let order: Vec<String> = self.order.iter().map(|v| (v + 1).to_string()).collect();
        let marks: Vec<&str> = (0..self.n)
            .map(|p| {
                if p < self.prefix_run || p >= self.n - self.suffix_run {
                    "*"
                } else {
                    ""
                }
            })
            .collect();
        let mut out = String::new();
        writeln!(out, "{}", order.join(",")).unwrap();
        writeln!(out, "{}", marks.join(",")).unwrap();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub n: usize,
    pub prefix_delta: i64,
    pub suffix_delta: i64,
    pub tau_delta: f64,
    pub ordered_dominates: bool,
}

/// Ordered minus shuffled. The ordered side dominates when no delta is
/// negative and tau strictly improves.
pub fn compare_reports(
    ordered: &RunReport,
    shuffled: &RunReport,
) -> Result<ComparisonSummary, RunStatsError> {
    if ordered.n != shuffled.n {
        return Err(RunStatsError::SizeMismatch(ordered.n, shuffled.n));
    }
    let prefix_delta = ordered.prefix_run as i64 - shuffled.prefix_run as i64;
    let suffix_delta = ordered.suffix_run as i64 - shuffled.suffix_run as i64;
    let tau_delta = ordered.kendall_tau - shuffled.kendall_tau;
    Ok(ComparisonSummary {
        n: ordered.n,
        prefix_delta,
        suffix_delta,
        tau_delta,
        ordered_dominates: prefix_delta >= 0 && suffix_delta >= 0 && tau_delta > 0.0,
    })
}
