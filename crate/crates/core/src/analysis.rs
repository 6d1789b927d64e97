//! Ordered-versus-shuffled analysis of one embedded group.
//!
//! All indices in the results are positions within the analyzed range, so
//! with the default full range they are plain paragraph positions.

use serde::{Deserialize, Serialize};

use crate::corpus::GroupMeta;
use crate::minpath::{
    mst, split_branches, tsp_exact, tsp_heuristic, PathOrder, SpanningTree, TreeBranch,
    DEFAULT_RESTARTS, EXACT_CUTOFF,
};
use crate::pathspace::{
    action, average_path, distance_matrix, shuffled_average_path, ActionValue, AveragePath,
    Metric, PathError,
};
use crate::rng::sub_seed;
use crate::runstats::{compare_reports, ordered_runs_with, ComparisonSummary, RunOptions, RunReport};
use crate::semantic::EmbeddingSet;
use crate::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    Heuristic,
    /// Exact up to the Held-Karp cutoff, heuristic beyond.
    #[default]
    Auto,
}

impl std::str::FromStr for SolverChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SolverChoice::Exact),
            "heuristic" => Ok(SolverChoice::Heuristic),
            "auto" => Ok(SolverChoice::Auto),
            other => Err(format!("unknown solver '{other}' (exact|heuristic|auto)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub metric: Metric,
    pub solver: SolverChoice,
    pub restarts: usize,
    /// Root seed; the shuffle and the heuristic use named sub-seeds of it.
    pub seed: u64,
    pub pin_anchors: bool,
    /// 0-based inclusive slice of the average path; `None` is the whole path.
    pub range: Option<(usize, usize)>,
    /// 0-based positions in the full path; default to the range ends.
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub run_gap: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            metric: Metric::SqEuclidean,
            solver: SolverChoice::Auto,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            pin_anchors: false,
            range: None,
            start: None,
            end: None,
            run_gap: 1,
        }
    }
}

impl AnalysisOptions {
    pub fn shuffle_seed(&self) -> u64 {
        sub_seed(self.seed, "shuffle")
    }

    pub fn tsp_seed(&self) -> u64 {
        sub_seed(self.seed, "tsp")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub path: AveragePath,
    pub action: ActionValue,
    pub tsp: PathOrder,
    pub mst: SpanningTree,
    pub branches: Vec<TreeBranch>,
    pub runs: RunReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub options: AnalysisOptions,
    /// 0-based inclusive range actually analyzed.
    pub range: (usize, usize),
    pub ordered: VariantReport,
    pub shuffled: VariantReport,
    pub comparison: ComparisonSummary,
}

/// Minimizes the action over orderings of `path`'s points from `start` to
/// `end` (local indices).
pub fn solve_order(
    path: &AveragePath,
    start: usize,
    end: usize,
    options: &AnalysisOptions,
) -> Result<PathOrder, Error> {
    let dmat = distance_matrix(path, options.metric);
    let exact = match options.solver {
        SolverChoice::Exact => true,
        SolverChoice::Heuristic => false,
        SolverChoice::Auto => dmat.size() <= EXACT_CUTOFF,
    };
    Ok(if exact {
        tsp_exact(&dmat, start, end)?
    } else {
        tsp_heuristic(&dmat, start, end, options.restarts, options.tsp_seed())?
    })
}

fn resolve_range(n: usize, options: &AnalysisOptions) -> Result<(usize, usize, usize, usize), Error> {
    let (lo, hi) = options.range.unwrap_or((0, n.saturating_sub(1)));
    if lo >= hi || hi >= n {
        return Err(PathError::InvalidRange(format!(
            "range {}..{} is not within 1..{n} with at least two points",
            lo + 1,
            hi + 1
        ))
        .into());
    }
    let start = options.start.unwrap_or(lo);
    let end = options.end.unwrap_or(hi);
    for p in [start, end] {
        if p < lo || p > hi {
            return Err(PathError::InvalidRange(format!(
                "endpoint {} lies outside range {}..{}",
                p + 1,
                lo + 1,
                hi + 1
            ))
            .into());
        }
    }
    Ok((lo, hi, start - lo, end - lo))
}

fn variant(
    full: AveragePath,
    lo: usize,
    hi: usize,
    start: usize,
    end: usize,
    options: &AnalysisOptions,
) -> Result<VariantReport, Error> {
    let path = full.slice(lo..hi + 1);
    let action = action(&path)?;
    let tsp = solve_order(&path, start, end, options)?;
    let dmat = distance_matrix(&path, options.metric);
    let tree = mst(&dmat)?;
    let branches = split_branches(&tree, start)?;
    let runs = ordered_runs_with(
        &tsp.order,
        RunOptions {
            gap: options.run_gap,
            descending: false,
        },
    )?;
    Ok(VariantReport {
        path: full,
        action,
        tsp,
        mst: tree,
        branches,
        runs,
    })
}

pub fn analyze(
    set: &EmbeddingSet,
    meta: &GroupMeta,
    options: &AnalysisOptions,
) -> Result<AnalysisBundle, Error> {
    let ordered_path = average_path(set, meta)?;
    let shuffled_path =
        shuffled_average_path(set, meta, options.shuffle_seed(), options.pin_anchors)?;
    let (lo, hi, start, end) = resolve_range(ordered_path.len(), options)?;
    let ordered = variant(ordered_path, lo, hi, start, end, options)?;
    let shuffled = variant(shuffled_path, lo, hi, start, end, options)?;
    let comparison = compare_reports(&ordered.runs, &shuffled.runs)?;
    Ok(AnalysisBundle {
        options: options.clone(),
        range: (lo, hi),
        ordered,
        shuffled,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{brownian_bridge_group, SyntheticGroupSpec};

    #[test]
    fn noiseless_bridge_recovers_identity() {
        let spec = SyntheticGroupSpec::along_axis(10, 12, 3, 1.0, 0.0, 2);
        let (set, meta) = brownian_bridge_group(&spec).unwrap();
        let bundle = analyze(&set, &meta, &AnalysisOptions::default()).unwrap();
        assert_eq!(bundle.ordered.tsp.order, (0..12).collect::<Vec<_>>());
        assert_eq!(bundle.ordered.runs.prefix_run, 12);
        assert_eq!(bundle.ordered.action.value, 11.0);
    }

    #[test]
    fn range_and_endpoints() {
        let spec = SyntheticGroupSpec::along_axis(4, 10, 2, 1.0, 0.0, 2);
        let (set, meta) = brownian_bridge_group(&spec).unwrap();
        let options = AnalysisOptions {
            range: Some((2, 7)),
            ..AnalysisOptions::default()
        };
        let bundle = analyze(&set, &meta, &options).unwrap();
        assert_eq!(bundle.ordered.tsp.order, (0..6).collect::<Vec<_>>());
        assert_eq!(bundle.ordered.action.n_steps, 5);

        let bad = AnalysisOptions {
            range: Some((2, 7)),
            start: Some(8),
            ..AnalysisOptions::default()
        };
        assert!(analyze(&set, &meta, &bad).is_err());
        let bad = AnalysisOptions {
            range: Some((5, 5)),
            ..AnalysisOptions::default()
        };
        assert!(analyze(&set, &meta, &bad).is_err());
    }

    #[test]
    fn solver_choice_parses() {
        assert_eq!("auto".parse::<SolverChoice>().unwrap(), SolverChoice::Auto);
        assert!("fast".parse::<SolverChoice>().is_err());
    }
}
