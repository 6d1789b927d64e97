//! Narratives as paths in a semantic space.
//!
//! A group of narratives that share their first and last paragraphs is
//! embedded paragraph by paragraph ([`semantic`]), averaged position by
//! position into a single path ([`pathspace`]), and the path's discrete
//! action is compared against the cheapest reordering of the same points
//! ([`minpath`], [`runstats`]). [`takens`] estimates correlation dimension
//! of delay embeddings, and [`testkit`] generates ensembles with a known
//! answer.

pub mod analysis;
pub mod corpus;
pub mod linalg;
pub mod minpath;
pub mod pathspace;
pub mod rng;
pub mod runstats;
pub mod semantic;
pub mod takens;
pub mod testkit;

pub use analysis::{analyze, AnalysisBundle, AnalysisOptions, SolverChoice};
pub use corpus::{
    load_group, permute_group, word_count, CorpusError, GroupConfig, GroupMeta, Narrative,
    NarrativeGroup, ValidationReport,
};
pub use minpath::{
    mst, split_branches, tree_to_dot, tsp_brute_force, tsp_exact, tsp_heuristic, MinPathError,
    PathOrder, SolverTag, SpanningTree, TreeBranch,
};
pub use pathspace::{
    action, action_of_order, average_path, distance_matrix, shuffled_average_path, ActionValue,
    AveragePath, DistanceMatrix, Metric, PathError, Provenance,
};
pub use rng::{stream_rng, sub_seed};
pub use runstats::{compare_reports, ordered_runs, ComparisonSummary, RunReport, RunStatsError};
pub use semantic::{embed_paragraphs, truncated_svd, EmbeddingSet, SemanticError, Weighting};
pub use takens::{
    correlation_dimension, delay_embed, dimension_sweep, shuffle_series, DelaySeries,
    DimensionCurve, PointCloud, TakensError,
};
pub use testkit::{brownian_bridge_group, SyntheticGroupSpec, TestkitError};

/// Any error from the library, tagged with the module it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("semantic: {0}")]
    Semantic(#[from] SemanticError),
    #[error("pathspace: {0}")]
    Path(#[from] PathError),
    #[error("minpath: {0}")]
    MinPath(#[from] MinPathError),
    #[error("runstats: {0}")]
    RunStats(#[from] RunStatsError),
    #[error("takens: {0}")]
    Takens(#[from] TakensError),
    #[error("testkit: {0}")]
    Testkit(#[from] TestkitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl ErrorKind {
    /// Process exit code: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            Error::Corpus(CorpusError::Io { .. }) => Io,
            Error::Corpus(_) => Validation,
            Error::Semantic(SemanticError::Io { .. }) => Io,
            Error::Semantic(SemanticError::NonFinite { .. }) => Numerical,
            Error::Semantic(_) => Validation,
            Error::Path(_) => Validation,
            Error::MinPath(MinPathError::NonFinite(..)) => Numerical,
            Error::MinPath(_) => Validation,
            Error::RunStats(_) => Validation,
            Error::Takens(
                TakensError::Degenerate | TakensError::NoScalingRegion(_) | TakensError::BlowUp { .. },
            ) => Numerical,
            Error::Takens(_) => Validation,
            Error::Testkit(TestkitError::Io { .. }) => Io,
            Error::Testkit(_) => Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
