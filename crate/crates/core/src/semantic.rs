//! Paragraph embeddings.
//!
//! LSA: a weighted term × paragraph matrix, truncated SVD, paragraph vectors
//! taken as rows of `V·Σ`. Externally trained vectors (doc2vec and the like)
//! come in through a plain-text embedding file instead.
//!
//! Matrix columns follow the canonical order (narrative id ascending, then
//! paragraph position), so the vectors do not depend on the order in which
//! narratives were ingested.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GroupMeta, NarrativeGroup};
use crate::linalg::{gaussian_matrix, jacobi_svd, orthonormalize, CscMatrix, DenseMatrix};
use crate::takens::DelaySeries;

pub const DEFAULT_DIMS: usize = 300;
/// Range of dimensions over which results are expected to be stable.
pub const RECOMMENDED_DIMS: std::ops::RangeInclusive<usize> = 100..=500;

/// Matrices whose smaller side is at most this use the dense Jacobi path.
const DENSE_LIMIT: usize = 500;
const OVERSAMPLE: usize = 16;
const MAX_POWER_ITERS: usize = 40;
/// Largest move of the leading values between iterations, relative to the first.
const POWER_TOL: f64 = 1e-6;
const SKETCH_SEED: u64 = 0x15a_5eed;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("empty vocabulary: every paragraph is empty after tokenization")]
    EmptyVocabulary,
    #[error("rank {k} requested but the matrix is {rows}x{cols}")]
    RankTooLarge { k: usize, rows: usize, cols: usize },
    #[error("embedding file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("embedding file has {found} rows, group needs {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("embedding row {row} has {found} values, header says {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("narrative index {index} out of range ({count} narratives)")]
    NoSuchNarrative { index: usize, count: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercased maximal runs of letters and digits.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Raw,
    #[default]
    LogEntropy,
    Tfidf,
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Weighting::Raw),
            "log_entropy" => Ok(Weighting::LogEntropy),
            "tfidf" => Ok(Weighting::Tfidf),
            other => Err(format!("unknown weighting '{other}' (raw|log_entropy|tfidf)")),
        }
    }
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Weighting::Raw => "raw",
            Weighting::LogEntropy => "log_entropy",
            Weighting::Tfidf => "tfidf",
        })
    }
}

/// Sorted unique terms with a dense 0-based index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Weighted term × paragraph counts.
#[derive(Clone, Debug)]
pub struct TermParagraphMatrix {
    pub matrix: CscMatrix,
    /// `(narrative index in the group, 0-based position)` for each column.
    pub columns: Vec<(usize, usize)>,
    pub weighting: Weighting,
}

/// Canonical column order of a group: narratives by id, then position.
pub fn canonical_columns(meta: &GroupMeta) -> Vec<(usize, usize)> {
    let mut narratives: Vec<usize> = (0..meta.n_narratives()).collect();
    narratives.sort_by(|&a, &b| meta.ids[a].cmp(&meta.ids[b]).then(a.cmp(&b)));
    narratives
        .into_iter()
        .flat_map(|i| (0..meta.n_paragraphs).map(move |j| (i, j)))
        .collect()
}

pub fn build_matrix(
    group: &NarrativeGroup,
    weighting: Weighting,
) -> Result<(Vocabulary, TermParagraphMatrix), SemanticError> {
    let columns = canonical_columns(&group.meta());
    let docs: Vec<&str> = columns
        .iter()
        .map(|&(i, j)| group.narratives()[i].paragraphs[j].as_str())
        .collect();
    let (vocab, matrix) = build_from_documents(&docs, weighting)?;
    Ok((
        vocab,
        TermParagraphMatrix {
            matrix,
            columns,
            weighting,
        },
    ))
}

/// Term × document matrix for an arbitrary document list, columns in the
/// given order.
pub fn build_from_documents(
    docs: &[&str],
    weighting: Weighting,
) -> Result<(Vocabulary, CscMatrix), SemanticError> {
    let counts: Vec<BTreeMap<String, usize>> = docs
        .par_iter()
        .map(|doc| {
            let mut c = BTreeMap::new();
            for tok in tokenize(doc) {
                *c.entry(tok).or_insert(0) += 1;
            }
            c
        })
        .collect();

    let mut terms: Vec<String> = counts.iter().flat_map(|c| c.keys().cloned()).collect();
    terms.sort_unstable();
    terms.dedup();
    if terms.is_empty() {
        return Err(SemanticError::EmptyVocabulary);
    }
    let index: HashMap<String, usize> =
        terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    let n_docs = docs.len();
    let global = global_weights(&counts, &index, terms.len(), n_docs, weighting);

    let columns = counts
        .iter()
        .map(|c| {
            c.iter()
                .map(|(term, &count)| {
                    let row = index[term];
                    let local = match weighting {
                        Weighting::Raw | Weighting::Tfidf => count as f64,
                        Weighting::LogEntropy => (count as f64).ln_1p(),
                    };
                    (row, local * global[row])
                })
                .collect()
        })
        .collect();
    let n_terms = terms.len();
    Ok((Vocabulary { terms, index }, CscMatrix::from_columns(n_terms, columns)))
}

fn global_weights(
    counts: &[BTreeMap<String, usize>],
    index: &HashMap<String, usize>,
    n_terms: usize,
    n_docs: usize,
    weighting: Weighting,
) -> Vec<f64> {
    match weighting {
        Weighting::Raw => vec![1.0; n_terms],
        Weighting::Tfidf => {
            let mut df = vec![0usize; n_terms];
            for c in counts {
                for term in c.keys() {
                    df[index[term]] += 1;
                }
            }
            df.iter()
                .map(|&d| (n_docs as f64 / d as f64).ln())
                .collect()
        }
        Weighting::LogEntropy => {
            let mut gf = vec![0usize; n_terms];
            for c in counts {
                for (term, &n) in c {
                    gf[index[term]] += n;
                }
            }
            if n_docs < 2 {
                return vec![1.0; n_terms];
            }
            let mut plogp = vec![0.0; n_terms];
            for c in counts {
                for (term, &n) in c {
                    let t = index[term];
                    let p = n as f64 / gf[t] as f64;
                    plogp[t] += p * p.ln();
                }
            }
            let log_d = (n_docs as f64).ln();
            plogp
                .into_iter()
                .map(|s| {
                    let g = 1.0 + s / log_d;
                    // a uniformly spread term lands within rounding of zero
                    if g.abs() < 1e-12 {
                        0.0
                    } else {
                        g
                    }
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdMethod {
    DenseJacobi,
    Randomized,
}

/// Rank-k factorization `A ≈ left · diag(σ) · rightᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
    /// Set when fewer than `k` singular values are nonzero.
    pub rank_deficient: bool,
    pub method: SvdMethod,
}

impl SvdResult {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut ls = self.left.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            ls.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        ls.mul(&self.right.transpose())
    }
}

/// Best rank-`k` factorization. Small matrices (smaller side up to 500) go
/// through a full one-sided Jacobi SVD; larger ones through randomized
/// subspace iteration refined until the leading `k` values stop moving.
///
/// Signs are fixed so that the largest-magnitude entry of each right
/// singular vector is positive.
pub fn truncated_svd(matrix: &CscMatrix, k: usize) -> Result<SvdResult, SemanticError> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    if k == 0 || k > rows.min(cols) {
        return Err(SemanticError::RankTooLarge { k, rows, cols });
    }
    let (full, method) = if rows.min(cols) <= DENSE_LIMIT {
        (jacobi_svd(&matrix.to_dense()), SvdMethod::DenseJacobi)
    } else {
        (randomized_svd(matrix, k), SvdMethod::Randomized)
    };

    let mut left = DenseMatrix::zeros(rows, k);
    let mut right = DenseMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for j in 0..k {
        let v = full.v.col(j);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best })
            .1;
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, &x) in left.col_mut(j).iter_mut().zip(full.u.col(j)) {
            *dst = sign * x;
        }
        for (dst, &x) in right.col_mut(j).iter_mut().zip(v) {
            *dst = sign * x;
        }
        singular_values.push(full.sigma[j]);
    }
    let rank_deficient = singular_values.contains(&0.0);
    if rank_deficient {
        log::warn!("truncated SVD: matrix rank below requested k={k}");
    }
    Ok(SvdResult {
        left,
        singular_values,
        right,
        rank_deficient,
        method,
    })
}

/// Eigenvalues (nonincreasing) and eigenvectors of a symmetric matrix.
fn symmetric_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.rows();
    let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_fn(n, n, |i, j| {
        0.5 * (m.get(i, j) + m.get(j, i))
    }));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut vectors = DenseMatrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, slot, eig.eigenvectors[(i, j)]);
        }
    }
    (order.iter().map(|&j| eig.eigenvalues[j]).collect(), vectors)
}

fn randomized_svd(a: &CscMatrix, k: usize) -> crate::linalg::ThinSvd {
    // subspace iteration on the shorter side; `down` maps long -> short
    let wide = a.rows() <= a.cols();
    let (short, long) = if wide { (a.rows(), a.cols()) } else { (a.cols(), a.rows()) };
    let down = |x: &DenseMatrix| if wide { a.mul_dense(x) } else { a.t_mul_dense(x) };
    let up = |y: &DenseMatrix| if wide { a.t_mul_dense(y) } else { a.mul_dense(y) };
    let l = (k + (k / 2).max(OVERSAMPLE)).min(short);

    let mut q = down(&gaussian_matrix(long, l, SKETCH_SEED));
    orthonormalize(&mut q, SKETCH_SEED);
    let mut previous: Option<Vec<f64>> = None;
    let mut iter = 0;
    let (c, lambda, ritz) = loop {
        let c = up(&q);
        let w = down(&c);
        // Ritz values of q^T A A^T q
        let (lambda, ritz) = symmetric_eigen(&q.t_mul(&w));
        let estimate: Vec<f64> = lambda.iter().take(k).map(|s| s.max(0.0).sqrt()).collect();
        let settled = previous.as_ref().is_some_and(|prev| {
            let scale = estimate[0].max(f64::MIN_POSITIVE);
            let moved = estimate
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs() / scale)
                .fold(0.0, f64::max);
            log::trace!("randomized SVD: iteration {iter}, largest move {moved:e}");
            moved < POWER_TOL
        });
        if settled || iter + 1 >= MAX_POWER_ITERS {
            log::debug!("randomized SVD: {} power iterations", iter + 1);
            break (c, lambda, ritz);
        }
        previous = Some(estimate);
        q = w;
        orthonormalize(&mut q, SKETCH_SEED + 1 + iter as u64);
        iter += 1;
    };

    let sigma: Vec<f64> = lambda.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let short_vecs = q.mul(&ritz);
    let mut long_vecs = c.mul(&ritz);
    let cutoff = sigma[0] * (f64::EPSILON * short as f64).sqrt();
    let mut deficient = false;
    for (j, s) in sigma.iter().enumerate() {
        if *s > cutoff && *s > 0.0 {
            long_vecs.col_mut(j).iter_mut().for_each(|x| *x /= s);
        } else {
            long_vecs.col_mut(j).iter_mut().for_each(|x| *x = 0.0);
            deficient = true;
        }
    }
    let sigma = sigma.into_iter().map(|s| if s > cutoff { s } else { 0.0 }).collect();
    if deficient {
        orthonormalize(&mut long_vecs, SKETCH_SEED);
    }
    let (u, v) = if wide { (short_vecs, long_vecs) } else { (long_vecs, short_vecs) };
    crate::linalg::ThinSvd { u, sigma, v }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Lsa,
    External,
    Synthetic,
}

/// One k-vector per (narrative, paragraph position).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    k: usize,
    ids: Vec<String>,
    n_paragraphs: usize,
    /// Row-major: narrative `i`, position `j` at `(i * n + j) * k`.
    data: Vec<f64>,
    method: MethodTag,
}

impl EmbeddingSet {
    /// Vectors indexed `vectors[i][j]`, narratives in `ids` order.
    pub fn new(
        ids: Vec<String>,
        vectors: Vec<Vec<Vec<f64>>>,
        method: MethodTag,
    ) -> Result<Self, SemanticError> {
        let n = vectors.first().map_or(0, Vec::len);
        let k = vectors
            .first()
            .and_then(|v| v.first())
            .map_or(0, Vec::len);
        assert_eq!(ids.len(), vectors.len(), "one id per narrative");
        let mut data = Vec::with_capacity(ids.len() * n * k);
        for (i, nar) in vectors.into_iter().enumerate() {
            assert_eq!(nar.len(), n, "narrative {i} has a different length");
            for (j, v) in nar.into_iter().enumerate() {
                let row = i * n + j;
                if v.len() != k {
                    return Err(SemanticError::Dimension {
                        row,
                        expected: k,
                        found: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(SemanticError::NonFinite { row });
                }
                data.extend(v);
            }
        }
        Ok(EmbeddingSet {
            k,
            ids,
            n_paragraphs: n,
            data,
            method,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_narratives(&self) -> usize {
        self.ids.len()
    }

    pub fn n_paragraphs(&self) -> usize {
        self.n_paragraphs
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    /// Paragraph `j` (0-based) of narrative `i`.
    pub fn vector(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n_paragraphs + j) * self.k;
        &self.data[start..start + self.k]
    }

    /// Checks that this set covers `meta` (same narratives, same length).
    pub fn covers(&self, meta: &GroupMeta) -> bool {
        self.ids == meta.ids && self.n_paragraphs == meta.n_paragraphs
    }

    /// Serializes in the embedding file format, rows in canonical order.
    pub fn to_file_string(&self) -> String {
        let mut order: Vec<usize> = (0..self.n_narratives()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]).then(a.cmp(&b)));
        let mut out = String::new();
        writeln!(out, "{} {}", self.ids.len() * self.n_paragraphs, self.k).unwrap();
        for i in order {
            for j in 0..self.n_paragraphs {
                let row: Vec<String> = self.vector(i, j).iter().map(|x| x.to_string()).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SemanticError> {
        fs::write(path, self.to_file_string()).map_err(|source| SemanticError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// LSA paragraph vectors: rows of `V·Σ` from the rank-`k` SVD.
pub fn embed_paragraphs(
    group: &NarrativeGroup,
    k: usize,
    weighting: Weighting,
) -> Result<EmbeddingSet, SemanticError> {
    if !RECOMMENDED_DIMS.contains(&k) {
        log::warn!(
            "k={k} outside the recommended {}..={} range",
            RECOMMENDED_DIMS.start(),
            RECOMMENDED_DIMS.end()
        );
    }
    let (_, tpm) = build_matrix(group, weighting)?;
    let svd = truncated_svd(&tpm.matrix, k)?;
    let n = group.n_paragraphs();
    let mut vectors = vec![vec![Vec::new(); n]; group.n_narratives()];
    for (col, &(i, j)) in tpm.columns.iter().enumerate() {
        vectors[i][j] = (0..k)
            .map(|c| svd.right.get(col, c) * svd.singular_values[c])
            .collect();
    }
    let ids = group.meta().ids;
    EmbeddingSet::new(ids, vectors, MethodTag::Lsa)
}

/// Parses the embedding file format for `meta`.
pub fn parse_external(text: &str, meta: &GroupMeta) -> Result<EmbeddingSet, SemanticError> {
    let format_err = |message: String| SemanticError::Format {
        path: PathBuf::new(),
        message,
    };
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    let header = lines.next().ok_or_else(|| format_err("missing header".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let [rows, k] = fields.as_slice() else {
        return Err(format_err(format!("bad header '{header}'")));
    };
    let rows: usize = rows
        .parse()
        .map_err(|_| format_err(format!("bad row count in header '{header}'")))?;
    let k: usize = k
        .parse()
        .map_err(|_| format_err(format!("bad dimension in header '{header}'")))?;
    let expected = meta.n_narratives() * meta.n_paragraphs;
    if rows != expected {
        return Err(SemanticError::RowCount {
            expected,
            found: rows,
        });
    }

    let mut parsed = Vec::with_capacity(rows);
    for (row, line) in lines.enumerate() {
        if row >= rows {
            if line.trim().is_empty() {
                continue;
            }
            return Err(SemanticError::RowCount {
                expected,
                found: row + 1,
            });
        }
        let values = line
            .split(' ')
            .map(f64::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format_err(format!("row {row}: {e}")))?;
        if values.len() != k {
            return Err(SemanticError::Dimension {
                row,
                expected: k,
                found: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(SemanticError::NonFinite { row });
        }
        parsed.push(values);
    }
    if parsed.len() != rows {
        return Err(SemanticError::RowCount {
            expected,
            found: parsed.len(),
        });
    }

    let n = meta.n_paragraphs;
    let mut vectors = vec![vec![Vec::new(); n]; meta.n_narratives()];
    for (values, (i, j)) in parsed.into_iter().zip(canonical_columns(meta)) {
        vectors[i][j] = values;
    }
    let mut set = EmbeddingSet::new(meta.ids.clone(), vectors, MethodTag::External)?;
    set.k = k;
    Ok(set)
}

pub fn load_external(path: &Path, meta: &GroupMeta) -> Result<EmbeddingSet, SemanticError> {
    let text = fs::read_to_string(path).map_err(|source| SemanticError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_external(&text, meta).map_err(|e| match e {
        SemanticError::Format { message, .. } => SemanticError::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Leading right singular direction of the stacked embedding matrix
/// (all paragraphs × k), sign fixed so its largest component is positive.
/// For an LSA set this is the first coordinate axis.
pub fn first_direction(set: &EmbeddingSet) -> Vec<f64> {
    let k = set.k;
    let mut gram = DenseMatrix::zeros(k, k);
    for row in set.data.chunks(k) {
        for a in 0..k {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in 0..k {
                let cur = gram.get(a, b);
                gram.set(a, b, cur + ra * row[b]);
            }
        }
    }
    let svd = jacobi_svd(&gram);
    let mut w = svd.u.col(0).to_vec();
    let pivot = w
        .iter()
        .fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
    w
}

/// Story-order series of each paragraph's coordinate along the first
/// singular direction of the embedding.
pub fn first_coordinate_series(
    set: &EmbeddingSet,
    narrative: usize,
) -> Result<DelaySeries, SemanticError> {
    if narrative >= set.n_narratives() {
        return Err(SemanticError::NoSuchNarrative {
            index: narrative,
            count: set.n_narratives(),
        });
    }
    let w = first_direction(set);
    let values = (0..set.n_paragraphs)
        .map(|j| crate::linalg::dot(set.vector(narrative, j), &w))
        .collect();
    Ok(DelaySeries::new_unchecked(
        values,
        format!("{}:first-coordinate", set.ids[narrative]),
    ))
}

/// First-coordinate series of a single long document given as paragraphs
/// (rank-1 LSA on the paragraphs themselves).
pub fn paragraph_series(
    paragraphs: &[String],
    weighting: Weighting,
) -> Result<Vec<f64>, SemanticError> {
    let docs: Vec<&str> = paragraphs.iter().map(String::as_str).collect();
    let (_, matrix) = build_from_documents(&docs, weighting)?;
    let svd = truncated_svd(&matrix, 1)?;
    Ok(svd.right.col(0).iter().map(|v| v * svd.singular_values[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Narrative;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("The cat, the CAT."), ["the", "cat", "the", "cat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a1-b2"), ["a1", "b2"]);
    }

    fn docs_matrix(docs: &[&str], w: Weighting) -> (Vocabulary, DenseMatrix) {
        let (v, m) = build_from_documents(docs, w).unwrap();
        (v, m.to_dense())
    }

    #[test]
    fn raw_counts() {
        let (v, m) = docs_matrix(&["a b", "a c"], Weighting::Raw);
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!(m, DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]));
    }

    #[test]
    fn uniform_term_has_zero_entropy_weight() {
        let (v, m) = docs_matrix(&["the x", "the y", "the z"], Weighting::LogEntropy);
        let row = v.index_of("the").unwrap();
        assert!((0..3).all(|c| m.get(row, c) == 0.0));
        // a term in one paragraph keeps global weight 1
        let x = v.index_of("x").unwrap();
        assert!((m.get(x, 0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tfidf_matches_hand_computation() {
        // D = 3; df(a)=3, df(b)=2, df(c)=1
        let (v, m) = docs_matrix(&["a a b", "a b c", "a"], Weighting::Tfidf);
        let d = 3.0f64;
        let b = v.index_of("b").unwrap();
        let c = v.index_of("c").unwrap();
        let a = v.index_of("a").unwrap();
        assert_eq!(m.get(a, 0), 0.0);
        assert!((m.get(b, 0) - (d / 2.0).ln()).abs() < 1e-15);
        assert!((m.get(b, 1) - (d / 2.0).ln()).abs() < 1e-15);
        assert!((m.get(c, 1) - d.ln()).abs() < 1e-15);
        assert_eq!(m.get(c, 0), 0.0);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert!(matches!(
            build_from_documents(&["...", " "], Weighting::Raw),
            Err(SemanticError::EmptyVocabulary)
        ));
    }

    #[test]
    fn raw_column_sums_are_token_counts() {
        let docs = ["one two two", "three, three three four!", "five"];
        let (_, m) = docs_matrix(&docs, Weighting::Raw);
        for (c, doc) in docs.iter().enumerate() {
            let sum: f64 = m.col(c).iter().sum();
            assert_eq!(sum, tokenize(doc).len() as f64);
        }
    }

    #[test]
    fn diagonal_svd() {
        let m = DenseMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let svd = truncated_svd(&CscMatrix::from_dense(&m), 2).unwrap();
        assert_eq!(svd.singular_values, vec![3.0, 2.0]);
        assert!(!svd.rank_deficient);
    }

    #[test]
    fn rank_one_is_exact() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [2.0, 1.0, -1.0];
        let rows: Vec<Vec<f64>> = u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        let m = DenseMatrix::from_rows(&rows);
        let svd = truncated_svd(&CscMatrix::from_dense(&m), 1).unwrap();
        assert!(svd.reconstruct().sub(&m).frobenius_norm() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let svd = truncated_svd(&CscMatrix::from_dense(&m), 2).unwrap();
        assert!(svd.rank_deficient);
        assert_eq!(svd.singular_values[1], 0.0);
        assert!(matches!(
            truncated_svd(&CscMatrix::from_dense(&m), 3),
            Err(SemanticError::RankTooLarge { .. })
        ));
    }

    #[test]
    fn randomized_path_matches_dense_path() {
        // 520 x 600 sparse-ish matrix forces the randomized route
        let g = gaussian_matrix(520, 600, 4);
        let mut m = DenseMatrix::zeros(520, 600);
        for j in 0..600 {
            for i in 0..520 {
                if (i * 7 + j * 13) % 5 == 0 {
                    m.set(i, j, g.get(i, j));
                }
            }
        }
        // plant a decaying spectrum on top
        for t in 0..8 {
            let scale = 40.0 / (t + 1) as f64;
            let a = gaussian_matrix(520, 1, 100 + t);
            let b = gaussian_matrix(600, 1, 200 + t);
            for j in 0..600 {
                for i in 0..520 {
                    let cur = m.get(i, j);
                    m.set(i, j, cur + scale * a.get(i, 0) * b.get(j, 0) / 10.0);
                }
            }
        }
        let sparse = CscMatrix::from_dense(&m);
        let fast = truncated_svd(&sparse, 6).unwrap();
        assert_eq!(fast.method, SvdMethod::Randomized);
        let exact = jacobi_svd(&m);
        for j in 0..6 {
            let rel = (fast.singular_values[j] - exact.sigma[j]).abs() / exact.sigma[j];
            assert!(rel < 1e-8, "sigma {j}: {rel}");
        }
    }

    fn text_group() -> NarrativeGroup {
        let stories = [
            ("b", ["alpha beta", "gamma delta delta", "omega"]),
            ("a", ["alpha beta", "delta epsilon", "omega"]),
            ("c", ["alpha beta", "gamma gamma zeta", "omega"]),
        ];
        let narratives = stories
            .iter()
            .map(|(id, ps)| Narrative {
                id: id.to_string(),
                paragraphs: ps.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        NarrativeGroup::new(narratives, 3, 1, 3, "t").unwrap()
    }

    #[test]
    fn identical_paragraphs_embed_identically() {
        let group = text_group();
        let set = embed_paragraphs(&group, 2, Weighting::Raw).unwrap();
        assert_eq!(set.vector(0, 0), set.vector(1, 0));
        assert_eq!(set.vector(0, 2), set.vector(2, 2));
        assert_eq!(set.method(), MethodTag::Lsa);
    }

    #[test]
    fn k1_first_coordinate_is_the_embedding() {
        let group = text_group();
        let set = embed_paragraphs(&group, 1, Weighting::Raw).unwrap();
        let series = first_coordinate_series(&set, 1).unwrap();
        for j in 0..3 {
            assert!((series.values()[j] - set.vector(1, j)[0]).abs() < 1e-12);
        }
        assert!(first_coordinate_series(&set, 3).is_err());
    }

    #[test]
    fn lsa_first_direction_is_first_axis() {
        let set = embed_paragraphs(&text_group(), 3, Weighting::LogEntropy).unwrap();
        let w = first_direction(&set);
        assert!((w[0] - 1.0).abs() < 1e-10);
        assert!(w[1..].iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn narrative_order_does_not_change_vectors() {
        let group = text_group();
        let mut reversed: Vec<Narrative> = group.narratives().to_vec();
        reversed.reverse();
        let other = NarrativeGroup::new(reversed, 3, 1, 3, "t").unwrap();
        let a = embed_paragraphs(&group, 2, Weighting::LogEntropy).unwrap();
        let b = embed_paragraphs(&other, 2, Weighting::LogEntropy).unwrap();
        for (i, id) in group.meta().ids.iter().enumerate() {
            let ib = other.meta().ids.iter().position(|x| x == id).unwrap();
            for j in 0..3 {
                assert_eq!(a.vector(i, j), b.vector(ib, j));
            }
        }
    }

    #[test]
    fn external_file_format() {
        let meta = GroupMeta::numbered(2, 3, 1, 3, "x").unwrap();
        let mut text = String::from("# comment\n6 3\n");
        for r in 0..6 {
            text.push_str(&format!("{} 0.5 -1\n", r));
        }
        let set = parse_external(&text, &meta).unwrap();
        assert_eq!(set.k(), 3);
        assert_eq!(set.vector(1, 0), &[3.0, 0.5, -1.0]);
        assert_eq!(set.method(), MethodTag::External);

        let bad = text.replacen("6 3", "5 3", 1);
        assert!(matches!(
            parse_external(&bad, &meta),
            Err(SemanticError::RowCount { expected: 6, found: 5 })
        ));
        let short = text.replacen("2 0.5 -1", "2 0.5", 1);
        assert!(matches!(parse_external(&short, &meta), Err(SemanticError::Dimension { row: 2, .. })));
        let nan = text.replacen("2 0.5 -1", "2 NaN -1", 1);
        assert!(matches!(parse_external(&nan, &meta), Err(SemanticError::NonFinite { row: 2 })));
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_external(&truncated, &meta), Err(SemanticError::RowCount { .. })));
    }

    #[test]
    fn lsa_set_round_trips_through_file() {
        let group = text_group();
        let set = embed_paragraphs(&group, 2, Weighting::LogEntropy).unwrap();
        let back = parse_external(&set.to_file_string(), &group.meta()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for (x, y) in set.vector(i, j).iter().zip(back.vector(i, j)) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
