//! Small dense and sparse matrix kernels backing the SVD.
//!
//! Dense matrices are column-major so the one-sided Jacobi sweep works on
//! contiguous columns.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::stream_rng;

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// From row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = DenseMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for col in columns {
            assert_eq!(col.len(), rows, "column length mismatch");
            data.extend(col);
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `selfᵀ · other`.
    pub fn t_mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            for i in 0..self.cols {
                out.set(i, j, dot(self.col(i), other.col(j)));
            }
        }
        out
    }

    /// `self · other`.
    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let w = other.get(k, j);
                if w != 0.0 {
                    axpy(w, &self.data[k * self.rows..(k + 1) * self.rows], dst);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds from per-column `(row, value)` lists. Rows within a column are
    /// sorted; zero values are dropped.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let cols = columns.len();
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in columns {
            col.sort_by_key(|&(r, _)| r);
            for (r, v) in col {
                assert!(r < rows, "row index out of range");
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let columns = (0..m.cols())
            .map(|j| {
                m.col(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        CscMatrix::from_columns(m.rows(), columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j).find(|&(r, _)| r == i).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for (i, v) in self.column(j) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// `A · X` for dense `X` (cols × p).
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.cols);
        let mut out = DenseMatrix::zeros(self.rows, x.cols());
        for p in 0..x.cols() {
            let xc = x.col(p);
            let dst = out.col_mut(p);
            for j in 0..self.cols {
                let w = xc[j];
                if w != 0.0 {
                    for (i, v) in self.column(j) {
                        dst[i] += v * w;
                    }
                }
            }
        }
        out
    }

    /// `Aᵀ · Y` for dense `Y` (rows × p).
    pub fn t_mul_dense(&self, y: &DenseMatrix) -> DenseMatrix {
        assert_eq!(y.rows(), self.rows);
        let mut out = DenseMatrix::zeros(self.cols, y.cols());
        for p in 0..y.cols() {
            let yc = y.col(p);
            let dst = out.col_mut(p);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = self.column(j).map(|(i, v)| v * yc[i]).sum();
            }
        }
        out
    }
}

/// Thin SVD `A = U Σ Vᵀ` with singular values sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Columns of `U` belonging to zero
/// singular values are completed to an orthonormal set.
pub fn jacobi_svd(a: &DenseMatrix) -> ThinSvd {
    if a.rows() < a.cols() {
        let t = jacobi_svd(&a.transpose());
        return ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let m = a.rows();
    let n = a.cols();
    let mut work = a.clone();
    let mut v = DenseMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let tol = f64::EPSILON * m.max(1) as f64;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = work.col(p);
                    let cq = work.col(q);
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, norm(work.col(j)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let mut u = DenseMatrix::zeros(m, n);
    let mut v_sorted = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let scale = order.first().map_or(0.0, |x| x.1);
    let cutoff = scale * f64::EPSILON * m.max(n) as f64;
    let mut missing = Vec::new();
    for (slot, &(j, s)) in order.iter().enumerate() {
        v_sorted.col_mut(slot).copy_from_slice(v.col(j));
        if s > cutoff && s > 0.0 {
            for (dst, src) in u.col_mut(slot).iter_mut().zip(work.col(j)) {
                *dst = src / s;
            }
            sigma.push(s);
        } else {
            sigma.push(0.0);
            missing.push(slot);
        }
    }
    for slot in missing {
        complete_column(&mut u, slot);
    }
    ThinSvd {
        u,
        sigma,
        v: v_sorted,
    }
}

fn rotate_columns(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows();
    let (lo, hi) = m.data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replaces column `slot` with a unit vector orthogonal to every other
/// nonzero column.
fn complete_column(m: &mut DenseMatrix, slot: usize) {
    let rows = m.rows();
    for e in 0..rows {
        let mut cand = vec![0.0; rows];
        cand[e] = 1.0;
        for _ in 0..2 {
            for j in 0..m.cols() {
                if j == slot {
                    continue;
                }
                let c = m.col(j);
                let nc = dot(c, c);
                if nc > 0.0 {
                    let proj = dot(c, &cand) / nc;
                    axpy(-proj, c, &mut cand);
                }
            }
        }
        let nrm = norm(&cand);
        if nrm > 0.5 {
            for (dst, x) in m.col_mut(slot).iter_mut().zip(cand) {
                *dst = x / nrm;
            }
            return;
        }
    }
}

/// Orthonormalizes columns in place (modified Gram-Schmidt, two passes).
/// Columns that collapse are replaced by seeded random directions.
pub fn orthonormalize(m: &mut DenseMatrix, seed: u64) {
    let rows = m.rows();
    let mut rng = stream_rng(seed, 0x6f72_7468);
    for j in 0..m.cols() {
        loop {
            let original = norm(m.col(j));
            for _ in 0..2 {
                for i in 0..j {
                    let (lo, hi) = m.data.split_at_mut(j * rows);
                    let qi = &lo[i * rows..(i + 1) * rows];
                    let cj = &mut hi[..rows];
                    let r = dot(qi, cj);
                    axpy(-r, qi, cj);
                }
            }
            let nrm = norm(m.col(j));
            if original > 0.0 && nrm > 1e-10 * original {
                m.col_mut(j).iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            for x in m.col_mut(j).iter_mut() {
                *x = rng.sample(StandardNormal);
            }
        }
    }
}

/// Dense Gaussian test matrix from a fixed seed.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, 0);
    let mut m = DenseMatrix::zeros(rows, cols);
    for x in m.data.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    m
}
