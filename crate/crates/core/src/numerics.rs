//! Dense complex-matrix kernels shared by every other module.
//!
//! Decompositions are backed by `nalgebra` and then gauge-fixed so that
//! identical input always yields identical factors.

use std::cmp::Ordering;

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{shape_err, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Entrywise tolerance for Hermiticity checks.
pub const EPS_HERM: f64 = 1e-10;
/// Relative rank cutoff for singular values and eigenvalues.
pub const EPS_RANK: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Build a matrix from row-major complex entries.
pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count must equal rows*cols");
    CMatrix::from_row_slice(rows, cols, entries)
}

/// Build a matrix from row-major real entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    let v: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
    from_rows(rows, cols, &v)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// `|i><j|` in dimension `n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Column vector `|i>` in dimension `n`.
pub fn basis_vector(n: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::zeros(n);
    v[i] = ONE;
    v
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.trace()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |a - b|` over entries; `f64::INFINITY` when shapes differ.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(a, &a.adjoint())
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    hermiticity_residual(a) <= tol
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn ensure_square(a: &CMatrix, what: &str) -> Result<usize> {
    if a.is_square() {
        Ok(a.nrows())
    } else {
        shape_err(format!("{what} must be square, got {}x{}", a.nrows(), a.ncols()))
    }
}

/// Threshold below which values are treated as zero: `EPS_RANK * max(largest, 1)`.
pub fn rank_cutoff<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let largest = values.into_iter().map(f64::abs).fold(0.0, f64::max);
    EPS_RANK * largest.max(1.0)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Singular value decomposition with unitary (square) factors.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x m` unitary.
    pub u: CMatrix,
    /// `min(m, n)` singular values, descending.
    pub sigma: Vec<f64>,
    /// `n x n` unitary.
    pub v_dag: CMatrix,
}

impl Svd {
    /// Number of singular values above the relative rank cutoff.
    pub fn rank(&self) -> usize {
        let cut = rank_cutoff(self.sigma.iter().copied());
        self.sigma.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let (m, n) = (self.u.nrows(), self.v_dag.ncols());
        let mut s = CMatrix::zeros(m, n);
        for (k, &x) in self.sigma.iter().enumerate() {
            s[(k, k)] = re(x);
        }
        &self.u * s * &self.v_dag
    }
}

fn first_significant(v: &[C64]) -> Option<usize> {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    v.iter().position(|z| z.norm() > 1e-12 * scale.max(1e-300))
}

fn lex_cmp(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Sort `(value, vector)` pairs by descending value; runs of values within
/// `tie` of the run's first element are ordered lexicographically by vector.
fn sort_spectrum<T>(items: &mut [(f64, DVector<C64>, T)], tie: f64) {
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut start = 0;
    while start < items.len() {
        let head = items[start].0;
        let mut end = start + 1;
        while end < items.len() && (head - items[end].0).abs() <= tie {
            end += 1;
        }
        items[start..end].sort_by(|a, b| lex_cmp(a.1.as_slice(), b.1.as_slice()));
        start = end;
    }
}

/// Complete orthonormal columns `q` (n x r) to a unitary `n x n` matrix.
///
/// Added columns come from Gram-Schmidt on standard basis vectors taken in
/// index order.
pub fn complete_basis(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let mut cols: Vec<DVector<C64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut i = 0;
    while cols.len() < n && i < n {
        let mut v = basis_vector(n, i);
        for _ in 0..2 {
            for col in &cols {
                let proj = col.dotc(&v);
                v -= col * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v / re(norm));
        }
        i += 1;
    }
    CMatrix::from_columns(&cols)
}

fn to_faer(a: &CMatrix) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Full SVD `A = U diag(sigma) V^dag` with descending singular values and
/// each right singular vector rotated so its first nonzero entry is real
/// positive.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return shape_err("svd of an empty matrix");
    }
    let dec = to_faer(a).svd().map_err(|e| Error::Internal(format!("svd failed: {e:?}")))?;
    let (u_full, v_full, s) = (dec.U(), dec.V(), dec.S().column_vector());
    let k = m.min(n);

    // (sigma, right vector, left vector), gauge fixed.
    let mut triples: Vec<(f64, DVector<C64>, DVector<C64>)> = (0..k)
        .map(|idx| {
            let mut u = DVector::from_fn(m, |r, _| u_full[(r, idx)]);
            let mut v = DVector::from_fn(n, |r, _| v_full[(r, idx)]);
            if let Some(p) = first_significant(v.as_slice()) {
                let rot = (v[p] / re(v[p].norm())).conj();
                v *= rot;
                u *= rot;
            }
            (s[idx].re, v, u)
        })
        .collect();
    let tie = 1e-12 * triples.iter().map(|t| t.0).fold(1.0, f64::max);
    sort_spectrum(&mut triples, tie);

    let u_cols: Vec<DVector<C64>> = triples.iter().map(|t| t.2.clone()).collect();
    let v_cols: Vec<DVector<C64>> = triples.iter().map(|t| t.1.clone()).collect();
    let u = complete_basis(&CMatrix::from_columns(&u_cols));
    let v = complete_basis(&CMatrix::from_columns(&v_cols));
    Ok(Svd {
        u,
        sigma: triples.iter().map(|t| t.0).collect(),
        v_dag: v.adjoint(),
    })
}

/// Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unitary whose columns are the eigenvectors.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&x| re(x)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues descending and each
/// eigenvector's first entry of largest magnitude made real positive.
pub fn eigh(h: &CMatrix) -> Result<Eigh> {
    ensure_finite(h)?;
    let n = ensure_square(h, "eigh input")?;
    let residual = hermiticity_residual(h);
    if residual > EPS_HERM {
        return Err(Error::NotHermitian { residual });
    }
    if n == 0 {
        return shape_err("eigh of an empty matrix");
    }
    let sym = (h + h.adjoint()) * re(0.5);
    let dec = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Internal(format!("eigh failed: {e:?}")))?;
    let (vecs, vals) = (dec.U(), dec.S().column_vector());
    let mut pairs: Vec<(f64, DVector<C64>, ())> = (0..n)
        .map(|k| {
            let mut v = DVector::from_fn(n, |r, _| vecs[(r, k)]);
            let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if let Some(p) = v.iter().position(|z| z.norm() >= big - 1e-12) {
                let rot = (v[p] / re(v[p].norm())).conj();
                v *= rot;
            }
            (vals[k].re, v, ())
        })
        .collect();
    let tie = 1e-12 * pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    sort_spectrum(&mut pairs, tie);
    let cols: Vec<DVector<C64>> = pairs.iter().map(|p| p.1.clone()).collect();
    Ok(Eigh {
        values: pairs.iter().map(|p| p.0).collect(),
        vectors: CMatrix::from_columns(&cols),
    })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(*eigh(h)?.values.last().expect("non-empty spectrum"))
}

/// Unitary factor of the polar decomposition of `A P`.
///
/// Returns a full unitary `U` with `A P = U (P A^dag A P)^{1/2}`. Directions
/// outside the range are paired by completing both singular bases in index
/// order, so `A P = 0` gives the identity.
pub fn polar_unitary(a: &CMatrix, support: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(a, "polar input")?;
    if support.shape() != (n, n) {
        return shape_err(format!(
            "support projector is {}x{}, expected {n}x{n}",
            support.nrows(),
            support.ncols()
        ));
    }
    let ap = a * support;
    let dec = svd(&ap)?;
    let scale = max_abs(a).max(1.0);
    let cut = EPS_RANK * scale;
    let r = dec.sigma.iter().filter(|&&s| s > cut).count();
    let w_r = dec.u.columns(0, r).into_owned();
    let v_r = dec.v_dag.rows(0, r).adjoint();
    let w = complete_basis(&w_r);
    let v = complete_basis(&v_r);
    Ok(w * v.adjoint())
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Partial trace over one factor of a `dim_a * dim_b` bipartite operator
/// (row index `i * dim_b + b`).
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    let n = da * db;
    if m.shape() != (n, n) {
        return shape_err(format!(
            "partial trace expects {n}x{n} for dims ({da},{db}), got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    Ok(match keep {
        Keep::First => CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|b| m[(i * db + b, j * db + b)]).sum()
        }),
        Keep::Second => CMatrix::from_fn(db, db, |a, b| {
            (0..da).map(|i| m[(i * db + a, i * db + b)]).sum()
        }),
    })
}

/// Single-qubit Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> CMatrix {
        from_rows(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn z() -> CMatrix {
        from_real_rows(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    /// `op` acting on qubit `target` (0-based, most significant first) of
    /// an `n_qubits` register.
    pub fn on_qubit(op: &CMatrix, target: usize, n_qubits: usize) -> CMatrix {
        assert!(target < n_qubits);
        (0..n_qubits).fold(identity(1), |acc, q| {
            if q == target {
                kron(&acc, op)
            } else {
                kron(&acc, &identity(2))
            }
        })
    }
}
