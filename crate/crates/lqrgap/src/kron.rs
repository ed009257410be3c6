//! Vectorization and (symmetric) Kronecker algebra.
//!
//! `svec` stacks the upper triangle of a symmetric matrix row-major, scaling
//! off-diagonal entries by sqrt(2) so that `<svec(M1), svec(M2)> = Tr(M1 M2)`.
//! `vec` is always column-stacking. The symmetric Kronecker product is the
//! operator on svec-space with `(A (x)_s A) svec(S) = svec(A S A^T)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Vector representation of a symmetric `n x n` matrix, length `n(n+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec {
    entries: DVector<f64>,
    dim: usize,
}

impl SymVec {
    /// Wraps a raw vector, requiring its length to be a triangular number.
    pub fn from_vector(entries: DVector<f64>) -> Result<Self> {
        let dim = triangular_root(entries.len()).ok_or_else(|| {
            Error::Dimension(format!(
                "length {} is not of the form n(n+1)/2",
                entries.len()
            ))
        })?;
        Ok(Self { entries, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() == 0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.entries
    }
}

/// Inverse of `n(n+1)/2`, if the argument is a triangular number.
fn triangular_root(len: usize) -> Option<usize> {
    let mut n = 0usize;
    let mut tot = 0usize;
    while tot < len {
        n += 1;
        tot += n;
    }
    (tot == len).then_some(n)
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.norm().max(1.0);
    let mut max_asym: f64 = 0.0;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            max_asym = max_asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if max_asym > SYMMETRY_REL_TOL * scale {
        return Err(Error::NotSymmetric {
            max_asym,
            tol: SYMMETRY_REL_TOL * scale,
        });
    }
    Ok(())
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `svec(S)`: upper triangle of `S`, row-major, off-diagonals scaled by sqrt(2).
pub fn svec(s: &DMatrix<f64>) -> Result<SymVec> {
    check_symmetric(s)?;
    Ok(svec_unchecked(s))
}

pub(crate) fn svec_unchecked(s: &DMatrix<f64>) -> SymVec {
    let n = s.nrows();
    let mut out = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for i in 0..n {
        out[k] = s[(i, i)];
        k += 1;
        for j in (i + 1)..n {
            out[k] = SQRT2 * 0.5 * (s[(i, j)] + s[(j, i)]);
            k += 1;
        }
    }
    SymVec {
        entries: out,
        dim: n,
    }
}

/// `phi(x) = svec(x x^T)` without materializing the outer product.
pub(crate) fn svec_of_outer(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for i in 0..n {
        out[k] = x[i] * x[i];
        k += 1;
        for j in (i + 1)..n {
            out[k] = SQRT2 * x[i] * x[j];
            k += 1;
        }
    }
    out
}

/// `smat`: inverse of `svec`.
pub fn smat(v: &SymVec) -> DMatrix<f64> {
    let n = v.dim;
    let mut s = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        s[(i, i)] = v.entries[k];
        k += 1;
        for j in (i + 1)..n {
            let x = v.entries[k] / SQRT2;
            s[(i, j)] = x;
            s[(j, i)] = x;
            k += 1;
        }
    }
    s
}

/// Standard Kronecker product. Satisfies `vec(A X B) = (B^T (x) A) vec(X)`
/// with column-stacking `vec`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let (p, q) = (b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(m * p, n * q);
    for i in 0..m {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for r in 0..p {
                for c in 0..q {
                    out[(i * p + r, j * q + c)] = aij * b[(r, c)];
                }
            }
        }
    }
    out
}

/// The `n(n+1)/2 x n^2` matrix `G` with `G vec(S) = svec(S)` for symmetric `S`
/// and orthonormal rows. Fixed by the row-major upper-triangle ordering.
pub(crate) fn svec_projector(n: usize) -> DMatrix<f64> {
    let m = n * (n + 1) / 2;
    let mut g = DMatrix::zeros(m, n * n);
    let mut k = 0;
    for i in 0..n {
        // vec index of entry (r, c) is c * n + r (column stacking).
        g[(k, i * n + i)] = 1.0;
        k += 1;
        for j in (i + 1)..n {
            g[(k, j * n + i)] = 1.0 / SQRT2;
            g[(k, i * n + j)] = 1.0 / SQRT2;
            k += 1;
        }
    }
    g
}

/// Symmetric Kronecker product `A (x)_s B` as a dense operator on svec-space.
#[derive(Debug, Clone)]
pub struct SymKronOp {
    matrix: DMatrix<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl SymKronOp {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn apply(&self, v: &SymVec) -> Result<SymVec> {
        let m = self.matrix.ncols();
        if v.len() != m {
            return Err(Error::Dimension(format!(
                "operator acts on length {m}, got {}",
                v.len()
            )));
        }
        SymVec::from_vector(&self.matrix * v.as_vector())
    }
}

/// `A (x)_s B = (1/2) G (A (x) B + B (x) A) G^T`, realized densely.
pub fn sym_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SymKronOp> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "symmetric Kronecker product needs equal square factors, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let n = a.nrows();
    let g = svec_projector(n);
    let mixed = kron(a, b) + kron(b, a);
    let matrix = 0.5 * (&g * mixed * g.transpose());
    Ok(SymKronOp {
        matrix,
        left: a.clone(),
        right: b.clone(),
    })
}

/// `E[g^T A1 g * g^T A2 g * g^T A3 g]` for `g ~ N(0, I)` and symmetric `A_i`:
/// `Tr A1 Tr A2 Tr A3 + 2 (Tr A1 Tr A2A3 + Tr A2 Tr A1A3 + Tr A3 Tr A1A2) + 8 Tr A1A2A3`.
pub fn gaussian_triple_moment(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a3: &DMatrix<f64>,
) -> Result<f64> {
    for a in [a1, a2, a3] {
        check_symmetric(a)?;
    }
    if a1.nrows() != a2.nrows() || a2.nrows() != a3.nrows() {
        return Err(Error::Dimension(format!(
            "gaussian_triple_moment needs equal dims, got {}, {}, {}",
            a1.nrows(),
            a2.nrows(),
            a3.nrows()
        )));
    }
    let (t1, t2, t3) = (a1.trace(), a2.trace(), a3.trace());
    let a12 = a1 * a2;
    let t12 = a12.trace();
    let t13 = (a1 * a3).trace();
    let t23 = (a2 * a3).trace();
    let t123 = (a12 * a3).trace();
    Ok(t1 * t2 * t3 + 2.0 * (t1 * t23 + t2 * t13 + t3 * t12) + 8.0 * t123)
}
