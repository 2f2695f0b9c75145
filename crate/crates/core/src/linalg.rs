//! Dense symmetric linear algebra.
//!
//! [`SymMatrix`] stores the upper triangle in packed row order, so every
//! materialized dense copy is exactly symmetric. The routines here are the
//! small-dimension workhorses used by the estimators and solvers: Cholesky,
//! log-determinant, inverse, a cyclic Jacobi eigensolver, the PSD square root
//! and the Frobenius / entrywise-ℓ1 / spectral norms.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Jacobi stops once the off-diagonal Frobenius mass drops below this fraction of ‖A‖_F.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Negative eigenvalues above `-PSD_REL_TOL * ‖A‖_F` are treated as zero.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Dense symmetric `n × n` matrix in packed upper-triangular storage.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseRepr", into = "DenseRepr")]
pub struct SymMatrix {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Row i starts at i*n - i(i-1)/2.
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            packed: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` for `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                packed.push(f(i, j));
            }
        }
        Self { n, packed }
    }

    /// Builds a matrix from a row-major dense buffer, rejecting asymmetric input.
    ///
    /// Mirror entries may differ by at most `1e-12 · max|a_ij|`; the pair is averaged.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                dense.len()
            )));
        }
        if dense.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (dense[i * n + j], dense[j * n + i]);
                if (a - b).abs() > tol {
                    return Err(Error::ShapeMismatch(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| {
            if i == j {
                dense[i * n + i]
            } else {
                0.5 * (dense[i * n + j] + dense[j * n + i])
            }
        }))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut dense = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "row of length {} in a {n}-row matrix",
                    r.len()
                )));
            }
            dense.extend_from_slice(r);
        }
        Self::from_dense(n, &dense)
    }

    /// `Q diag(values) Qᵀ` where column `k` of the row-major `vectors` is the k-th vector.
    pub fn from_spectral(values: &[f64], vectors: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| {
            (0..n)
                .map(|k| vectors[i * n + k] * values[k] * vectors[j * n + k])
                .sum()
        })
    }

    /// `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        Self::from_fn(x.len(), |i, j| x[i] * x[j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.n, i, j);
        self.packed[k] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }

    /// Entrywise map; `f` sees each upper-triangle entry once.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            n: self.n,
            packed: self.packed.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Trace inner product `⟨A, B⟩ = Σ_ij A_ij B_ij`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            for j in i..self.n {
                let p = self.packed[k] * other.packed[k];
                s += if i == j { p } else { 2.0 * p };
                k += 1;
            }
        }
        s
    }

    /// Calls `f(i, j, a_ij)` for every entry of the full matrix, both triangles.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for i in 0..self.n {
            for j in 0..self.n {
                f(i, j, self.get(i, j));
            }
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `Σ_ij |A_ij|` over all n² entries.
    pub fn norm_entry1(&self) -> f64 {
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            for j in i..self.n {
                let a = self.packed[k].abs();
                s += if i == j { a } else { 2.0 * a };
                k += 1;
            }
        }
        s
    }

    /// Largest absolute eigenvalue.
    pub fn norm_spec(&self) -> f64 {
        let (values, _, _) = jacobi(self);
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Smallest eigenvalue (Jacobi, best effort).
    pub fn min_eigenvalue(&self) -> f64 {
        let (values, _, _) = jacobi(self);
        values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// PSD test with the `-1e-10 · ‖A‖_F` eigenvalue allowance.
    pub fn is_psd(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.min_eigenvalue() >= -PSD_REL_TOL * self.norm_fro()
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        cholesky(self)
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        self.scale(c)
    }
}

/// Serialized form: explicit `n` plus full row-major rows.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseRepr {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl From<SymMatrix> for DenseRepr {
    fn from(m: SymMatrix) -> Self {
        DenseRepr {
            n: m.n,
            rows: m.to_rows(),
        }
    }
}

impl TryFrom<DenseRepr> for SymMatrix {
    type Error = Error;
    fn try_from(r: DenseRepr) -> Result<Self> {
        if r.rows.len() != r.n {
            return Err(Error::ShapeMismatch(format!(
                "n = {} but {} rows",
                r.n,
                r.rows.len()
            )));
        }
        SymMatrix::from_rows(&r.rows)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cholesky factorization `A = L Lᵀ`, kept internally as `A = U D Uᵀ` with
/// unit lower `U` so that inverses of diagonal matrices come out exact.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Row-major unit lower factor.
    u: Vec<f64>,
    d: Vec<f64>,
    /// Row-major `L = U √D`, upper part zero.
    l: Vec<f64>,
}

impl Cholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Row-major dense factor `L`.
    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    pub fn logdet(&self) -> f64 {
        self.d.iter().map(|v| v.ln()).sum()
    }

    /// `L x`.
    pub fn lower_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..=i).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let u = |i: usize, j: usize| self.u[i * n + j];
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= u(i, k) * y[k];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= u(k, i) * y[k];
            }
        }
        y
    }

    /// `A⁻¹ = U⁻ᵀ D⁻¹ U⁻¹`.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        // Column-by-column inverse of the unit lower factor.
        let mut uinv = vec![0.0; n * n];
        for c in 0..n {
            uinv[c * n + c] = 1.0;
            for i in (c + 1)..n {
                let mut s = 0.0;
                for k in c..i {
                    s -= self.u[i * n + k] * uinv[k * n + c];
                }
                uinv[i * n + c] = s;
            }
        }
        SymMatrix::from_fn(n, |i, j| {
            let start = i.max(j);
            (start..n)
                .map(|k| uinv[k * n + i] * uinv[k * n + j] / self.d[k])
                .sum()
        })
    }
}

/// Cholesky factorization; any non-positive pivot means `A` is not positive definite.
pub fn cholesky(a: &SymMatrix) -> Result<Cholesky> {
    let n = a.n();
    let mut u = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= u[j * n + k] * u[j * n + k] * d[k];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        d[j] = pivot;
        u[j * n + j] = 1.0;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= u[i * n + k] * u[j * n + k] * d[k];
            }
            u[i * n + j] = s / pivot;
        }
    }
    let roots: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = u[i * n + j] * roots[j];
        }
    }
    Ok(Cholesky { n, u, d, l })
}

pub fn logdet_pd(a: &SymMatrix) -> Result<f64> {
    Ok(cholesky(a)?.logdet())
}

pub fn inverse_pd(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(cholesky(a)?.inverse())
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    /// Row-major `n × n`; column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<f64>,
}

impl EigDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.vectors[i * n + k]).collect()
    }

    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_spectral(&self.values, &self.vectors)
    }
}

/// Cyclic Jacobi. Returns (values, vectors, converged) without sorting.
fn jacobi(a: &SymMatrix) -> (Vec<f64>, Vec<f64>, bool) {
    let n = a.n();
    let mut m = a.to_dense();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.norm_fro();
    let mut converged = scale == 0.0 || n < 2;
    if !converged {
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[i * n + j] * m[i * n + j])
                .sum::<f64>()
                .sqrt();
            if off < JACOBI_REL_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                        m[k * n + p] = c * mkp - s * mkq;
                        m[k * n + q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                        m[p * n + k] = c * mpk - s * mqk;
                        m[q * n + k] = s * mpk + c * mqk;
                    }
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    for k in 0..n {
                        let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    (values, v, converged)
}

/// Eigendecomposition by cyclic Jacobi rotations.
///
/// Values are sorted descending. Each eigenvector is signed so that its
/// largest-magnitude component (first one on ties) is positive.
pub fn eigh(a: &SymMatrix) -> Result<EigDecomposition> {
    let n = a.n();
    let (raw_values, raw_vectors, converged) = jacobi(a);
    if !converged {
        return Err(Error::NoConvergence {
            what: "jacobi eigensolver",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| raw_values[y].total_cmp(&raw_values[x]));
    let values: Vec<f64> = order.iter().map(|&k| raw_values[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        let mut best = 0;
        for i in 0..n {
            if raw_vectors[i * n + src].abs() > raw_vectors[best * n + src].abs() {
                best = i;
            }
        }
        let sign = if raw_vectors[best * n + src] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[i * n + dst] = sign * raw_vectors[i * n + src];
        }
    }
    Ok(EigDecomposition { values, vectors })
}

/// Symmetric PSD square root `Q Λ^{1/2} Qᵀ`.
pub fn sqrt_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigh(a)?;
    let tol = PSD_REL_TOL * a.norm_fro();
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(SymMatrix::from_spectral(&roots, &eig.vectors))
}

/// Row-major dense product of two `n × n` matrices.
pub fn mat_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `None` when a pivot falls below
/// `rel_tol` times the largest absolute entry.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))?;
        if m[piv * n + col].abs() <= rel_tol * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for k in (r + 1)..n {
            s -= m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

/// Minimum-norm least-squares solution `A⁺ b` for symmetric `A`, discarding
/// eigenvalues below `rel_tol · max|λ|`.
pub fn pinv_solve_sym(a: &SymMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let eig = eigh(a)?;
    let n = a.n();
    let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    for k in 0..n {
        let lam = eig.values[k];
        if lam.abs() <= rel_tol * top || lam == 0.0 {
            continue;
        }
        let vk = eig.vector(k);
        let coef = dot(&vk, b) / lam;
        for i in 0..n {
            x[i] += coef * vk[i];
        }
    }
    Ok(x)
}
