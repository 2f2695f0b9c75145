//! Sample statistics and their perturbation inequalities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist2, dot, eigh, norm2, SymMatrix};
use crate::Inequality;

/// `N` observations in ℝⁿ, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        if data.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample set"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("sample set"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Every row shifted by `v`.
    pub fn shifted(&self, v: &[f64]) -> Self {
        assert_eq!(v.len(), self.dim);
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, x)| x + v[k % self.dim])
            .collect();
        Self {
            dim: self.dim,
            data,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

pub fn sample_mean(s: &SampleSet) -> Vec<f64> {
    let n = s.dim();
    let mut m = vec![0.0; n];
    for r in s.rows() {
        for (acc, x) in m.iter_mut().zip(r) {
            *acc += x;
        }
    }
    let inv = 1.0 / s.len() as f64;
    m.iter_mut().for_each(|v| *v *= inv);
    m
}

/// `(1/N) Σ (xⁱ − x̄)(xⁱ − x̄)ᵀ`, divisor `N`.
pub fn sample_cov_centered(s: &SampleSet) -> SymMatrix {
    let mean = sample_mean(s);
    second_moment(s, Some(&mean))
}

/// `(1/N) Σ xⁱ xⁱᵀ`.
pub fn sample_cov_uncentered(s: &SampleSet) -> SymMatrix {
    second_moment(s, None)
}

pub fn sample_cov(s: &SampleSet, centered: bool) -> SymMatrix {
    if centered {
        sample_cov_centered(s)
    } else {
        sample_cov_uncentered(s)
    }
}

fn second_moment(s: &SampleSet, center: Option<&[f64]>) -> SymMatrix {
    let n = s.dim();
    let mut acc = vec![0.0; n * (n + 1) / 2];
    let mut y = vec![0.0; n];
    for r in s.rows() {
        match center {
            Some(c) => y.iter_mut().zip(r.iter().zip(c)).for_each(|(y, (x, m))| *y = x - m),
            None => y.copy_from_slice(r),
        }
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                acc[k] += y[i] * y[j];
                k += 1;
            }
        }
    }
    let inv = 1.0 / s.len() as f64;
    let mut it = acc.into_iter();
    SymMatrix::from_fn(n, |_, _| it.next().unwrap() * inv)
}

/// Eigenvalues (descending) of the centered or uncentered sample covariance.
pub fn sample_eigvals(s: &SampleSet, centered: bool) -> Result<Vec<f64>> {
    Ok(eigh(&sample_cov(s, centered))?.values)
}

fn same_shape(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "sample sets are {}x{} and {}x{}",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    Ok(())
}

/// Data-Lipschitz bound for the centered sample covariance.
///
/// `lhs = ‖Σ̂(a) − Σ̂(b)‖_F`,
/// `rhs = (2/N) Σ L₂ᵢ ‖aⁱ − bⁱ‖ + (1/N²) Σ (‖aⁱ‖ + ‖bⁱ‖) · Σ ‖aⁱ − bⁱ‖`
/// with `L₂ᵢ = max{1, ‖aⁱ‖, ‖bⁱ‖}`.
pub fn cov_data_lipschitz_check(a: &SampleSet, b: &SampleSet) -> Result<Inequality> {
    same_shape(a, b)?;
    let big_n = a.len() as f64;
    let lhs = (&sample_cov_centered(a) - &sample_cov_centered(b)).norm_fro();
    let (mut weighted, mut norms, mut diffs) = (0.0, 0.0, 0.0);
    for (x, y) in a.rows().zip(b.rows()) {
        let (nx, ny, d) = (norm2(x), norm2(y), dist2(x, y));
        weighted += 1f64.max(nx).max(ny) * d;
        norms += nx + ny;
        diffs += d;
    }
    let rhs = 2.0 / big_n * weighted + norms * diffs / (big_n * big_n);
    Ok(Inequality::new(lhs, rhs))
}

fn same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch(format!(
            "matrices of order {} and {}",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

/// `lhs = maxᵢ |λᵢ(A) − λᵢ(B)|` (both sorted descending), `rhs = ‖A − B‖_F`.
pub fn eig_perturbation_check(a: &SymMatrix, b: &SymMatrix) -> Result<Inequality> {
    same_dim(a, b)?;
    let (ea, eb) = (eigh(a)?, eigh(b)?);
    let maxdev = ea
        .values
        .iter()
        .zip(&eb.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(Inequality::new(maxdev, (a - b).norm_fro()))
}

/// Outcome of the eigenvector perturbation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DavisKahan {
    pub dev: f64,
    pub bound: f64,
    pub applicable: bool,
}

/// Minimum separation of eigenvalue `i` from its neighbours for the check to apply.
pub const GAP_THRESHOLD: f64 = 1e-8;

/// Eigenvector deviation `‖v_A − v_B‖` for the `i`-th (0-based, descending) eigenpair,
/// against `2^{3/2} ‖A − B‖₂ / min(λ_{i−1} − λ_i, λ_i − λ_{i+1})` computed on `A`.
pub fn eigvec_davis_kahan_check(a: &SymMatrix, b: &SymMatrix, i: usize) -> Result<DavisKahan> {
    same_dim(a, b)?;
    let n = a.n();
    if i >= n {
        return Err(Error::ShapeMismatch(format!(
            "eigen-index {i} out of range for order {n}"
        )));
    }
    let (ea, eb) = (eigh(a)?, eigh(b)?);
    let v = &ea.values;
    let above = if i == 0 { f64::INFINITY } else { v[i - 1] - v[i] };
    let below = if i + 1 == n { f64::INFINITY } else { v[i] - v[i + 1] };
    let gap = above.min(below);
    if gap <= GAP_THRESHOLD {
        return Ok(DavisKahan {
            dev: f64::NAN,
            bound: f64::INFINITY,
            applicable: false,
        });
    }
    let va = ea.vector(i);
    let mut vb = eb.vector(i);
    if dot(&va, &vb) < 0.0 {
        vb.iter_mut().for_each(|x| *x = -*x);
    }
    let dev = dist2(&va, &vb);
    let bound = if gap.is_infinite() {
        0.0
    } else {
        2f64.powf(1.5) * (a - b).norm_spec() / gap
    };
    Ok(DavisKahan {
        dev,
        bound,
        applicable: true,
    })
}

/// `values[0] − values[1]` for a descending eigenvalue vector.
pub fn spectral_gap(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    Ok(values[0] - values[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]]) -> SampleSet {
        SampleSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(sample_mean(&set(&[&[1.0, 0.0], &[-1.0, 0.0]])), vec![0.0, 0.0]);
        assert_eq!(sample_mean(&set(&[&[2.0, 2.0]])), vec![2.0, 2.0]);
        assert_eq!(sample_mean(&set(&[&[1.0, 1.0], &[3.0, 5.0]])), vec![2.0, 3.0]);
    }

    #[test]
    fn centered_covariance_examples() {
        let c = sample_cov_centered(&set(&[&[1.0, 0.0], &[-1.0, 0.0]]));
        assert_eq!(c, SymMatrix::from_diag(&[1.0, 0.0]));
        let c = sample_cov_centered(&set(&[&[3.0, -7.0]]));
        assert_eq!(c, SymMatrix::zeros(2));
        let c = sample_cov_centered(&set(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]]));
        assert_eq!(c, SymMatrix::identity(2));
    }

    #[test]
    fn uncentered_covariance_examples() {
        let c = sample_cov_uncentered(&set(&[&[1.0, 0.0], &[-1.0, 0.0]]));
        assert_eq!(c, SymMatrix::from_diag(&[1.0, 0.0]));
        let c = sample_cov_uncentered(&set(&[&[1.0, 1.0]]));
        assert_eq!(c, SymMatrix::from_fn(2, |_, _| 1.0));
        let c = sample_cov_uncentered(&set(&[&[0.0, 0.0], &[0.0, 0.0]]));
        assert_eq!(c, SymMatrix::zeros(2));
    }

    #[test]
    fn eigenvalue_examples() {
        let s = set(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert_eq!(sample_eigvals(&s, true).unwrap(), vec![1.0, 0.0]);
        assert_eq!(spectral_gap(&sample_eigvals(&s, true).unwrap()).unwrap(), 1.0);

        let s = set(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let base = sample_eigvals(&s, true).unwrap();
        let scaled = sample_eigvals(&s.scaled(3.0), true).unwrap();
        for (x, y) in base.iter().zip(&scaled) {
            assert!((9.0 * x - y).abs() < 1e-12);
        }
        let direct = eigh(&sample_cov_centered(&s)).unwrap().values;
        assert_eq!(base, direct);
    }

    #[test]
    fn lipschitz_hand_case() {
        let a = set(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let b = set(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let r = cov_data_lipschitz_check(&a, &b).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.rhs - 3.0).abs() < 1e-15);
        let same = cov_data_lipschitz_check(&a, &a).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
        assert!(cov_data_lipschitz_check(&a, &set(&[&[1.0, 0.0]])).is_err());
    }

    #[test]
    fn eig_perturbation_examples() {
        let a = SymMatrix::from_diag(&[3.0, 1.0]);
        let r = eig_perturbation_check(&a, &a).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let r = eig_perturbation_check(&a, &SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - 8f64.sqrt()).abs() < 1e-15);
        let i = SymMatrix::identity(3);
        let r = eig_perturbation_check(&i, &i.scale(2.0)).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert!((r.rhs - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn davis_kahan_rotation() {
        let a = SymMatrix::from_diag(&[3.0, 1.0]);
        let theta: f64 = 0.05;
        let (c, s) = (theta.cos(), theta.sin());
        // R diag(3,1) Rᵀ
        let b = SymMatrix::from_rows(&[
            vec![3.0 * c * c + s * s, 2.0 * c * s],
            vec![2.0 * c * s, 3.0 * s * s + c * c],
        ])
        .unwrap();
        let r = eigvec_davis_kahan_check(&a, &b, 0).unwrap();
        assert!(r.applicable);
        assert!((r.dev - 2.0 * (theta / 2.0).sin().abs()).abs() < 1e-10);
        assert!(r.dev <= r.bound);

        let same = eigvec_davis_kahan_check(&a, &a, 1).unwrap();
        assert_eq!(same.dev, 0.0);
        let deg = eigvec_davis_kahan_check(&SymMatrix::identity(3), &a, 0);
        assert!(deg.is_err());
        let deg = eigvec_davis_kahan_check(&SymMatrix::identity(2), &a, 0).unwrap();
        assert!(!deg.applicable);
    }

    #[test]
    fn gap_requires_two_values() {
        assert_eq!(spectral_gap(&[3.0, 1.0]).unwrap(), 2.0);
        assert_eq!(spectral_gap(&[5.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(spectral_gap(&[1.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn translation_and_permutation() {
        let s = set(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let shifted = s.shifted(&[10.0, -4.0]);
        let d = (&sample_cov_centered(&s) - &sample_cov_centered(&shifted)).norm_fro();
        assert!(d < 1e-10);
        let d = (&sample_cov_uncentered(&s) - &sample_cov_uncentered(&shifted)).norm_fro();
        assert!(d > 1.0);
        let perm = set(&[&[3.0, 0.0], &[1.0, 2.0], &[0.5, -1.0]]);
        assert!((&sample_cov_centered(&s) - &sample_cov_centered(&perm)).norm_fro() < 1e-15);
    }
}
