//! Kantorovich and order-2 Fortet–Mourier distances between empirical measures.

pub mod assignment;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist2, norm2, sqrt_psd, SymMatrix};

/// What a single atom is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Scalar,
    Vector(usize),
    /// Symmetric `n × n` matrix stored densely as n² coordinates.
    Matrix(usize),
    /// A pair `(μ, Σ)` stored as `n + n²` coordinates.
    MeanCov(usize),
}

impl AtomKind {
    /// Coordinates per atom.
    pub fn width(&self) -> usize {
        match *self {
            AtomKind::Scalar => 1,
            AtomKind::Vector(n) => n,
            AtomKind::Matrix(n) => n * n,
            AtomKind::MeanCov(n) => n + n * n,
        }
    }
}

/// Equal-weight atoms of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    kind: AtomKind,
    coords: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(kind: AtomKind, coords: Vec<f64>) -> Result<Self> {
        let w = kind.width();
        if w == 0 || coords.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        if coords.len() % w != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates do not split into atoms of width {w}",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("empirical measure"));
        }
        Ok(Self { kind, coords })
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(AtomKind::Scalar, xs.to_vec())
    }

    pub fn from_vectors(xs: &[Vec<f64>]) -> Result<Self> {
        let n = xs.first().map(Vec::len).ok_or(Error::Empty("empirical measure"))?;
        if xs.iter().any(|x| x.len() != n) {
            return Err(Error::KindMismatch("vectors of different lengths".into()));
        }
        Self::new(AtomKind::Vector(n), xs.concat())
    }

    pub fn from_matrices(ms: &[SymMatrix]) -> Result<Self> {
        let n = ms.first().map(SymMatrix::n).ok_or(Error::Empty("empirical measure"))?;
        if ms.iter().any(|m| m.n() != n) {
            return Err(Error::KindMismatch("matrices of different orders".into()));
        }
        Self::new(AtomKind::Matrix(n), ms.iter().flat_map(SymMatrix::to_dense).collect())
    }

    pub fn from_mean_cov(pairs: &[(Vec<f64>, SymMatrix)]) -> Result<Self> {
        let n = pairs.first().map(|p| p.0.len()).ok_or(Error::Empty("empirical measure"))?;
        if pairs.iter().any(|(m, s)| m.len() != n || s.n() != n) {
            return Err(Error::KindMismatch("mean/covariance pairs of different orders".into()));
        }
        let mut coords = Vec::with_capacity(pairs.len() * (n + n * n));
        for (m, s) in pairs {
            coords.extend_from_slice(m);
            coords.extend(s.to_dense());
        }
        Self::new(AtomKind::MeanCov(n), coords)
    }

    pub fn kind(&self) -> AtomKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.kind.width()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let w = self.kind.width();
        &self.coords[i * w..(i + 1) * w]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.kind.width())
    }

    /// The measure of coordinate `k` alone, as scalar atoms.
    pub fn coordinate(&self, k: usize) -> Self {
        Self {
            kind: AtomKind::Scalar,
            coords: self.atoms().map(|a| a[k]).collect(),
        }
    }

    /// Atoms picked by index, repeats allowed.
    pub fn resample(&self, idx: &[usize]) -> Self {
        Self {
            kind: self.kind,
            coords: idx.iter().flat_map(|&i| self.atom(i).iter().copied()).collect(),
        }
    }
}

/// Ground cost between atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMetric {
    Euclidean,
    /// Same as euclidean on the dense coordinates; only accepted for matrix atoms.
    Frobenius,
    /// `max{1, ‖x‖, ‖y‖}·‖x − y‖`. A cost, not a metric.
    WeightedFm2,
    /// `‖μ − μ'‖ + ‖Σ − Σ'‖_F` on `(μ, Σ)` atoms.
    MeanCovSum,
}

impl GroundMetric {
    pub fn cost(&self, kind: AtomKind, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GroundMetric::Euclidean | GroundMetric::Frobenius => dist2(x, y),
            GroundMetric::WeightedFm2 => 1f64.max(norm2(x)).max(norm2(y)) * dist2(x, y),
            GroundMetric::MeanCovSum => {
                let n = match kind {
                    AtomKind::MeanCov(n) => n,
                    _ => unreachable!("checked by compatible()"),
                };
                dist2(&x[..n], &y[..n]) + dist2(&x[n..], &y[n..])
            }
        }
    }

    fn compatible(&self, kind: AtomKind) -> Result<()> {
        match (self, kind) {
            (GroundMetric::Frobenius, AtomKind::Matrix(_)) => Ok(()),
            (GroundMetric::Frobenius, k) => Err(Error::KindMismatch(format!(
                "frobenius metric needs matrix atoms, got {k:?}"
            ))),
            (GroundMetric::MeanCovSum, AtomKind::MeanCov(_)) => Ok(()),
            (GroundMetric::MeanCovSum, k) => Err(Error::KindMismatch(format!(
                "mean/covariance metric needs paired atoms, got {k:?}"
            ))),
            _ => Ok(()),
        }
    }
}

fn same_kind(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.kind != b.kind {
        return Err(Error::KindMismatch(format!("{:?} vs {:?}", a.kind, b.kind)));
    }
    Ok(())
}

fn same_size(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Exact W1 for scalar measures via sorted order statistics.
pub fn w1_sorted_1d(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.kind != AtomKind::Scalar || b.kind != AtomKind::Scalar {
        return Err(Error::KindMismatch("w1_sorted_1d needs scalar atoms".into()));
    }
    same_size(a, b)?;
    let mut x = a.coords.clone();
    let mut y = b.coords.clone();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let total: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
    Ok(total / x.len() as f64)
}

/// Dense `M × M` cost matrix, rows built in parallel.
pub fn cost_matrix(a: &EmpiricalMeasure, b: &EmpiricalMeasure, g: GroundMetric) -> Vec<f64> {
    let m = b.len();
    let kind = a.kind;
    let mut out = vec![0.0; a.len() * m];
    out.par_chunks_mut(m.max(1)).enumerate().for_each(|(i, row)| {
        let x = a.atom(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = g.cost(kind, x, b.atom(j));
        }
    });
    out
}

/// Optimal transport cost between equal-size empirical measures under `g`.
pub fn w1_assignment(a: &EmpiricalMeasure, b: &EmpiricalMeasure, g: GroundMetric) -> Result<f64> {
    same_kind(a, b)?;
    same_size(a, b)?;
    g.compatible(a.kind)?;
    let m = a.len();
    let cost = cost_matrix(a, b, g);
    let (total, _) = assignment::solve(m, &cost);
    Ok((total / m as f64).max(0.0))
}

/// Transport upper bound on the order-2 Fortet–Mourier distance.
pub fn fm2_upper(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    w1_assignment(a, b, GroundMetric::WeightedFm2)
}

/// Lower bound on `d_order` from a fixed dictionary of admissible test functions.
///
/// Order 1 uses coordinates, the norm and `min(‖x‖², ‖x‖)/2`.
/// Order 2 adds cross products `xᵢxⱼ`, halved squares `xᵢ²/2` and `‖x‖²/2`.
pub fn fm_lower_dictionary(a: &EmpiricalMeasure, b: &EmpiricalMeasure, order: u8) -> Result<f64> {
    same_kind(a, b)?;
    if order != 1 && order != 2 {
        return Err(Error::InvalidProblem(format!("order must be 1 or 2, got {order}")));
    }
    let w = a.kind.width();
    let mean_of = |m: &EmpiricalMeasure, f: &dyn Fn(&[f64]) -> f64| -> f64 {
        m.atoms().map(f).sum::<f64>() / m.len() as f64
    };
    let mut best = 0.0f64;
    let mut test = |f: &dyn Fn(&[f64]) -> f64| {
        best = best.max((mean_of(a, f) - mean_of(b, f)).abs());
    };
    for i in 0..w {
        test(&|x| x[i]);
    }
    test(&|x| norm2(x));
    test(&|x| {
        let r = norm2(x);
        0.5 * (r * r).min(r)
    });
    if order == 2 {
        for i in 0..w {
            test(&|x| 0.5 * x[i] * x[i]);
            for j in (i + 1)..w {
                test(&|x| x[i] * x[j]);
            }
        }
        test(&|x| 0.5 * crate::linalg::dot(x, x));
    }
    Ok(best)
}

/// `(1/(|xs||ys|)) Σ_x Σ_y max{1,‖x‖,‖y‖}·‖x − y‖`.
pub fn dbar2_mc(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    let ny: Vec<f64> = ys.iter().map(|y| norm2(y)).collect();
    let total: f64 = xs
        .par_iter()
        .map(|x| {
            let nx = norm2(x);
            ys.iter()
                .zip(&ny)
                .map(|(y, &nyv)| 1f64.max(nx).max(nyv) * dist2(x, y))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / (xs.len() * ys.len()) as f64)
}

/// Closed-form quadratic Wasserstein distance between Gaussians
/// `√(‖μ₁−μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁^{½} Σ₂ Σ₁^{½})^{½}))`.
pub fn gaussian_w2(mu1: &[f64], s1: &SymMatrix, mu2: &[f64], s2: &SymMatrix) -> Result<f64> {
    let n = mu1.len();
    if mu2.len() != n || s1.n() != n || s2.n() != n {
        return Err(Error::ShapeMismatch("gaussian parameters of different orders".into()));
    }
    let r = sqrt_psd(s1)?;
    let (rd, sd) = (r.to_dense(), s2.to_dense());
    let prod = crate::linalg::mat_mul(n, &crate::linalg::mat_mul(n, &rd, &sd), &rd);
    let middle = SymMatrix::from_fn(n, |i, j| 0.5 * (prod[i * n + j] + prod[j * n + i]));
    let cross = sqrt_psd(&middle)?;
    let mean_part: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let val = mean_part + s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok(val.max(0.0).sqrt())
}
