//! Long-only minimum-variance portfolio at a target return:
//! `v(μ, Σ) = min ½wᵀΣw  s.t.  wᵀμ = z, wᵀ1 = 1, w ≥ 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, pinv_solve_sym, solve_dense, SymMatrix, PSD_REL_TOL};
use crate::Inequality;

/// Largest dimension accepted by the exact enumeration.
pub const MAX_ASSETS: usize = 20;
const PRIMAL_TOL: f64 = 1e-12;
const DUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    mu: Vec<f64>,
    sigma: SymMatrix,
    z: f64,
}

impl PortfolioProblem {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix, z: f64) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::Empty("mean vector"));
        }
        if sigma.n() != n {
            return Err(Error::ShapeMismatch(format!(
                "mean has {n} entries but covariance is {0}x{0}",
                sigma.n()
            )));
        }
        if n > MAX_ASSETS {
            return Err(Error::DimensionTooLarge { n, max: MAX_ASSETS });
        }
        if mu.iter().any(|v| !v.is_finite()) || !z.is_finite() {
            return Err(Error::NonFinite("mean vector or target"));
        }
        if !sigma.is_finite() {
            return Err(Error::NonFinite("covariance matrix"));
        }
        let min = sigma.min_eigenvalue();
        if min < -PSD_REL_TOL * sigma.norm_fro() {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let (lo, hi) = feasible_interval(&mu);
        if z < lo || z > hi {
            return Err(Error::Infeasible { z, lo, hi });
        }
        Ok(Self { mu, sigma, z })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

/// `[min μ, max μ]`, the targets for which the constraint set is nonempty.
pub fn feasible_interval(mu: &[f64]) -> (f64, f64) {
    mu.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub lambda1: f64,
    pub lambda2: f64,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    pub w: Vec<f64>,
    pub value: f64,
    pub duals: Duals,
    /// Indices held at zero.
    pub active_set: Vec<usize>,
    /// Free sets whose reduced KKT system had no consistent solution.
    pub skipped_subsets: usize,
}

impl PortfolioSolution {
    /// `½wᵀΣw + λ₁(wᵀμ − z) + λ₂(wᵀ1 − 1) − sᵀw`.
    pub fn lagrangian(&self, p: &PortfolioProblem) -> f64 {
        let d = &self.duals;
        0.5 * p.sigma.quad_form(&self.w)
            + d.lambda1 * (dot(&self.w, &p.mu) - p.z)
            + d.lambda2 * (self.w.iter().sum::<f64>() - 1.0)
            - dot(&d.s, &self.w)
    }

    /// `‖Σw + λ₁μ + λ₂1 − s‖`.
    pub fn stationarity(&self, p: &PortfolioProblem) -> f64 {
        let sw = p.sigma.matvec(&self.w);
        let r: Vec<f64> = (0..p.n())
            .map(|i| sw[i] + self.duals.lambda1 * p.mu[i] + self.duals.lambda2 - self.duals.s[i])
            .collect();
        norm2(&r)
    }
}

enum Candidate {
    Accepted(PortfolioSolution),
    Rejected,
    Singular,
}

fn try_free_set(p: &PortfolioProblem, mask: u32) -> Candidate {
    let n = p.n();
    let free: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
    let k = free.len();
    let dim = k + 2;
    let mut kkt = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[a * dim + b] = p.sigma.get(i, j);
        }
        kkt[a * dim + k] = p.mu[i];
        kkt[k * dim + a] = p.mu[i];
        kkt[a * dim + k + 1] = 1.0;
        kkt[(k + 1) * dim + a] = 1.0;
    }
    rhs[k] = p.z;
    rhs[k + 1] = 1.0;

    let solution = match solve_dense(dim, &kkt, &rhs, 1e-13) {
        Some(x) => x,
        None => {
            let sym = SymMatrix::from_fn(dim, |a, b| kkt[a * dim + b]);
            let Ok(x) = pinv_solve_sym(&sym, &rhs, 1e-12) else {
                return Candidate::Singular;
            };
            let scale = 1.0 + kkt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let residual = (0..dim)
                .map(|a| (dot(&kkt[a * dim..(a + 1) * dim], &x) - rhs[a]).abs())
                .fold(0.0f64, f64::max);
            if residual > 1e-9 * scale * (1.0 + norm2(&x)) {
                return Candidate::Singular;
            }
            x
        }
    };

    let mut w = vec![0.0; n];
    for (a, &i) in free.iter().enumerate() {
        w[i] = solution[a];
    }
    if w.iter().any(|&x| x < -PRIMAL_TOL) {
        return Candidate::Rejected;
    }
    let sw = p.sigma.matvec(&w);
    let Some((lambda1, lambda2)) = recover_duals(p, &free, &sw) else {
        return Candidate::Rejected;
    };
    let s: Vec<f64> = (0..n)
        .map(|i| {
            if mask & (1 << i) != 0 {
                0.0
            } else {
                sw[i] + lambda1 * p.mu[i] + lambda2
            }
        })
        .collect();
    let dual_scale = 1.0 + sw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s.iter().any(|&x| x < -DUAL_TOL * dual_scale) {
        return Candidate::Rejected;
    }
    let w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
    let s: Vec<f64> = s.into_iter().map(|x| x.max(0.0)).collect();
    Candidate::Accepted(PortfolioSolution {
        value: 0.5 * p.sigma.quad_form(&w),
        w,
        duals: Duals {
            lambda1,
            lambda2,
            s,
        },
        active_set: (0..n).filter(|&i| mask & (1 << i) == 0).collect(),
        skipped_subsets: 0,
    })
}

/// Multipliers with `(Σw)_F + λ₁μ_F + λ₂1 = 0` and `s_Z ≥ 0`.
///
/// When `μ_F` is constant only `λ₁μ̄ + λ₂` is pinned down; the remaining
/// freedom is spent on dual feasibility, picking the smallest `|λ₁|`.
fn recover_duals(p: &PortfolioProblem, free: &[usize], sw: &[f64]) -> Option<(f64, f64)> {
    let k = free.len() as f64;
    let mu_f: Vec<f64> = free.iter().map(|&i| p.mu[i]).collect();
    let r_f: Vec<f64> = free.iter().map(|&i| sw[i]).collect();
    let mbar = mu_f.iter().sum::<f64>() / k;
    let rbar = r_f.iter().sum::<f64>() / k;
    let spread: f64 = mu_f.iter().map(|m| (m - mbar) * (m - mbar)).sum();
    let mu_scale = 1.0 + p.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r_scale = 1.0 + sw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread.sqrt() > 1e-12 * mu_scale {
        // Least squares on [μ_F 1][λ₁ λ₂]ᵀ = −r_F.
        let cov: f64 = mu_f
            .iter()
            .zip(&r_f)
            .map(|(m, r)| (m - mbar) * (r - rbar))
            .sum();
        let lambda1 = -cov / spread;
        let lambda2 = -rbar - lambda1 * mbar;
        let resid = mu_f
            .iter()
            .zip(&r_f)
            .map(|(m, r)| (r + lambda1 * m + lambda2).abs())
            .fold(0.0f64, f64::max);
        return (resid <= 1e-8 * r_scale * (1.0 + lambda1.abs())).then_some((lambda1, lambda2));
    }
    if r_f.iter().any(|r| (r - rbar).abs() > 1e-9 * r_scale) {
        return None;
    }
    // s_j = r_j − r̄ + λ₁(μ_j − μ̄) ≥ 0 on the zero set.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in (0..p.n()).filter(|j| !free.contains(j)) {
        let a = p.mu[j] - mbar;
        let b = sw[j] - rbar;
        if a.abs() <= 1e-15 * mu_scale {
            if b < -DUAL_TOL * r_scale {
                return None;
            }
        } else if a > 0.0 {
            lo = lo.max(-b / a);
        } else {
            hi = hi.min(-b / a);
        }
    }
    if lo > hi + 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        return None;
    }
    let lambda1 = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        hi
    } else {
        0.0
    };
    Some((lambda1, -rbar - lambda1 * mbar))
}

/// Exact solve by enumerating every free set.
///
/// Among certified KKT points the smallest value wins; ties go to the
/// lexicographically smallest active set.
pub fn solve_markowitz(p: &PortfolioProblem) -> Result<PortfolioSolution> {
    let n = p.n();
    let masks: Vec<u32> = (1u32..(1u32 << n)).collect();
    let eval = |&mask: &u32| try_free_set(p, mask);
    let results: Vec<Candidate> = if n >= 10 {
        masks.par_iter().map(eval).collect()
    } else {
        masks.iter().map(eval).collect()
    };
    let mut skipped = 0;
    let mut best: Option<PortfolioSolution> = None;
    for c in results {
        match c {
            Candidate::Singular => skipped += 1,
            Candidate::Rejected => {}
            Candidate::Accepted(sol) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let tie = 1e-12 * (1.0 + b.value.abs());
                        sol.value < b.value - tie
                            || ((sol.value - b.value).abs() <= tie && sol.active_set < b.active_set)
                    }
                };
                if better {
                    best = Some(sol);
                }
            }
        }
    }
    let mut sol = best.ok_or(Error::NoConvergence {
        what: "active-set enumeration found no KKT point",
        iterations: masks.len(),
    })?;
    sol.skipped_subsets = skipped;
    Ok(sol)
}

pub fn value_v(mu: &[f64], sigma: &SymMatrix, z: f64) -> Result<f64> {
    Ok(solve_markowitz(&PortfolioProblem::new(mu.to_vec(), sigma.clone(), z)?)?.value)
}

fn check_constants(c1: f64, c2: f64) -> Result<()> {
    if !(c1 > 0.0 && c1 < c2 && c2.is_finite()) {
        return Err(Error::InvalidConstants(format!(
            "need 0 < C1 < C2, got C1 = {c1}, C2 = {c2}"
        )));
    }
    Ok(())
}

/// `1/2 + 32C₂²/(9C₁²)(z + C₂/√n) + 16C₂²/(9√n C₁²)`.
pub fn lipschitz_const_l(c1: f64, c2: f64, n: usize, z: f64) -> Result<f64> {
    check_constants(c1, c2)?;
    if n == 0 || !(z >= 0.0) {
        return Err(Error::InvalidConstants(format!("need n ≥ 1 and z ≥ 0, got n = {n}, z = {z}")));
    }
    let rn = (n as f64).sqrt();
    let ratio = c2 * c2 / (c1 * c1);
    Ok(0.5 + 32.0 * ratio / 9.0 * (z + c2 / rn) + 16.0 * ratio / (9.0 * rn))
}

/// `(C₁² + ⟨x,1⟩²/n)^{1/2} ≤ ‖x‖ ≤ C₂`.
pub fn membership_admissible(x: &[f64], c1: f64, c2: f64) -> Result<bool> {
    check_constants(c1, c2)?;
    let n = x.len() as f64;
    let s: f64 = x.iter().sum();
    let norm = norm2(x);
    Ok((c1 * c1 + s * s / n).sqrt() <= norm && norm <= c2)
}

/// `|λ₁*|` against `16‖Σ‖₂/(9D)(z + ‖μ‖/√n) + 8‖Σ‖₂/(9√n D)` with `D = ‖μ‖² − (μᵀ1)²/n`.
pub fn dual_bound_check(p: &PortfolioProblem) -> Result<Inequality> {
    let n = p.n() as f64;
    let norm_mu = norm2(&p.mu);
    let sum: f64 = p.mu.iter().sum();
    let denom = norm_mu * norm_mu - sum * sum / n;
    if denom <= 1e-14 * norm_mu * norm_mu || norm_mu == 0.0 {
        return Err(Error::DegenerateMu);
    }
    let spec = p.sigma.norm_spec();
    if spec == 0.0 {
        return Err(Error::ZeroSigma);
    }
    let sol = solve_markowitz(p)?;
    let rn = n.sqrt();
    let bound = 16.0 * spec / (9.0 * denom) * (p.z + norm_mu / rn) + 8.0 * spec / (9.0 * rn * denom);
    Ok(Inequality::new(sol.duals.lambda1.abs(), bound))
}
