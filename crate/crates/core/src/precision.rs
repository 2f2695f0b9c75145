//! ℓ1-penalized log-determinant estimation of a precision matrix.
//!
//! Minimizes `L(λ, Σ, S) = ⟨Σ, S⟩ − log det S + λ‖S‖₁` over positive definite `S`,
//! where `‖S‖₁` sums the absolute values of all n² entries, diagonal included.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, eigh, SymMatrix, PSD_REL_TOL};
use crate::Inequality;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 5000;
/// Entries with `|S_ij|` at or below this are treated as zero in the KKT residual.
pub const ZERO_THRESHOLD: f64 = 1e-10;

/// Problem data `(λ, Σ)` with `λ > 0` and `Σ` PSD.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionProblem {
    lambda: f64,
    sigma: SymMatrix,
}

impl PrecisionProblem {
    pub fn new(lambda: f64, sigma: SymMatrix) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "lambda must be a finite value > 0, got {lambda}"
            )));
        }
        if sigma.n() == 0 {
            return Err(Error::Empty("covariance matrix"));
        }
        if !sigma.is_finite() {
            return Err(Error::NonFinite("covariance matrix"));
        }
        let min = sigma.min_eigenvalue();
        if min < -PSD_REL_TOL * sigma.norm_fro() {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { lambda, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    /// `n / λ`, an upper bound on `‖S*‖₁`.
    pub fn ell1_cap(&self) -> f64 {
        self.n() as f64 / self.lambda
    }

    /// Smallest admissible `κ` for the global Lipschitz bound is anything above this.
    pub fn kappa_threshold(&self) -> f64 {
        self.ell1_cap().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionSolveReport {
    pub s_star: SymMatrix,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// `⟨Σ,S⟩ − log det S` and `S⁻¹`.
fn smooth_part(sigma: &SymMatrix, s: &SymMatrix) -> Result<(f64, SymMatrix)> {
    let chol = cholesky(s)?;
    Ok((sigma.inner(s) - chol.logdet(), chol.inverse()))
}

pub fn objective(p: &PrecisionProblem, s: &SymMatrix) -> Result<f64> {
    let (f, _) = smooth_part(&p.sigma, s)?;
    Ok(f + p.lambda * s.norm_entry1())
}

fn residual_with_gradient(lambda: f64, s: &SymMatrix, g: &SymMatrix) -> f64 {
    let mut r = 0.0f64;
    for (&sij, &gij) in s.packed().iter().zip(g.packed()) {
        let v = if sij.abs() > ZERO_THRESHOLD {
            (gij + lambda * sij.signum()).abs()
        } else {
            (gij.abs() - lambda).max(0.0)
        };
        r = r.max(v);
    }
    r
}

/// Sup-norm distance of zero from `Σ − S⁻¹ + λ∂‖S‖₁`.
pub fn kkt_residual(p: &PrecisionProblem, s: &SymMatrix) -> Result<f64> {
    let inv = cholesky(s)?.inverse();
    Ok(residual_with_gradient(p.lambda, s, &(&p.sigma - &inv)))
}

fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

fn initial_point(p: &PrecisionProblem) -> SymMatrix {
    SymMatrix::from_diag(
        &p.sigma
            .diag()
            .iter()
            .map(|d| 1.0 / (d.max(0.0) + p.lambda))
            .collect::<Vec<_>>(),
    )
}

/// Optimal factor `c` for `S ↦ cS`: `n / (⟨Σ,S⟩ + λ‖S‖₁)`.
fn ray_scale(p: &PrecisionProblem, s: &SymMatrix) -> f64 {
    let denom = p.sigma.inner(s) + p.lambda * s.norm_entry1();
    if denom > 0.0 {
        p.n() as f64 / denom
    } else {
        1.0
    }
}

pub fn solve_default(p: &PrecisionProblem) -> Result<PrecisionSolveReport> {
    solve(p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Proximal gradient with Barzilai–Borwein trial steps and backtracking.
///
/// Every accepted iterate is also rescaled along its ray to the exact
/// one-dimensional minimizer, which keeps `⟨Σ,S⟩ + λ‖S‖₁ = n` and hence
/// `‖S‖₁ ≤ n/λ` at every step.
///
/// Running out of iterations is not an error: the report comes back with
/// `converged = false` and the full trace.
pub fn solve(p: &PrecisionProblem, tol: f64, max_iter: usize) -> Result<PrecisionSolveReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem(format!("tolerance must be > 0, got {tol}")));
    }
    let lambda = p.lambda;
    let mut s = initial_point(p);
    s = s.scale(ray_scale(p, &s));
    let (mut f, inv) = smooth_part(&p.sigma, &s)?;
    let mut g = &p.sigma - &inv;
    let mut t = s.diag().iter().fold(f64::INFINITY, |m, &d| m.min(d * d));
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = residual_with_gradient(lambda, &s, &g);

    loop {
        trace.push(TracePoint {
            objective: f + lambda * s.norm_entry1(),
            residual,
        });
        if residual <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut accepted = None;
        while t > 1e-30 {
            let cand = s.zip_map(&g, |sij, gij| soft_threshold(sij - t * gij, lambda * t));
            if let Ok((fc, invc)) = smooth_part(&p.sigma, &cand) {
                let d = &cand - &s;
                let dd = d.inner(&d);
                let model = f + g.inner(&d) + dd / (2.0 * t);
                // By convexity ⟨∇f(S⁺) − ∇f(S), d⟩ ≤ ‖d‖²/2t implies the
                // decrease condition and stays accurate when f differences
                // fall below round-off.
                let curvature = g.inner(&d) - (&p.sigma - &invc).inner(&d);
                if fc <= model || -curvature <= dd / (2.0 * t) {
                    accepted = Some((cand, fc, invc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc, invc)) = accepted else {
            break;
        };

        let c = ray_scale(p, &cand);
        let next = cand.scale(c);
        let next_inv = invc.scale(1.0 / c);
        let lin = p.sigma.inner(&cand);
        let logdet = lin - fc;
        let next_f = c * lin - logdet - p.n() as f64 * c.ln();
        let next_g = &p.sigma - &next_inv;

        let ds = &next - &s;
        let dg = &next_g - &g;
        let curv = ds.inner(&dg);
        t = if curv > 0.0 { ds.inner(&ds) / curv } else { 2.0 * t };

        s = next;
        f = next_f;
        g = next_g;
        residual = residual_with_gradient(lambda, &s, &g);
    }

    Ok(PrecisionSolveReport {
        objective: f + lambda * s.norm_entry1(),
        kkt_residual: residual,
        s_star: s,
        iterations,
        converged,
        trace,
    })
}

/// `⟨Σ,S⟩ − log det S + λ Σ_ij √(S_ij² + ε)`.
pub fn objective_smoothed(p: &PrecisionProblem, s: &SymMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidProblem(format!("eps must be > 0, got {eps}")));
    }
    let (f, _) = smooth_part(&p.sigma, s)?;
    Ok(f + p.lambda * h_eps(s, eps))
}

fn h_eps(s: &SymMatrix, eps: f64) -> f64 {
    let mut total = 0.0;
    s.for_each_entry(|_, _, v| total += (v * v + eps).sqrt());
    total
}

fn smoothed_gradient(p: &PrecisionProblem, s: &SymMatrix, inv: &SymMatrix, eps: f64) -> SymMatrix {
    let lambda = p.lambda;
    let penalty = s.map(|v| v / (v * v + eps).sqrt());
    SymMatrix::from_fn(p.n(), |i, j| {
        p.sigma.get(i, j) - inv.get(i, j) + lambda * penalty.get(i, j)
    })
}

pub const SMOOTHED_MAX_ITER: usize = 200_000;

/// Gradient descent on the smoothed objective, nonmonotone Armijo line search
/// with Barzilai–Borwein trial steps; stops at `‖∇L_ε‖_F ≤ tol`.
pub fn solve_smoothed(
    p: &PrecisionProblem,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PrecisionSolveReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidProblem(format!("eps must be > 0, got {eps}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem(format!("tolerance must be > 0, got {tol}")));
    }
    let lambda = p.lambda;
    let value = |s: &SymMatrix| -> Result<(f64, SymMatrix)> {
        let (f, inv) = smooth_part(&p.sigma, s)?;
        Ok((f + lambda * h_eps(s, eps), inv))
    };
    let mut s = initial_point(p);
    let (mut fval, inv) = value(&s)?;
    let mut g = smoothed_gradient(p, &s, &inv, eps);
    let mut gnorm = g.norm_fro();
    let mut t = s.diag().iter().fold(f64::INFINITY, |m, &d| m.min(d * d));
    let mut history = vec![fval];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        trace.push(TracePoint {
            objective: fval,
            residual: gnorm,
        });
        if gnorm <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g2 = gnorm * gnorm;
        let mut accepted = None;
        while t > 1e-30 {
            let cand = s.zip_map(&g, |a, b| a - t * b);
            if let Ok((fc, invc)) = value(&cand) {
                if fc <= reference - 1e-4 * t * g2 + 1e-14 * reference.abs().max(1.0) {
                    accepted = Some((cand, fc, invc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, fc, next_inv)) = accepted else {
            break;
        };
        let next_g = smoothed_gradient(p, &next, &next_inv, eps);
        let ds = &next - &s;
        let dg = &next_g - &g;
        let curv = ds.inner(&dg);
        t = if curv > 0.0 { ds.inner(&ds) / curv } else { 2.0 * t };
        s = next;
        fval = fc;
        g = next_g;
        gnorm = g.norm_fro();
        history.push(fval);
        if history.len() > 10 {
            history.remove(0);
        }
    }
    Ok(PrecisionSolveReport {
        objective: fval,
        kkt_residual: gnorm,
        s_star: s,
        iterations,
        converged,
        trace,
    })
}

/// `‖S*(λ,Σ₁) − S*(λ,Σ₂)‖_F` against `κ‖Σ₁ − Σ₂‖_F`; requires `κ > (n/λ)²`.
pub fn lipschitz_check(
    lambda: f64,
    sigma1: &SymMatrix,
    sigma2: &SymMatrix,
    kappa: f64,
) -> Result<Inequality> {
    let p1 = PrecisionProblem::new(lambda, sigma1.clone())?;
    let p2 = PrecisionProblem::new(lambda, sigma2.clone())?;
    if p1.n() != p2.n() {
        return Err(Error::ShapeMismatch(format!(
            "matrices of order {} and {}",
            p1.n(),
            p2.n()
        )));
    }
    let threshold = p1.kappa_threshold();
    if !(kappa > threshold) {
        return Err(Error::KappaTooSmall { kappa, threshold });
    }
    let s1 = converged(solve_default(&p1)?)?;
    let s2 = converged(solve_default(&p2)?)?;
    Ok(Inequality::new(
        (&s1.s_star - &s2.s_star).norm_fro(),
        kappa * (sigma1 - sigma2).norm_fro(),
    ))
}

/// Turns an unconverged report into `NoConvergence`.
pub fn converged(r: PrecisionSolveReport) -> Result<PrecisionSolveReport> {
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NoConvergence {
            what: "proximal gradient",
            iterations: r.iterations,
        })
    }
}

/// Strong monotonicity of `S ↦ −S⁻¹` on `{‖S‖₁ ≤ 1/√ρ}`.
///
/// Returns `lhs = −⟨S₁⁻¹ − S₂⁻¹, S₁ − S₂⟩` and `rhs = ρ‖S₁ − S₂‖_F²`;
/// the contract here is `lhs ≥ rhs`.
pub fn monotonicity_check(s1: &SymMatrix, s2: &SymMatrix, rho: f64) -> Result<Inequality> {
    if !(rho > 0.0) {
        return Err(Error::PreconditionViolated(format!("rho must be > 0, got {rho}")));
    }
    if s1.n() != s2.n() {
        return Err(Error::ShapeMismatch(format!(
            "matrices of order {} and {}",
            s1.n(),
            s2.n()
        )));
    }
    let cap = 1.0 / rho.sqrt();
    for (name, s) in [("S1", s1), ("S2", s2)] {
        let l1 = s.norm_entry1();
        if l1 > cap * (1.0 + 1e-12) {
            return Err(Error::PreconditionViolated(format!(
                "{name} has entrywise 1-norm {l1} > 1/sqrt(rho) = {cap}"
            )));
        }
    }
    let inv1 = cholesky(s1)?.inverse();
    let inv2 = cholesky(s2)?.inverse();
    let ds = s1 - s2;
    let lhs = -(&inv1 - &inv2).inner(&ds);
    Ok(Inequality::new(lhs, rho * ds.inner(&ds)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    /// `min (L(S) − L(S*)) / t²` over samples with `t ≤ 0.1`.
    pub alpha_hat: f64,
    /// `min (L(S) − L(S*)) / t` over samples with `t ≥ 0.5`.
    pub beta_hat: f64,
    pub all_positive: bool,
    /// `½ (λ_max(S*) + 0.1)⁻²`, a guaranteed lower bound on `alpha_hat`.
    pub alpha_floor: f64,
    pub samples_used: usize,
}

/// Samples `L(S* + tD) − L(S*)` along random unit directions `D`, `t` log-spaced in `[1e-3, 1]`.
pub fn growth_probe(p: &PrecisionProblem, n_samples: usize, seed: u64) -> Result<GrowthProbe> {
    let sol = converged(solve_default(p)?)?;
    let base = sol.objective;
    let n = p.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut alpha, mut beta) = (f64::INFINITY, f64::INFINITY);
    let mut all_positive = true;
    let mut used = 0;
    for k in 0..n_samples {
        let frac = if n_samples > 1 {
            k as f64 / (n_samples - 1) as f64
        } else {
            0.0
        };
        let t = 10f64.powf(-3.0 + 3.0 * frac);
        let d = SymMatrix::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let d = d.scale(1.0 / d.norm_fro());
        let cand = sol.s_star.zip_map(&d, |a, b| a + t * b);
        let Ok(val) = objective(p, &cand) else {
            continue;
        };
        used += 1;
        let diff = val - base;
        if diff <= -1e-9 {
            all_positive = false;
        }
        if t <= 0.1 {
            alpha = alpha.min(diff / (t * t));
        }
        if t >= 0.5 {
            beta = beta.min(diff / t);
        }
    }
    let lmax = eigh(&sol.s_star)?.values[0];
    Ok(GrowthProbe {
        alpha_hat: alpha,
        beta_hat: beta,
        all_positive,
        alpha_floor: 0.5 / (lmax + 0.1).powi(2),
        samples_used: used,
    })
}

/// Off-diagonal support `{(i, j) : i < j, |S_ij| > τ}`.
pub fn edge_set(s: &SymMatrix, tau: f64) -> Vec<(usize, usize)> {
    let n = s.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if s.get(i, j).abs() > tau {
                out.push((i, j));
            }
        }
    }
    out
}
