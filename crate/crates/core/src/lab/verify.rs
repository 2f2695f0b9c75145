//! Consistency rates, the discrete covariance-difference bound and graph recovery.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{Source, Statistic};
use super::sampling::{stream, DistributionSpec, Role};
use super::stats;
use crate::error::{Error, Result};
use crate::estimators::{sample_cov, SampleSet};
use crate::linalg::{eigh, inverse_pd, norm2, SymMatrix};
use crate::precision::{self, edge_set, PrecisionProblem};
use crate::transport::{fm2_upper, w1_assignment, AtomKind, EmpiricalMeasure, GroundMetric};

/// Consistency passes when the fitted log-log slope is at most this.
pub const SLOPE_THRESHOLD: f64 = -0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub sample_size: usize,
    /// `E_N = mean ‖T̂_N − T(P)‖`, also the Kantorovich distance of the pushforward to `δ_{T(P)}`.
    pub e_n: f64,
    /// `mean ‖Σ̂_N − Σ_P‖_F` on the same datasets.
    pub cov_error: f64,
    /// Right-hand side for `e_n`: `cov_error` scaled by κ for the precision statistic.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub statistic: String,
    pub rows: Vec<ConsistencyRow>,
    pub slope: f64,
    pub pass: bool,
}

/// Population value `T(P)` the statistic converges to, as an atom.
///
/// For the precision statistic this is the penalized minimizer `S*(λ, Σ_P)`.
pub fn population_target(p: &DistributionSpec, statistic: &Statistic) -> Result<Vec<f64>> {
    let cov = |centered: bool| if centered { p.covariance() } else { p.second_moment() };
    match *statistic {
        Statistic::Covariance { centered } => Ok(cov(centered).to_dense()),
        Statistic::Eigenvalues { centered } => Ok(eigh(&cov(centered))?.values),
        Statistic::MeanCov => {
            let mut v = p.mean();
            v.extend(p.covariance().to_dense());
            Ok(v)
        }
        Statistic::Precision { lambda, centered, .. } => {
            let prob = PrecisionProblem::new(lambda, cov(centered))?;
            Ok(precision::converged(precision::solve(&prob, 1e-10, 200_000)?)?
                .s_star
                .to_dense())
        }
        Statistic::Portfolio { .. } => Err(Error::InvalidProblem(
            "consistency is only defined for the matrix and eigenvalue statistics".into(),
        )),
    }
}

fn centered_of(statistic: &Statistic) -> bool {
    match *statistic {
        Statistic::Covariance { centered }
        | Statistic::Eigenvalues { centered }
        | Statistic::Precision { centered, .. } => centered,
        _ => true,
    }
}

/// Fits `log E_N ≈ a + b log N` over `n_grid` with `M = reps` datasets per size.
pub fn verify_consistency(
    p: &DistributionSpec,
    statistic: &Statistic,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if n_grid.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: n_grid.len(),
        });
    }
    let n = p.dim();
    statistic.validate(n)?;
    let target = population_target(p, statistic)?;
    let centered = centered_of(statistic);
    let cov_target = if centered { p.covariance() } else { p.second_moment() };
    let factor = statistic.kappa(n).unwrap_or(1.0);
    let kind = statistic.atom_kind(n);
    let metric = statistic.metric();
    let source = Source::new(p, None)?;

    let mut rows = Vec::with_capacity(n_grid.len());
    for (g, &size) in n_grid.iter().enumerate() {
        if size < 2 {
            return Err(Error::InvalidProblem(format!("sample size {size} < 2")));
        }
        let errs: Vec<Result<(f64, f64)>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, ((g as u64) << 32) | r as u64, Role::P);
                let (data, _) = source.draw(size, &mut rng)?;
                let v = statistic.evaluate(&data)?;
                let c = sample_cov(&data, centered);
                Ok((metric.cost(kind, &v, &target), (&c - &cov_target).norm_fro()))
            })
            .collect();
        let errs = errs.into_iter().collect::<Result<Vec<_>>>()?;
        let e_n = errs.iter().map(|e| e.0).sum::<f64>() / reps as f64;
        let cov_error = errs.iter().map(|e| e.1).sum::<f64>() / reps as f64;
        let bound = factor * cov_error;
        rows.push(ConsistencyRow {
            sample_size: size,
            e_n,
            cov_error,
            bound,
            holds: e_n <= bound * (1.0 + 1e-9) + 1e-12,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.sample_size as f64).ln()).collect();
    let all_zero = rows.iter().all(|r| r.e_n == 0.0);
    let slope = if all_zero {
        f64::NEG_INFINITY
    } else {
        let ys: Vec<f64> = rows.iter().map(|r| r.e_n.max(f64::MIN_POSITIVE).ln()).collect();
        stats::slope(&xs, &ys)
    };
    Ok(ConsistencyReport {
        statistic: statistic.name().into(),
        pass: slope <= SLOPE_THRESHOLD,
        rows,
        slope,
    })
}

/// Both sides of the covariance-difference bound for discrete `P`, `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop82Check {
    /// `‖Σ_P − Σ_Q‖_F` from exact moments.
    pub lhs: f64,
    /// `n · fm2_upper + √n (‖μ_P‖ + ‖μ_Q‖) d₁`.
    pub rhs_upper: f64,
    /// Same with `n` replaced by `√(n² + 3n)`.
    pub rhs_corrected: f64,
    pub d1: f64,
    pub d2_upper: f64,
    pub holds: bool,
    pub holds_corrected: bool,
}

/// Largest replication factor tried when turning weights into equal-mass atoms.
pub const MAX_REPLICATION: usize = 1000;

fn replicate(atoms: &[Vec<f64>], probs: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for (a, p) in atoms.iter().zip(probs) {
        for _ in 0..(p * k as f64).round() as usize {
            out.extend_from_slice(a);
        }
    }
    out
}

fn common_multiple(probs: &[&[f64]]) -> Option<usize> {
    (1..=MAX_REPLICATION).find(|&k| {
        probs.iter().all(|ps| {
            ps.iter().all(|&p| {
                let x = p * k as f64;
                (x - x.round()).abs() <= 1e-9 * k as f64
            })
        })
    })
}

pub fn verify_prop82(p: &DistributionSpec, q: &DistributionSpec) -> Result<Prop82Check> {
    p.validate()?;
    q.validate()?;
    let (
        DistributionSpec::Discrete { atoms: ap, probs: pp },
        DistributionSpec::Discrete { atoms: aq, probs: pq },
    ) = (p, q)
    else {
        return Err(Error::KindMismatch("both distributions must be discrete".into()));
    };
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::ShapeMismatch(format!("P has dimension {n}, Q has {}", q.dim())));
    }
    let k = common_multiple(&[pp, pq]).ok_or_else(|| {
        Error::WeightMismatch(format!(
            "no common replication factor up to {MAX_REPLICATION} makes all weights integral"
        ))
    })?;
    let mp = EmpiricalMeasure::new(AtomKind::Vector(n), replicate(ap, pp, k))?;
    let mq = EmpiricalMeasure::new(AtomKind::Vector(n), replicate(aq, pq, k))?;
    if mp.len() != mq.len() {
        return Err(Error::WeightMismatch(format!(
            "replicated atom counts differ: {} vs {}",
            mp.len(),
            mq.len()
        )));
    }
    let d1 = w1_assignment(&mp, &mq, GroundMetric::Euclidean)?;
    let d2 = fm2_upper(&mp, &mq)?;
    let lhs = (&p.covariance() - &q.covariance()).norm_fro();
    let nf = n as f64;
    let mean_part = nf.sqrt() * (norm2(&p.mean()) + norm2(&q.mean())) * d1;
    let rhs_upper = nf * d2 + mean_part;
    let rhs_corrected = (nf * nf + 3.0 * nf).sqrt() * d2 + mean_part;
    let slack = 1e-12 * (1.0 + lhs);
    Ok(Prop82Check {
        lhs,
        rhs_upper,
        rhs_corrected,
        d1,
        d2_upper: d2,
        holds: lhs <= rhs_upper + slack,
        holds_corrected: lhs <= rhs_corrected + slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecoveryRow {
    pub sample_size: usize,
    /// Mean fraction of estimated edges that are true edges.
    pub precision: f64,
    /// Mean fraction of true edges that were recovered.
    pub recall: f64,
    /// `mean ‖S̃_N − S_P‖_F`.
    pub error_to_truth: f64,
    /// `mean ‖S̃_N − S*(λ, Σ_P)‖_F`.
    pub error_to_limit: f64,
    /// `mean ‖Σ̃_N − Σ_P‖_F`.
    pub cov_error: f64,
    /// `mean ‖S̃_N(Q) − S*(λ, Σ_P)‖_F` under the contaminated distribution.
    pub contaminated_lhs: f64,
    /// `2κ d₂(P, Q) + κ mean ‖Σ̃_N − Σ_P‖_F` with `d₂` replaced by its transport upper bound.
    pub contaminated_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecoveryReport {
    pub lambda: f64,
    pub tau: f64,
    pub kappa: f64,
    pub true_edges: Vec<(usize, usize)>,
    pub contamination: f64,
    pub rows: Vec<GraphRecoveryRow>,
}

/// Settings for [`graphical_recovery_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecoverySettings {
    pub n_grid: Vec<usize>,
    pub lambda: f64,
    pub tau: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// `Q = N(0, Σ_P + c I)` for the contaminated comparison.
    pub contamination: f64,
    /// Points per raw sample set used to bound `d₂(P, Q)`.
    pub raw_size: usize,
}

fn edge_scores(est: &[(usize, usize)], truth: &[(usize, usize)]) -> (f64, f64) {
    let hits = est.iter().filter(|e| truth.contains(e)).count() as f64;
    let precision = if est.is_empty() { 1.0 } else { hits / est.len() as f64 };
    let recall = if truth.is_empty() { 1.0 } else { hits / truth.len() as f64 };
    (precision, recall)
}

/// Samples `N(0, S⁻¹)`, estimates `S̃_N` from the uncentered covariance and scores the edge set.
pub fn graphical_recovery_experiment(
    true_s: &SymMatrix,
    settings: &GraphRecoverySettings,
) -> Result<GraphRecoveryReport> {
    let n = true_s.n();
    let sigma = inverse_pd(true_s)?;
    let lambda = settings.lambda;
    if !(lambda > 0.0) || !(settings.tau >= 0.0) || !(settings.contamination >= 0.0) {
        return Err(Error::InvalidProblem("need λ > 0, τ ≥ 0 and contamination ≥ 0".into()));
    }
    if settings.repetitions == 0 || settings.raw_size == 0 {
        return Err(Error::Empty("repetitions or raw sample"));
    }
    let p = DistributionSpec::Gaussian {
        mu: vec![0.0; n],
        sigma: sigma.clone(),
    };
    let q = DistributionSpec::Gaussian {
        mu: vec![0.0; n],
        sigma: &sigma + &SymMatrix::identity(n).scale(settings.contamination),
    };
    let (sp, sq) = (Source::new(&p, None)?, Source::new(&q, None)?);
    let limit = precision::converged(precision::solve(
        &PrecisionProblem::new(lambda, sigma.clone())?,
        1e-10,
        200_000,
    )?)?
    .s_star;
    let truth = edge_set(true_s, 0.0);
    let kappa = 1.01 * (n as f64 / lambda).powi(2);
    let estimate = |data: &SampleSet| -> Result<SymMatrix> {
        let prob = PrecisionProblem::new(lambda, sample_cov(data, false))?;
        Ok(precision::converged(precision::solve_default(&prob)?)?.s_star)
    };

    let mut rows = Vec::new();
    for (g, &size) in settings.n_grid.iter().enumerate() {
        let per_rep: Vec<Result<[f64; 6]>> = (0..settings.repetitions)
            .into_par_iter()
            .map(|r| {
                let idx = ((g as u64) << 32) | r as u64;
                let (dp, _) = sp.draw(size, &mut stream(settings.seed, idx, Role::P))?;
                let (dq, _) = sq.draw(size, &mut stream(settings.seed, idx, Role::Q))?;
                let s_p = estimate(&dp)?;
                let s_q = estimate(&dq)?;
                let (prec, rec) = edge_scores(&edge_set(&s_p, settings.tau), &truth);
                Ok([
                    prec,
                    rec,
                    (&s_p - true_s).norm_fro(),
                    (&s_p - &limit).norm_fro(),
                    (&sample_cov(&dp, false) - &sigma).norm_fro(),
                    (&s_q - &limit).norm_fro(),
                ])
            })
            .collect();
        let mut acc = [0.0; 6];
        for v in per_rep {
            for (a, x) in acc.iter_mut().zip(v?) {
                *a += x;
            }
        }
        let m = settings.repetitions as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        let raw_n = settings.raw_size;
        let idx = (g as u64) << 32;
        let (rp, _) = sp.draw(raw_n, &mut stream(settings.seed, idx, Role::RawP))?;
        let (rq, _) = sq.draw(raw_n, &mut stream(settings.seed, idx, Role::RawQ))?;
        let d2 = fm2_upper(
            &EmpiricalMeasure::new(AtomKind::Vector(n), rp.as_flat().to_vec())?,
            &EmpiricalMeasure::new(AtomKind::Vector(n), rq.as_flat().to_vec())?,
        )?;
        rows.push(GraphRecoveryRow {
            sample_size: size,
            precision: acc[0],
            recall: acc[1],
            error_to_truth: acc[2],
            error_to_limit: acc[3],
            cov_error: acc[4],
            contaminated_lhs: acc[5],
            contaminated_rhs: 2.0 * kappa * d2 + kappa * acc[4],
        });
    }
    Ok(GraphRecoveryReport {
        lambda,
        tau: settings.tau,
        kappa,
        true_edges: truth,
        contamination: settings.contamination,
        rows,
    })
}
