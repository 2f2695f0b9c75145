//! Pushforward measures, the α-sweep experiment and the per-pair bound checks.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{stream, DistributionSpec, Role, Sampler};
use super::stats;
use crate::error::{Error, Result};
use crate::estimators::{sample_cov, sample_mean, SampleSet};
use crate::linalg::{eigh, norm2, SymMatrix};
use crate::portfolio::{lipschitz_const_l, membership_admissible, value_v};
use crate::precision::{self, PrecisionProblem};
use crate::transport::{
    dbar2_mc, fm2_upper, gaussian_w2, w1_assignment, w1_sorted_1d, AtomKind, EmpiricalMeasure,
    GroundMetric,
};

/// Fixed part of the MC allowance on every bound check.
pub const ALLOWANCE_ABS: f64 = 1e-9;
/// Multiple of the bootstrap standard error added to the allowance.
pub const ALLOWANCE_SE: f64 = 3.0;
/// Portfolio repetitions redraw at most this many times when the target return is infeasible.
pub const MAX_REDRAWS: usize = 100;
/// Pilot draws used to check that the admissible shell carries mass.
pub const PILOT_SIZE: usize = 1000;
/// Minimum pilot acceptance rate for the admissible shell.
pub const MIN_ACCEPTANCE: f64 = 0.01;

/// Statistic computed from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    /// Sorted eigenvalues of the sample covariance.
    Eigenvalues {
        #[serde(default = "yes")]
        centered: bool,
    },
    Covariance {
        #[serde(default = "yes")]
        centered: bool,
    },
    /// Sample mean paired with the centered sample covariance.
    MeanCov,
    /// Minimizer of the penalized log-det program on the sample covariance.
    Precision {
        lambda: f64,
        #[serde(default = "yes")]
        centered: bool,
        /// Defaults to `1.01 (n/λ)²`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    /// Optimal Markowitz value on the sample mean and centered covariance.
    Portfolio { z: f64, c1: f64, c2: f64 },
}

fn yes() -> bool {
    true
}

/// Which part of a statistic a row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    All,
    Index(usize),
}

impl Coordinate {
    pub fn label(&self) -> String {
        match self {
            Coordinate::All => "all".into(),
            Coordinate::Index(i) => format!("{}", i + 1),
        }
    }
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Eigenvalues { .. } => "eigenvalues",
            Statistic::Covariance { .. } => "covariance",
            Statistic::MeanCov => "mean_cov",
            Statistic::Precision { .. } => "precision",
            Statistic::Portfolio { .. } => "portfolio",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Statistic::Precision { lambda, kappa, .. } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::config("/statistic/lambda", format!("need λ > 0, got {lambda}")));
                }
                if let Some(k) = kappa {
                    let threshold = (n as f64 / lambda).powi(2);
                    if !(k > threshold) || !k.is_finite() {
                        return Err(Error::config(
                            "/statistic/kappa",
                            format!("κ = {k} must exceed (n/λ)² = {threshold}"),
                        ));
                    }
                }
            }
            Statistic::Portfolio { z, c1, c2 } => {
                if !(z >= 0.0 && z.is_finite()) {
                    return Err(Error::config("/statistic/z", format!("need finite z ≥ 0, got {z}")));
                }
                if !(c1 > 0.0 && c1 < c2 && c2.is_finite()) {
                    return Err(Error::config(
                        "/statistic/c1",
                        format!("need 0 < c1 < c2, got c1 = {c1}, c2 = {c2}"),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Effective κ of the precision statistic.
    pub fn kappa(&self, n: usize) -> Option<f64> {
        match *self {
            Statistic::Precision { lambda, kappa, .. } => {
                Some(kappa.unwrap_or(1.01 * (n as f64 / lambda).powi(2)))
            }
            _ => None,
        }
    }

    pub fn atom_kind(&self, n: usize) -> AtomKind {
        match self {
            Statistic::Eigenvalues { .. } => AtomKind::Vector(n),
            Statistic::Covariance { .. } | Statistic::Precision { .. } => AtomKind::Matrix(n),
            Statistic::MeanCov => AtomKind::MeanCov(n),
            Statistic::Portfolio { .. } => AtomKind::Scalar,
        }
    }

    pub fn metric(&self) -> GroundMetric {
        match self {
            Statistic::Covariance { .. } | Statistic::Precision { .. } => GroundMetric::Frobenius,
            Statistic::MeanCov => GroundMetric::MeanCovSum,
            _ => GroundMetric::Euclidean,
        }
    }

    /// Rows reported per α: one per eigenvalue plus the full vector, otherwise the whole statistic.
    pub fn coordinates(&self, n: usize) -> Vec<Coordinate> {
        match self {
            Statistic::Eigenvalues { .. } => (0..n)
                .map(Coordinate::Index)
                .chain(std::iter::once(Coordinate::All))
                .collect(),
            _ => vec![Coordinate::All],
        }
    }

    /// Admissible shell `(C₁, C₂)` that data must be restricted to.
    pub fn shell(&self) -> Option<(f64, f64)> {
        match *self {
            Statistic::Portfolio { c1, c2, .. } => Some((c1, c2)),
            _ => None,
        }
    }

    pub fn evaluate(&self, s: &SampleSet) -> Result<Vec<f64>> {
        match *self {
            Statistic::Eigenvalues { centered } => Ok(eigh(&sample_cov(s, centered))?.values),
            Statistic::Covariance { centered } => Ok(sample_cov(s, centered).to_dense()),
            Statistic::MeanCov => {
                let mut v = sample_mean(s);
                v.extend(sample_cov(s, true).to_dense());
                Ok(v)
            }
            Statistic::Precision { lambda, centered, .. } => {
                let p = PrecisionProblem::new(lambda, sample_cov(s, centered))?;
                Ok(precision::converged(precision::solve_default(&p)?)?.s_star.to_dense())
            }
            Statistic::Portfolio { z, .. } => {
                Ok(vec![value_v(&sample_mean(s), &sample_cov(s, true), z)?])
            }
        }
    }

    /// Constant `c` in `d_K ≤ c · d₂(P, Q)` given first absolute moments `m_p`, `m_q`.
    pub fn bound_factor(&self, n: usize, m_p: f64, m_q: f64) -> Result<f64> {
        let m = 2.0 * m_p.max(m_q);
        Ok(match *self {
            Statistic::Eigenvalues { centered } | Statistic::Covariance { centered } => {
                if centered {
                    m.max(3.0)
                } else {
                    2.0
                }
            }
            Statistic::MeanCov => m.max(4.0),
            Statistic::Precision { centered, .. } => {
                let base = if centered { m.max(3.0) } else { 2.0 };
                self.kappa(n).unwrap() * base
            }
            Statistic::Portfolio { z, c1, c2 } => lipschitz_const_l(c1, c2, n, z)? * m.max(4.0),
        })
    }
}

/// Data source: a sampler, optionally restricted to an admissible shell by rejection.
#[derive(Debug, Clone)]
pub struct Source {
    sampler: Sampler,
    shell: Option<(f64, f64)>,
}

impl Source {
    pub fn new(spec: &DistributionSpec, shell: Option<(f64, f64)>) -> Result<Self> {
        Ok(Self {
            sampler: spec.sampler()?,
            shell,
        })
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    /// Draws `count` points. Returns the samples and the number of rejected draws.
    pub fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<(SampleSet, usize)> {
        match self.shell {
            None => Ok((self.sampler.sample(count, rng)?, 0)),
            Some((c1, c2)) => self.sampler.sample_where(
                count,
                rng,
                |x| membership_admissible(x, c1, c2).unwrap_or(false),
                100 * count + 1000,
            ),
        }
    }

    /// Fails with `AdmissibilityViolated` if the shell holds too little mass.
    pub fn pilot(&self, seed: u64) -> Result<f64> {
        let Some((c1, c2)) = self.shell else {
            return Ok(1.0);
        };
        let s = self.sampler.sample(PILOT_SIZE, &mut stream(seed, 0, Role::Pilot))?;
        let mut inside = 0usize;
        for r in s.rows() {
            if membership_admissible(r, c1, c2)? {
                inside += 1;
            }
        }
        let rate = inside as f64 / PILOT_SIZE as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::AdmissibilityViolated(format!(
                "only {inside} of {PILOT_SIZE} pilot draws satisfy C1 = {c1}, C2 = {c2}"
            )));
        }
        Ok(rate)
    }
}

/// Monte-Carlo sizes shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    /// Observations per dataset (N).
    pub sample_size: usize,
    /// Datasets per pushforward (M).
    pub repetitions: usize,
    pub seed: u64,
    /// Raw sample sets used for the distances between P and Q have `raw_factor · N` points.
    pub raw_factor: usize,
    /// Bootstrap resamples for the standard error of `dk_hat`.
    pub bootstrap: usize,
    pub parallel: bool,
}

impl MonteCarlo {
    pub fn new(sample_size: usize, repetitions: usize, seed: u64) -> Self {
        Self {
            sample_size,
            repetitions,
            seed,
            raw_factor: 10,
            bootstrap: 20,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 {
            return Err(Error::config("/sample_size", "need N ≥ 2"));
        }
        if self.repetitions < 2 {
            return Err(Error::config("/repetitions", "need M ≥ 2"));
        }
        if self.raw_factor == 0 {
            return Err(Error::config("/raw_factor", "need raw_factor ≥ 1"));
        }
        if self.bootstrap < 2 {
            return Err(Error::config("/bootstrap", "need at least 2 bootstrap resamples"));
        }
        Ok(())
    }

    /// Runs `f` on the global pool, or on a single thread when parallelism is off.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        if self.parallel {
            f()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::InvalidProblem(format!("thread pool: {e}")))?
                .install(f)
        }
    }
}

/// Statistic values of `M` independent datasets.
#[derive(Debug, Clone)]
pub struct Pushforward {
    /// One measure per requested statistic, atoms in repetition order.
    pub measures: Vec<EmpiricalMeasure>,
    /// Datasets redrawn because the portfolio target return was infeasible.
    pub redraws: usize,
    /// Points rejected by the admissible shell.
    pub rejected: usize,
    /// Points accepted.
    pub accepted: usize,
}

/// Draws `M` datasets of size `N` from `source` and evaluates every statistic on each.
///
/// Repetition `r` uses `stream(seed, r, role)`, so the atoms do not depend on scheduling.
pub fn pushforward_many(
    source: &Source,
    statistics: &[Statistic],
    mc: &MonteCarlo,
    role: Role,
) -> Result<Pushforward> {
    let n = source.dim();
    let reps: Vec<Result<(Vec<Vec<f64>>, usize, usize)>> = (0..mc.repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(mc.seed, r as u64, role);
            let mut redraws = 0usize;
            let mut rejected = 0usize;
            loop {
                let (data, rej) = source.draw(mc.sample_size, &mut rng)?;
                rejected += rej;
                match statistics.iter().map(|s| s.evaluate(&data)).collect::<Result<Vec<_>>>() {
                    Ok(v) => return Ok((v, redraws, rejected)),
                    Err(Error::Infeasible { .. }) if redraws < MAX_REDRAWS => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();
    let mut coords = vec![Vec::new(); statistics.len()];
    let (mut redraws, mut rejected) = (0, 0);
    for rep in reps {
        let (vals, rd, rj) = rep?;
        redraws += rd;
        rejected += rj;
        for (c, v) in coords.iter_mut().zip(vals) {
            c.extend(v);
        }
    }
    let measures = statistics
        .iter()
        .zip(coords)
        .map(|(s, c)| EmpiricalMeasure::new(s.atom_kind(n), c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Pushforward {
        measures,
        redraws,
        rejected,
        accepted: (mc.repetitions + redraws) * mc.sample_size,
    })
}

/// Pushforward of a single statistic under `spec`.
pub fn pushforward(
    spec: &DistributionSpec,
    statistic: &Statistic,
    mc: &MonteCarlo,
    role: Role,
) -> Result<EmpiricalMeasure> {
    statistic.validate(spec.dim())?;
    let source = Source::new(spec, statistic.shell())?;
    Ok(pushforward_many(&source, std::slice::from_ref(statistic), mc, role)?
        .measures
        .remove(0))
}

/// W1 between two pushforwards restricted to one coordinate.
pub fn coordinate_distance(
    statistic: &Statistic,
    coord: Coordinate,
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
) -> Result<f64> {
    match coord {
        Coordinate::Index(k) => w1_sorted_1d(&a.coordinate(k), &b.coordinate(k)),
        Coordinate::All if a.kind() == AtomKind::Scalar => w1_sorted_1d(a, b),
        Coordinate::All => w1_assignment(a, b, statistic.metric()),
    }
}

/// `(dk_hat, bootstrap standard error)` per coordinate.
pub fn compare_pushforwards(
    statistic: &Statistic,
    coords: &[Coordinate],
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    mc: &MonteCarlo,
) -> Result<Vec<(f64, f64)>> {
    let m = a.len();
    let boots: Vec<Result<Vec<f64>>> = (0..mc.bootstrap)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(mc.seed, k as u64, Role::Bootstrap);
            let ia: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            let ib: Vec<usize> = (0..b.len()).map(|_| rng.random_range(0..b.len())).collect();
            let (ra, rb) = (a.resample(&ia), b.resample(&ib));
            coords
                .iter()
                .map(|&c| coordinate_distance(statistic, c, &ra, &rb))
                .collect()
        })
        .collect();
    let boots = boots.into_iter().collect::<Result<Vec<_>>>()?;
    coords
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let d = coordinate_distance(statistic, c, a, b)?;
            let reps: Vec<f64> = boots.iter().map(|v| v[j]).collect();
            Ok((d, stats::std_dev(&reps)))
        })
        .collect()
}

/// Distances between two raw sample sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDistances {
    /// Exact W1 between the two empirical raw measures.
    pub d1_proxy: f64,
    /// Transport upper bound on d₂.
    pub d2_upper: f64,
    pub dbar2: f64,
    /// Mean `‖x‖` over the raw P sample.
    pub m_p: f64,
    pub m_q: f64,
}

pub fn raw_distances(p: &SampleSet, q: &SampleSet) -> Result<RawDistances> {
    let (mp, mq) = (
        EmpiricalMeasure::new(AtomKind::Vector(p.dim()), p.as_flat().to_vec())?,
        EmpiricalMeasure::new(AtomKind::Vector(q.dim()), q.as_flat().to_vec())?,
    );
    let mean_norm = |s: &SampleSet| s.rows().map(norm2).sum::<f64>() / s.len() as f64;
    Ok(RawDistances {
        d1_proxy: w1_assignment(&mp, &mq, GroundMetric::Euclidean)?,
        d2_upper: fm2_upper(&mp, &mq)?,
        dbar2: dbar2_mc(&p.to_rows(), &q.to_rows())?,
        m_p: mean_norm(p),
        m_q: mean_norm(q),
    })
}

/// One bound check: distance between pushforwards against the stability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    /// Perturbation level, absent for a direct P/Q comparison.
    pub alpha: Option<f64>,
    pub coordinate: String,
    pub d1_proxy: f64,
    pub dbar2: f64,
    pub w2_gaussian: Option<f64>,
    pub d2_upper: f64,
    pub m_p: f64,
    pub m_q: f64,
    pub dk_hat: f64,
    pub dk_se: f64,
    pub bound_factor: f64,
    pub bound_rhs: f64,
    pub allowance: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Self-distance of two independent P pushforwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub coordinate: String,
    pub dk_hat: f64,
    pub dk_se: f64,
}

#[allow(clippy::too_many_arguments)]
fn rows_for(
    statistic: &Statistic,
    n: usize,
    alpha: Option<f64>,
    raw: &RawDistances,
    w2: Option<f64>,
    coords: &[Coordinate],
    dk: &[(f64, f64)],
) -> Result<Vec<StabilityRow>> {
    let factor = statistic.bound_factor(n, raw.m_p, raw.m_q)?;
    Ok(coords
        .iter()
        .zip(dk)
        .map(|(c, &(dk_hat, dk_se))| {
            let bound_rhs = factor * raw.d2_upper;
            let allowance = ALLOWANCE_ABS + ALLOWANCE_SE * dk_se;
            let margin = bound_rhs - dk_hat;
            StabilityRow {
                alpha,
                coordinate: c.label(),
                d1_proxy: raw.d1_proxy,
                dbar2: raw.dbar2,
                w2_gaussian: w2,
                d2_upper: raw.d2_upper,
                m_p: raw.m_p,
                m_q: raw.m_q,
                dk_hat,
                dk_se,
                bound_factor: factor,
                bound_rhs,
                allowance,
                margin,
                pass: margin >= -allowance,
            }
        })
        .collect())
}

fn gaussian_distance(p: &DistributionSpec, q: &DistributionSpec) -> Result<Option<f64>> {
    match (p, q) {
        (
            DistributionSpec::Gaussian { mu: m1, sigma: s1 },
            DistributionSpec::Gaussian { mu: m2, sigma: s2 },
        ) => Ok(Some(gaussian_w2(m1, s1, m2, s2)?)),
        _ => Ok(None),
    }
}

/// Checks the stability bound of `statistic` for one pair `(P, Q)`. One row per coordinate.
pub fn verify_pair(
    p: &DistributionSpec,
    q: &DistributionSpec,
    statistic: &Statistic,
    mc: &MonteCarlo,
) -> Result<Vec<StabilityRow>> {
    mc.validate()?;
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::ShapeMismatch(format!("P has dimension {n}, Q has {}", q.dim())));
    }
    statistic.validate(n)?;
    mc.install(|| {
        let (sp, sq) = (Source::new(p, statistic.shell())?, Source::new(q, statistic.shell())?);
        sp.pilot(mc.seed)?;
        sq.pilot(mc.seed)?;
        let stats = std::slice::from_ref(statistic);
        let pp = pushforward_many(&sp, stats, mc, Role::P)?;
        let pq = pushforward_many(&sq, stats, mc, Role::Q)?;
        let raw_n = mc.raw_factor * mc.sample_size;
        let (rp, _) = sp.draw(raw_n, &mut stream(mc.seed, 0, Role::RawP))?;
        let (rq, _) = sq.draw(raw_n, &mut stream(mc.seed, 0, Role::RawQ))?;
        let raw = raw_distances(&rp, &rq)?;
        let coords = statistic.coordinates(n);
        let dk = compare_pushforwards(statistic, &coords, &pp.measures[0], &pq.measures[0], mc)?;
        rows_for(statistic, n, None, &raw, gaussian_distance(p, q)?, &coords, &dk)
    })
}

fn whole(rows: Vec<StabilityRow>) -> StabilityRow {
    rows.into_iter()
        .find(|r| r.coordinate == "all")
        .expect("every statistic reports an `all` row")
}

/// Covariance statistic, Frobenius ground metric.
pub fn verify_thm51(
    p: &DistributionSpec,
    q: &DistributionSpec,
    centered: bool,
    mc: &MonteCarlo,
) -> Result<StabilityRow> {
    Ok(whole(verify_pair(p, q, &Statistic::Covariance { centered }, mc)?))
}

/// Joint mean/covariance statistic with `‖μ‖ + ‖Σ‖_F`.
pub fn verify_thm52(p: &DistributionSpec, q: &DistributionSpec, mc: &MonteCarlo) -> Result<StabilityRow> {
    Ok(whole(verify_pair(p, q, &Statistic::MeanCov, mc)?))
}

/// Sparse precision statistic with factor κ (default `1.01 (n/λ)²`).
pub fn verify_thm53(
    p: &DistributionSpec,
    q: &DistributionSpec,
    lambda: f64,
    kappa: Option<f64>,
    centered: bool,
    mc: &MonteCarlo,
) -> Result<StabilityRow> {
    let s = Statistic::Precision {
        lambda,
        centered,
        kappa,
    };
    Ok(whole(verify_pair(p, q, &s, mc)?))
}

/// Sorted eigenvalue vector, Euclidean ground metric.
pub fn verify_thm55(
    p: &DistributionSpec,
    q: &DistributionSpec,
    centered: bool,
    mc: &MonteCarlo,
) -> Result<StabilityRow> {
    Ok(whole(verify_pair(p, q, &Statistic::Eigenvalues { centered }, mc)?))
}

/// Optimal portfolio value with both distributions restricted to the admissible shell.
pub fn verify_portfolio_bound(
    p: &DistributionSpec,
    q: &DistributionSpec,
    z: f64,
    c1: f64,
    c2: f64,
    mc: &MonteCarlo,
) -> Result<StabilityRow> {
    Ok(whole(verify_pair(p, q, &Statistic::Portfolio { z, c1, c2 }, mc)?))
}

/// Precision versus covariance distances computed on the same datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleCheck {
    pub covariance_dk: f64,
    pub precision_dk: f64,
    pub kappa: f64,
    pub holds: bool,
}

/// `d_K` of the precision pushforwards is at most `κ` times that of the covariance pushforwards.
pub fn verify_chain_rule(
    p: &DistributionSpec,
    q: &DistributionSpec,
    lambda: f64,
    centered: bool,
    mc: &MonteCarlo,
) -> Result<ChainRuleCheck> {
    mc.validate()?;
    let n = p.dim();
    let prec = Statistic::Precision {
        lambda,
        centered,
        kappa: None,
    };
    prec.validate(n)?;
    let kappa = prec.kappa(n).unwrap();
    let stats = [Statistic::Covariance { centered }, prec];
    mc.install(|| {
        let a = pushforward_many(&Source::new(p, None)?, &stats, mc, Role::P)?;
        let b = pushforward_many(&Source::new(q, None)?, &stats, mc, Role::Q)?;
        let cov = w1_assignment(&a.measures[0], &b.measures[0], GroundMetric::Frobenius)?;
        let pre = w1_assignment(&a.measures[1], &b.measures[1], GroundMetric::Frobenius)?;
        Ok(ChainRuleCheck {
            covariance_dk: cov,
            precision_dk: pre,
            kappa,
            holds: pre <= kappa * cov * (1.0 + 1e-9) + 1e-9,
        })
    })
}

/// `Q_α = base(μ + α μ', Σ + α Σ')` for α on a grid in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationFamily {
    pub base: DistributionSpec,
    pub mu_dir: Vec<f64>,
    pub sigma_dir: SymMatrix,
    pub alphas: Vec<f64>,
}

impl PerturbationFamily {
    pub fn new(
        base: DistributionSpec,
        mu_dir: Vec<f64>,
        sigma_dir: SymMatrix,
        alphas: Vec<f64>,
    ) -> Result<Self> {
        let f = Self {
            base,
            mu_dir,
            sigma_dir,
            alphas,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.base, DistributionSpec::Discrete { .. }) {
            return Err(Error::config("/family/base/family", "base must be gaussian or lognormal"));
        }
        self.base
            .validate()
            .map_err(|e| Error::config("/family/base", e.to_string()))?;
        let n = self.dim();
        if self.mu_dir.len() != n || !self.mu_dir.iter().all(|v| v.is_finite()) {
            return Err(Error::config("/family/mu_dir", format!("need {n} finite entries")));
        }
        if self.sigma_dir.n() != n || !self.sigma_dir.is_finite() {
            return Err(Error::config("/family/sigma_dir", format!("need a finite {n}x{n} matrix")));
        }
        if self.alphas.is_empty() {
            return Err(Error::config("/family/alphas", "grid is empty"));
        }
        for (k, &a) in self.alphas.iter().enumerate() {
            let ptr = format!("/family/alphas/{k}");
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config(ptr, format!("α = {a} outside [0, 1]")));
            }
            self.member(a)
                .validate()
                .map_err(|e| Error::config(ptr, format!("perturbed distribution invalid: {e}")))?;
        }
        Ok(())
    }

    pub fn member(&self, alpha: f64) -> DistributionSpec {
        let shift = |mu: &[f64], sigma: &SymMatrix| {
            let m: Vec<f64> = mu.iter().zip(&self.mu_dir).map(|(a, b)| a + alpha * b).collect();
            (m, sigma + &self.sigma_dir.scale(alpha))
        };
        match &self.base {
            DistributionSpec::Gaussian { mu, sigma } => {
                let (mu, sigma) = shift(mu, sigma);
                DistributionSpec::Gaussian { mu, sigma }
            }
            DistributionSpec::Lognormal { mu, sigma } => {
                let (mu, sigma) = shift(mu, sigma);
                DistributionSpec::Lognormal { mu, sigma }
            }
            d @ DistributionSpec::Discrete { .. } => d.clone(),
        }
    }
}

/// Everything needed to run an α-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Data dimension; must match the family.
    pub n: usize,
    pub sample_size: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub statistic: Statistic,
    pub family: PerturbationFamily,
    #[serde(default = "default_raw_factor")]
    pub raw_factor: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn default_raw_factor() -> usize {
    10
}

fn default_bootstrap() -> usize {
    20
}

impl ExperimentConfig {
    pub fn monte_carlo(&self) -> MonteCarlo {
        MonteCarlo {
            sample_size: self.sample_size,
            repetitions: self.repetitions,
            seed: self.seed,
            raw_factor: self.raw_factor,
            bootstrap: self.bootstrap,
            parallel: self.parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("/n", "need n ≥ 1"));
        }
        self.monte_carlo().validate()?;
        self.family.validate()?;
        if self.family.dim() != self.n {
            return Err(Error::config(
                "/n",
                format!("n = {} but the family has dimension {}", self.n, self.family.dim()),
            ));
        }
        self.statistic.validate(self.n)
    }
}

/// Rows of an α-sweep plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: ExperimentConfig,
    pub statistic: String,
    pub rows: Vec<StabilityRow>,
    pub baseline: Vec<BaselineRow>,
    /// Portfolio datasets redrawn because the target return left the feasible range.
    pub infeasible_redraws: usize,
    /// Fraction of draws rejected by the admissible shell, when one applies.
    pub rejection_rate: Option<f64>,
    pub all_pass: bool,
    pub wall_time_s: f64,
}

impl StabilityReport {
    /// Rows of one coordinate in α order.
    pub fn series(&self, coordinate: &str) -> Vec<&StabilityRow> {
        self.rows.iter().filter(|r| r.coordinate == coordinate).collect()
    }
}

/// Runs the α-sweep: P pushforward against every `Q_α` plus a P-vs-P baseline.
///
/// All `Q_α` share repetition streams, so differences along the grid come from α, not from reseeding.
pub fn run_stability_experiment(config: &ExperimentConfig) -> Result<StabilityReport> {
    config.validate()?;
    let start = Instant::now();
    let mc = config.monte_carlo();
    let n = config.n;
    let statistic = &config.statistic;
    let stats = std::slice::from_ref(statistic);
    let shell = statistic.shell();
    let coords = statistic.coordinates(n);
    let raw_n = mc.raw_factor * mc.sample_size;

    let (rows, baseline, redraws, rejected, accepted) = mc.install(|| {
        let sp = Source::new(&config.family.base, shell)?;
        sp.pilot(mc.seed)?;
        let pp = pushforward_many(&sp, stats, &mc, Role::P)?;
        let pb = pushforward_many(&sp, stats, &mc, Role::Baseline)?;
        let (rp, rej_p) = sp.draw(raw_n, &mut stream(mc.seed, 0, Role::RawP))?;
        let baseline = coords
            .iter()
            .zip(compare_pushforwards(statistic, &coords, &pp.measures[0], &pb.measures[0], &mc)?)
            .map(|(c, (dk_hat, dk_se))| BaselineRow {
                coordinate: c.label(),
                dk_hat,
                dk_se,
            })
            .collect::<Vec<_>>();

        let per_alpha: Vec<Result<(Vec<StabilityRow>, Pushforward, usize)>> = config
            .family
            .alphas
            .par_iter()
            .map(|&alpha| {
                let q = config.family.member(alpha);
                let sq = Source::new(&q, shell)?;
                sq.pilot(mc.seed)?;
                let pq = pushforward_many(&sq, stats, &mc, Role::Q)?;
                let (rq, rej_q) = sq.draw(raw_n, &mut stream(mc.seed, 0, Role::RawQ))?;
                let raw = raw_distances(&rp, &rq)?;
                let dk = compare_pushforwards(statistic, &coords, &pp.measures[0], &pq.measures[0], &mc)?;
                let w2 = gaussian_distance(&config.family.base, &q)?;
                let rows = rows_for(statistic, n, Some(alpha), &raw, w2, &coords, &dk)?;
                Ok((rows, pq, rej_q))
            })
            .collect();

        let mut rows = Vec::new();
        let mut redraws = pp.redraws + pb.redraws;
        let mut rejected = pp.rejected + pb.rejected + rej_p;
        let mut accepted = pp.accepted + pb.accepted + raw_n;
        for r in per_alpha {
            let (rs, pq, rej_q) = r?;
            rows.extend(rs);
            redraws += pq.redraws;
            rejected += pq.rejected + rej_q;
            accepted += pq.accepted + raw_n;
        }
        Ok((rows, baseline, redraws, rejected, accepted))
    })?;

    Ok(StabilityReport {
        config: config.clone(),
        statistic: statistic.name().into(),
        all_pass: rows.iter().all(|r| r.pass),
        rows,
        baseline,
        infeasible_redraws: redraws,
        rejection_rate: shell.map(|_| rejected as f64 / (rejected + accepted) as f64),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
