//! Distribution specs, samplers and seeded random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::SampleSet;
use crate::linalg::{sqrt_psd, SymMatrix};

/// Tolerance on the total mass of a discrete spec.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Purpose of a random stream. Distinct roles never share a ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    P = 1,
    Q = 2,
    RawP = 3,
    RawQ = 4,
    Bootstrap = 5,
    Baseline = 6,
    Redraw = 7,
    Pilot = 8,
}

/// ChaCha8 keyed by `seed ^ index` on stream `role`.
///
/// The generator is portable and the key depends only on `(seed, index, role)`,
/// so a repetition draws the same numbers whichever thread runs it.
pub fn stream(seed: u64, index: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index);
    rng.set_stream(role as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Gaussian { mu: Vec<f64>, sigma: SymMatrix },
    /// Entrywise `exp` of a Gaussian with parameters `mu`, `sigma`.
    Lognormal { mu: Vec<f64>, sigma: SymMatrix },
    Discrete { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mu, .. } | Self::Lognormal { mu, .. } => mu.len(),
            Self::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mu, sigma } | Self::Lognormal { mu, sigma } => {
                if mu.is_empty() {
                    return Err(Error::Empty("mean vector"));
                }
                if sigma.n() != mu.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "mean has {} entries, covariance is {}x{}",
                        mu.len(),
                        sigma.n(),
                        sigma.n()
                    )));
                }
                if !mu.iter().all(|v| v.is_finite()) || !sigma.is_finite() {
                    return Err(Error::NonFinite("distribution parameters"));
                }
                if !sigma.is_psd() {
                    return Err(Error::NotPsd {
                        min_eigenvalue: sigma.min_eigenvalue(),
                    });
                }
            }
            Self::Discrete { atoms, probs } => {
                if atoms.is_empty() {
                    return Err(Error::Empty("atom list"));
                }
                if atoms.len() != probs.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} atoms but {} probabilities",
                        atoms.len(),
                        probs.len()
                    )));
                }
                let d = atoms[0].len();
                if d == 0 || atoms.iter().any(|a| a.len() != d) {
                    return Err(Error::ShapeMismatch("atoms of unequal or zero length".into()));
                }
                if atoms.iter().flatten().chain(probs).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("discrete distribution"));
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::InvalidProblem("negative probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidProblem(format!("probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// Exact mean vector.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { mu, .. } => mu.clone(),
            Self::Lognormal { mu, sigma } => mu
                .iter()
                .enumerate()
                .map(|(i, m)| (m + 0.5 * sigma.get(i, i)).exp())
                .collect(),
            Self::Discrete { atoms, probs } => {
                let mut m = vec![0.0; self.dim()];
                for (a, p) in atoms.iter().zip(probs) {
                    m.iter_mut().zip(a).for_each(|(acc, x)| *acc += p * x);
                }
                m
            }
        }
    }

    /// Exact covariance matrix.
    pub fn covariance(&self) -> SymMatrix {
        match self {
            Self::Gaussian { sigma, .. } => sigma.clone(),
            Self::Lognormal { mu, sigma } => SymMatrix::from_fn(mu.len(), |i, j| {
                let s = mu[i] + mu[j] + 0.5 * (sigma.get(i, i) + sigma.get(j, j));
                s.exp() * sigma.get(i, j).exp_m1()
            }),
            Self::Discrete { atoms, probs } => {
                let m = self.mean();
                SymMatrix::from_fn(self.dim(), |i, j| {
                    atoms
                        .iter()
                        .zip(probs)
                        .map(|(a, p)| p * (a[i] - m[i]) * (a[j] - m[j]))
                        .sum()
                })
            }
        }
    }

    /// `E[x xᵀ]`.
    pub fn second_moment(&self) -> SymMatrix {
        let m = self.mean();
        &self.covariance() + &SymMatrix::outer(&m)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let n = self.dim();
        let factor = |sigma: &SymMatrix| -> Result<Vec<f64>> {
            match sigma.cholesky() {
                Ok(c) => Ok(c.factor().to_vec()),
                Err(_) => Ok(sqrt_psd(sigma)?.to_dense()),
            }
        };
        let kind = match self {
            Self::Gaussian { mu, sigma } => SamplerKind::Gaussian {
                mu: mu.clone(),
                factor: factor(sigma)?,
                exp: false,
            },
            Self::Lognormal { mu, sigma } => SamplerKind::Gaussian {
                mu: mu.clone(),
                factor: factor(sigma)?,
                exp: true,
            },
            Self::Discrete { atoms, probs } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                SamplerKind::Discrete {
                    atoms: atoms.clone(),
                    cdf,
                }
            }
        };
        Ok(Sampler { n, kind })
    }
}

#[derive(Debug, Clone)]
enum SamplerKind {
    /// `μ + F z` with row-major `F`, optionally followed by entrywise `exp`.
    Gaussian { mu: Vec<f64>, factor: Vec<f64>, exp: bool },
    Discrete { atoms: Vec<Vec<f64>>, cdf: Vec<f64> },
}

/// Prepared sampler for a validated [`DistributionSpec`].
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    kind: SamplerKind,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// One draw written into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        match &self.kind {
            SamplerKind::Gaussian { mu, factor, exp } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..n {
                    let row = &factor[i * n..(i + 1) * n];
                    let v = mu[i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                    out[i] = if *exp { v.exp() } else { v };
                }
            }
            SamplerKind::Discrete { atoms, cdf } => {
                let u: f64 = rng.random();
                let k = cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                out.copy_from_slice(&atoms[k]);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<SampleSet> {
        if count == 0 {
            return Err(Error::Empty("sample count"));
        }
        let mut data = vec![0.0; count * self.n];
        for row in data.chunks_mut(self.n) {
            self.draw_into(rng, row);
        }
        SampleSet::new(self.n, data)
    }

    /// Draws restricted to `keep` by rejection. Returns the samples and the number of rejections.
    ///
    /// Fails with `AdmissibilityViolated` once rejections exceed `max_reject`.
    pub fn sample_where<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
        keep: impl Fn(&[f64]) -> bool,
        max_reject: usize,
    ) -> Result<(SampleSet, usize)> {
        if count == 0 {
            return Err(Error::Empty("sample count"));
        }
        let mut data = vec![0.0; count * self.n];
        let mut rejected = 0usize;
        for row in data.chunks_mut(self.n) {
            loop {
                self.draw_into(rng, row);
                if keep(row) {
                    break;
                }
                rejected += 1;
                if rejected > max_reject {
                    return Err(Error::AdmissibilityViolated(format!(
                        "more than {max_reject} rejections while drawing {count} points"
                    )));
                }
            }
        }
        Ok((SampleSet::new(self.n, data)?, rejected))
    }
}

pub fn sample<R: Rng + ?Sized>(spec: &DistributionSpec, count: usize, rng: &mut R) -> Result<SampleSet> {
    spec.sampler()?.sample(count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_gaussian_is_constant() {
        let spec = DistributionSpec::Gaussian {
            mu: vec![1.5, -2.0],
            sigma: SymMatrix::zeros(2),
        };
        let s = sample(&spec, 20, &mut stream(1, 0, Role::P)).unwrap();
        assert!(s.rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn standard_normal_mean_is_near_zero() {
        let spec = DistributionSpec::Gaussian {
            mu: vec![0.0; 3],
            sigma: SymMatrix::identity(3),
        };
        let s = sample(&spec, 100_000, &mut stream(7, 0, Role::P)).unwrap();
        for m in crate::estimators::sample_mean(&s) {
            assert!(m.abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn single_atom_is_constant() {
        let spec = DistributionSpec::Discrete {
            atoms: vec![vec![3.0, 4.0]],
            probs: vec![1.0],
        };
        let s = sample(&spec, 10, &mut stream(0, 0, Role::P)).unwrap();
        assert!(s.rows().all(|r| r == [3.0, 4.0]));
    }

    #[test]
    fn discrete_frequencies() {
        let spec = DistributionSpec::Discrete {
            atoms: vec![vec![0.0], vec![1.0]],
            probs: vec![0.25, 0.75],
        };
        let s = sample(&spec, 40_000, &mut stream(3, 0, Role::P)).unwrap();
        let ones = s.rows().filter(|r| r[0] == 1.0).count() as f64 / 40_000.0;
        assert!((ones - 0.75).abs() < 0.01);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(5, 3, Role::P).random();
        let b: u64 = stream(5, 3, Role::P).random();
        let c: u64 = stream(5, 3, Role::Q).random();
        let d: u64 = stream(5, 4, Role::P).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn lognormal_moments_match_monte_carlo() {
        let spec = DistributionSpec::Lognormal {
            mu: vec![0.1, -0.2],
            sigma: SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap(),
        };
        let s = sample(&spec, 200_000, &mut stream(11, 0, Role::P)).unwrap();
        let m = crate::estimators::sample_mean(&s);
        let c = crate::estimators::sample_cov_centered(&s);
        for (a, b) in m.iter().zip(spec.mean()) {
            assert!((a - b).abs() < 5e-3);
        }
        assert!((&c - &spec.covariance()).norm_fro() < 5e-3);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = DistributionSpec::Discrete {
            atoms: vec![vec![0.0], vec![1.0]],
            probs: vec![0.5, 0.4],
        };
        assert!(bad.validate().is_err());
        let indefinite = DistributionSpec::Gaussian {
            mu: vec![0.0; 2],
            sigma: SymMatrix::from_diag(&[1.0, -1.0]),
        };
        assert!(matches!(indefinite.validate(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn json_shape() {
        let spec: DistributionSpec = serde_json::from_str(
            r#"{"family":"gaussian","mu":[0,1],"sigma":{"n":2,"rows":[[1,0],[0,1]]}}"#,
        )
        .unwrap();
        assert_eq!(spec.dim(), 2);
        let err = serde_json::from_str::<DistributionSpec>(
            r#"{"family":"gaussian","mu":[0],"sigma":{"n":1,"rows":[[1]]},"extra":1}"#,
        );
        assert!(err.is_err());
    }
}
