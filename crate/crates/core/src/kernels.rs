//! Gaussian perturbation kernels and their covariance estimators.
//!
//! Every estimator here is a weighted second moment about some point. For a
//! weighted point set with mean `m` and covariance `C`,
//!
//! ```text
//! sum_j w_j (x - x_j)(x - x_j)^T = C + (x - m)(x - m)^T      (weights summing to 1)
//! ```
//!
//! so per-particle covariances cost `O(dim^2)` each once the moments of the
//! target set are known, instead of a pass over the whole population.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::population::Population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelPolicy {
    /// One covariance shared by all particles.
    Global,
    /// One covariance per particle, centred on that particle.
    Local,
    /// Per-particle covariance aimed at the next band inwards, plain weights.
    StratifiedSimple,
    /// Stratified kernels plus predictive reweighting of the sampling weights.
    #[serde(rename = "stratified")]
    StratifiedFull,
}

impl KernelPolicy {
    pub const ALL: [KernelPolicy; 4] = [
        KernelPolicy::Global,
        KernelPolicy::Local,
        KernelPolicy::StratifiedSimple,
        KernelPolicy::StratifiedFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelPolicy::Global => "global",
            KernelPolicy::Local => "local",
            KernelPolicy::StratifiedSimple => "stratified-simple",
            KernelPolicy::StratifiedFull => "stratified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn is_stratified(self) -> bool {
        matches!(
            self,
            KernelPolicy::StratifiedSimple | KernelPolicy::StratifiedFull
        )
    }
}

impl std::fmt::Display for KernelPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Indices into a population with weights renormalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSubset {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl WeightedSubset {
    /// Members of `indices` with positive weight, or `None` if their total
    /// weight is zero.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>, weights: &[f64]) -> Option<Self> {
        let indices: Vec<usize> = indices.into_iter().filter(|&i| weights[i] > 0.0).collect();
        let total: f64 = indices.iter().map(|&i| weights[i]).sum();
        if indices.is_empty() || total <= 0.0 {
            return None;
        }
        let weights = indices.iter().map(|&i| weights[i] / total).collect();
        Some(Self { indices, weights })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Particles whose distance is below `eps_next`, weights renormalized.
pub fn next_threshold_subset(population: &Population, eps_next: f64) -> Result<WeightedSubset> {
    let weights = population.weights();
    let below = population
        .particles
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance < eps_next)
        .map(|(i, _)| i);
    WeightedSubset::from_indices(below, &weights).ok_or(Error::EmptySubset {
        threshold: eps_next,
    })
}

/// Weighted mean and covariance of a point set (weights summing to one).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Moments {
    pub fn of(points: &[&[f64]], weights: &[f64]) -> Self {
        assert_eq!(points.len(), weights.len());
        assert!(!points.is_empty(), "moments of an empty set");
        let dim = points[0].len();
        let mut mean = DVector::zeros(dim);
        for (x, w) in points.iter().zip(weights) {
            for (m, xi) in mean.iter_mut().zip(x.iter()) {
                *m += w * xi;
            }
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for (x, w) in points.iter().zip(weights) {
            for r in 0..dim {
                let dr = x[r] - mean[r];
                for c in 0..=r {
                    cov[(r, c)] += w * dr * (x[c] - mean[c]);
                }
            }
        }
        cov.fill_upper_triangle_with_lower_triangle();
        Self { mean, cov }
    }

    pub fn of_subset(population: &Population, subset: &WeightedSubset) -> Self {
        let points: Vec<&[f64]> = subset
            .indices
            .iter()
            .map(|&i| population.particles[i].theta.as_slice())
            .collect();
        Self::of(&points, &subset.weights)
    }

    /// `sum_j w_j (x - x_j)(x - x_j)^T` over the underlying point set.
    pub fn spread_about(&self, x: &[f64]) -> DMatrix<f64> {
        let dim = self.mean.len();
        let mut out = self.cov.clone();
        for r in 0..dim {
            let dr = x[r] - self.mean[r];
            for c in 0..dim {
                out[(r, c)] += dr * (x[c] - self.mean[c]);
            }
        }
        out
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Globally optimal covariance: the double weighted sum over the whole
/// population (weights `w`) against the thresholded subset (weights `w~`).
pub fn global_covariance(population: &Population, subset: &WeightedSubset) -> Result<DMatrix<f64>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset {
            threshold: f64::NAN,
        });
    }
    let dim = population.dim();
    for p in &population.particles {
        check_dim(dim, p.theta.len())?;
    }
    let outer = Moments::of_subset(
        population,
        &WeightedSubset {
            indices: (0..population.len()).collect(),
            weights: population.weights(),
        },
    );
    let inner = Moments::of_subset(population, subset);
    Ok(combine_global(&outer, &inner))
}

fn combine_global(outer: &Moments, inner: &Moments) -> DMatrix<f64> {
    let diff = &outer.mean - &inner.mean;
    &outer.cov + &inner.cov + &diff * diff.transpose()
}

/// Locally optimal covariance for the particle at `theta`.
pub fn local_covariance(
    theta: &[f64],
    population: &Population,
    subset: &WeightedSubset,
) -> Result<DMatrix<f64>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset {
            threshold: f64::NAN,
        });
    }
    check_dim(population.dim(), theta.len())?;
    Ok(Moments::of_subset(population, subset).spread_about(theta))
}

/// Target set for a particle in `stratum`: particles in strictly inner
/// bands, falling back to the particle's own band and inwards, then to the
/// whole population under `fallback_weights`.
pub fn stratified_target(
    population: &Population,
    stratum: usize,
    weights: &[f64],
    fallback_weights: &[f64],
) -> WeightedSubset {
    let inner = |min: usize| {
        population
            .particles
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.stratum >= min)
            .map(|(i, _)| i)
    };
    WeightedSubset::from_indices(inner(stratum + 1), weights)
        .or_else(|| WeightedSubset::from_indices(inner(stratum), weights))
        .or_else(|| WeightedSubset::from_indices(0..population.len(), fallback_weights))
        .expect("population weights sum to one")
}

/// Stratified locally optimal covariance for a particle at `theta` in band
/// `stratum`, estimated with `weights` (plain or reweighted).
pub fn stratified_covariance(
    theta: &[f64],
    stratum: usize,
    population: &Population,
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    check_dim(population.dim(), theta.len())?;
    let target = stratified_target(population, stratum, weights, &population.weights());
    Ok(Moments::of_subset(population, &target).spread_about(theta))
}

/// Count of distinct points among `indices`, stopping once `limit` is reached.
pub fn distinct_points(population: &Population, indices: &[usize], limit: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::with_capacity(limit);
    for &i in indices {
        let x = population.particles[i].theta.as_slice();
        if !seen.contains(&x) {
            seen.push(x);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// Adds `lambda I` when `cov` cannot be factorized or its support has fewer
/// than `dim + 1` distinct points. `lambda = max(1e-8, 1e-6 trace / dim)`,
/// grown tenfold until a factorization exists.
pub fn regularize(cov: &DMatrix<f64>, distinct: usize) -> DMatrix<f64> {
    let dim = cov.nrows();
    let degenerate = distinct < dim + 1;
    if !degenerate && cov.clone().cholesky().is_some() {
        return cov.clone();
    }
    let mut lambda = f64::max(1e-8, 1e-6 * cov.trace() / dim as f64);
    loop {
        let out = cov + DMatrix::identity(dim, dim) * lambda;
        if out.clone().cholesky().is_some() {
            return out;
        }
        lambda *= 10.0;
    }
}

/// Zero-centred Gaussian perturbation `N(x | mean, cov)` with a cached
/// Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    cov: DMatrix<f64>,
    /// Lower Cholesky factor, row-major.
    lower: Vec<f64>,
    log_norm: f64,
}

type Scratch = SmallVec<[f64; 8]>;

impl GaussianKernel {
    /// Fails with `None` unless `cov` is positive definite.
    pub fn new(cov: DMatrix<f64>) -> Option<Self> {
        let dim = cov.nrows();
        let chol = cov.clone().cholesky()?;
        let l = chol.l();
        let mut lower = vec![0.0; dim * dim];
        let mut log_det = 0.0;
        for r in 0..dim {
            for c in 0..=r {
                lower[r * dim + c] = l[(r, c)];
            }
            log_det += 2.0 * l[(r, r)].ln();
        }
        let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Some(Self {
            cov,
            lower,
            log_norm,
        })
    }

    /// Regularizes `cov` and builds the kernel.
    pub fn regularized(cov: &DMatrix<f64>, distinct: usize) -> Self {
        Self::new(regularize(cov, distinct)).expect("regularized covariance factorizes")
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `mean + L z` with `z` standard normal.
    pub fn sample(&self, mean: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let dim = self.dim();
        let z: Scratch = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        (0..dim)
            .map(|r| {
                let row = &self.lower[r * dim..r * dim + r + 1];
                mean[r] + row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()
            })
            .collect()
    }

    pub fn log_density(&self, x: &[f64], mean: &[f64]) -> f64 {
        let dim = self.dim();
        let mut u: Scratch = SmallVec::with_capacity(dim);
        let mut quad = 0.0;
        for r in 0..dim {
            let row = &self.lower[r * dim..r * dim + r];
            let acc: f64 = row.iter().zip(&u).map(|(l, v)| l * v).sum();
            let v = (x[r] - mean[r] - acc) / self.lower[r * dim + r];
            quad += v * v;
            u.push(v);
        }
        self.log_norm - 0.5 * quad
    }

    pub fn density(&self, x: &[f64], mean: &[f64]) -> f64 {
        self.log_density(x, mean).exp()
    }
}

/// Perturbation kernels for every particle of a population.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelPlan {
    Shared(GaussianKernel),
    PerParticle(Vec<GaussianKernel>),
}

impl KernelPlan {
    pub fn kernel(&self, i: usize) -> &GaussianKernel {
        match self {
            KernelPlan::Shared(k) => k,
            KernelPlan::PerParticle(ks) => &ks[i],
        }
    }

    /// Builds kernels for moving `population` (iteration `t`) towards the
    /// band structure of iteration `t + 1`. `reweighted` carries the
    /// predictive sampling weights and is only read by the full stratified
    /// policy.
    pub fn build(
        policy: KernelPolicy,
        population: &Population,
        t: usize,
        reweighted: &[f64],
    ) -> KernelPlan {
        let plain = population.weights();
        let dim = population.dim();
        let all: Vec<usize> = (0..population.len()).collect();
        let inner = WeightedSubset::from_indices(
            all.iter()
                .copied()
                .filter(|&i| population.particles[i].stratum > t),
            &plain,
        );
        match policy {
            KernelPolicy::Global => {
                let outer = Moments::of_subset(
                    population,
                    &WeightedSubset {
                        indices: all.clone(),
                        weights: plain.clone(),
                    },
                );
                let cov = match &inner {
                    Some(sub) => combine_global(&outer, &Moments::of_subset(population, sub)),
                    None => outer.cov * 2.0,
                };
                let distinct = distinct_points(population, &all, dim + 1);
                KernelPlan::Shared(GaussianKernel::regularized(&cov, distinct))
            }
            KernelPolicy::Local => {
                let support = inner
                    .or_else(|| WeightedSubset::from_indices(all, &plain))
                    .expect("population weights sum to one");
                let moments = Moments::of_subset(population, &support);
                let distinct = distinct_points(population, &support.indices, dim + 1);
                KernelPlan::PerParticle(
                    population
                        .particles
                        .iter()
                        .map(|p| {
                            GaussianKernel::regularized(&moments.spread_about(&p.theta), distinct)
                        })
                        .collect(),
                )
            }
            KernelPolicy::StratifiedSimple | KernelPolicy::StratifiedFull => {
                let weights = if policy == KernelPolicy::StratifiedFull {
                    reweighted
                } else {
                    &plain
                };
                let max_stratum = population
                    .particles
                    .iter()
                    .map(|p| p.stratum)
                    .max()
                    .unwrap_or(0);
                let per_stratum: Vec<Option<(Moments, usize)>> = (0..=max_stratum)
                    .map(|k| {
                        population
                            .particles
                            .iter()
                            .any(|p| p.stratum == k)
                            .then(|| {
                                let target = stratified_target(population, k, weights, &plain);
                                let distinct =
                                    distinct_points(population, &target.indices, dim + 1);
                                (Moments::of_subset(population, &target), distinct)
                            })
                    })
                    .collect();
                KernelPlan::PerParticle(
                    population
                        .particles
                        .iter()
                        .map(|p| {
                            let (m, distinct) = per_stratum[p.stratum].as_ref().expect("occupied");
                            GaussianKernel::regularized(&m.spread_about(&p.theta), *distinct)
                        })
                        .collect(),
                )
            }
        }
    }

    /// Density of the proposal mixture `sum_j s_j K_j(x | theta_j)`.
    pub fn mixture_density(&self, x: &[f64], population: &Population, sampling: &[f64]) -> f64 {
        population
            .particles
            .iter()
            .zip(sampling)
            .enumerate()
            .filter(|(_, (_, s))| **s > 0.0)
            .map(|(j, (p, s))| s * self.kernel(j).density(x, &p.theta))
            .sum()
    }
}

/// Flattened proposal mixture `sum_j s_j N(x | theta_j, cov_j)` for fast
/// repeated evaluation. Components with zero sampling weight are dropped.
#[derive(Debug, Clone)]
pub struct ProposalMixture {
    dim: usize,
    means: Vec<f64>,
    lower: Vec<f64>,
    inv_diag: Vec<f64>,
    offsets: Vec<f64>,
}

impl ProposalMixture {
    pub fn new(plan: &KernelPlan, population: &Population, sampling: &[f64]) -> Self {
        let dim = population.dim();
        let mut m = Self {
            dim,
            means: Vec::new(),
            lower: Vec::new(),
            inv_diag: Vec::new(),
            offsets: Vec::new(),
        };
        for (j, (p, &s)) in population.particles.iter().zip(sampling).enumerate() {
            if s <= 0.0 {
                continue;
            }
            let k = plan.kernel(j);
            m.means.extend_from_slice(&p.theta);
            m.lower.extend_from_slice(&k.lower);
            m.inv_diag
                .extend((0..dim).map(|r| 1.0 / k.lower[r * dim + r]));
            m.offsets.push(s.ln() + k.log_norm);
        }
        m
    }

    pub fn components(&self) -> usize {
        self.offsets.len()
    }

    fn exponent(&self, j: usize, x: &[f64]) -> f64 {
        let d = self.dim;
        let mean = &self.means[j * d..(j + 1) * d];
        let quad = if d == 1 {
            let v = (x[0] - mean[0]) * self.inv_diag[j];
            v * v
        } else {
            let lower = &self.lower[j * d * d..(j + 1) * d * d];
            let inv = &self.inv_diag[j * d..(j + 1) * d];
            let mut u: Scratch = SmallVec::with_capacity(d);
            let mut quad = 0.0;
            for r in 0..d {
                let acc: f64 = lower[r * d..r * d + r]
                    .iter()
                    .zip(&u)
                    .map(|(l, v)| l * v)
                    .sum();
                let v = (x[r] - mean[r] - acc) * inv[r];
                quad += v * v;
                u.push(v);
            }
            quad
        };
        self.offsets[j] - 0.5 * quad
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let n = self.components();
        let direct: f64 = if self.dim == 1 {
            let x0 = x[0];
            self.means
                .iter()
                .zip(&self.inv_diag)
                .zip(&self.offsets)
                .map(|((m, s), o)| {
                    let v = (x0 - m) * s;
                    (o - 0.5 * v * v).exp()
                })
                .sum()
        } else {
            (0..n).map(|j| self.exponent(j, x).exp()).sum()
        };
        if direct > 0.0 && direct.is_finite() {
            return direct.ln();
        }
        let exps: Vec<f64> = (0..n).map(|j| self.exponent(j, x)).collect();
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        max + exps.iter().map(|e| (e - max).exp()).sum::<f64>().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Particle;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn pop1d(points: &[(f64, f64, usize)]) -> Population {
        Population::new(
            points
                .iter()
                .map(|&(x, w, s)| Particle {
                    theta: vec![x],
                    weight: w,
                    distance: 0.0,
                    stratum: s,
                })
                .collect(),
            1,
        )
    }

    #[test]
    fn subset_below_threshold() {
        let mut pop = pop1d(&[(0.0, 1.0, 1), (1.0, 1.0, 1), (2.0, 1.0, 1)]);
        for (p, d) in pop.particles.iter_mut().zip([0.5, 1.5, 3.0]) {
            p.distance = d;
        }
        let sub = next_threshold_subset(&pop, 2.0).unwrap();
        assert_eq!(sub.indices, vec![0, 1]);
        assert_eq!(sub.weights, vec![0.5, 0.5]);
        assert_eq!(
            next_threshold_subset(&pop, 10.0).unwrap().indices,
            vec![0, 1, 2]
        );
        assert!(matches!(
            next_threshold_subset(&pop, 0.1),
            Err(Error::EmptySubset { .. })
        ));
    }

    #[test]
    fn global_covariance_two_points() {
        let pop = pop1d(&[(0.0, 1.0, 1), (1.0, 1.0, 1)]);
        let sub = WeightedSubset::from_indices(0..2, &pop.weights()).unwrap();
        assert_relative_eq!(
            global_covariance(&pop, &sub).unwrap()[(0, 0)],
            0.5,
            epsilon = 1e-15
        );
        let single = pop1d(&[(3.0, 1.0, 1)]);
        let sub = WeightedSubset::from_indices(0..1, &single.weights()).unwrap();
        assert_eq!(global_covariance(&single, &sub).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn local_covariance_examples() {
        let pop = pop1d(&[(0.0, 1.0, 1), (1.0, 1.0, 1)]);
        let sub = WeightedSubset::from_indices(0..2, &pop.weights()).unwrap();
        assert_relative_eq!(local_covariance(&[0.0], &pop, &sub).unwrap()[(0, 0)], 0.5);

        let pop2 = Population::new(
            vec![Particle {
                theta: vec![1.0, 0.0],
                weight: 1.0,
                distance: 0.0,
                stratum: 1,
            }],
            1,
        );
        let sub = WeightedSubset::from_indices(0..1, &pop2.weights()).unwrap();
        let cov = local_covariance(&[0.0, 0.0], &pop2, &sub).unwrap();
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!(local_covariance(&[0.0], &pop2, &sub).is_err());
    }

    #[test]
    fn stratified_covariance_examples() {
        // theta_i = 1 in band 2; band 3 holds a single particle at 5.
        let pop = pop1d(&[(1.0, 1.0, 2), (0.0, 1.0, 1), (5.0, 1.0, 3)]);
        let cov = stratified_covariance(&[1.0], 2, &pop, &pop.weights()).unwrap();
        assert_relative_eq!(cov[(0, 0)], 16.0);

        // Innermost band falls back to its own members.
        let cov = stratified_covariance(&[5.0], 3, &pop, &pop.weights()).unwrap();
        assert_eq!(cov[(0, 0)], 0.0);
    }

    #[test]
    fn stratified_equals_local_with_one_band() {
        let pop = pop1d(&[(0.3, 1.0, 1), (1.2, 2.0, 1), (-0.7, 3.0, 1)]);
        let all = WeightedSubset::from_indices(0..3, &pop.weights()).unwrap();
        for p in &pop.particles {
            let local = local_covariance(&p.theta, &pop, &all).unwrap();
            let strat = stratified_covariance(&p.theta, 1, &pop, &pop.weights()).unwrap();
            assert_eq!(local, strat);
        }
    }

    #[test]
    fn regularization() {
        let zero = DMatrix::zeros(1, 1);
        assert_eq!(regularize(&zero, 1)[(0, 0)], 1e-8);

        let good = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(regularize(&good, 3), good);

        let rank1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(rank1.clone().cholesky().is_none());
        let fixed = regularize(&rank1, 3);
        assert!(fixed.clone().cholesky().is_some());
        assert_relative_eq!(fixed[(1, 1)], 5e-7);
    }

    #[test]
    fn density_values() {
        let k = GaussianKernel::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_relative_eq!(
            k.density(&[0.0], &[0.0]),
            0.398_942_280_401_432_7,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            k.density(&[1.0], &[0.0]),
            0.241_970_724_519_143_37,
            epsilon = 1e-15
        );
        assert!(GaussianKernel::new(DMatrix::zeros(1, 1)).is_none());
    }

    #[test]
    fn density_integrates_to_one() {
        let k = GaussianKernel::new(DMatrix::from_element(1, 1, 0.7)).unwrap();
        let (lo, hi, n) = (-15.0, 15.0, 200_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| k.density(&[x], &[0.4]);
        let mut sum = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            sum += f(lo + i as f64 * h);
        }
        assert!((sum * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tiny_kernel_barely_moves() {
        let k = GaussianKernel::regularized(&DMatrix::zeros(1, 1), 1);
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..100 {
            assert!((k.sample(&[2.0], &mut rng)[0] - 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn sample_moments_match_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let k = GaussianKernel::new(cov.clone()).unwrap();
        let mut rng = RngStream::new(2, 0).rng();
        let n = 100_000;
        let mean = [1.0, -2.0];
        let draws: Vec<Vec<f64>> = (0..n).map(|_| k.sample(&mean, &mut rng)).collect();
        let refs: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
        let m = Moments::of(&refs, &vec![1.0 / n as f64; n]);
        for r in 0..2 {
            let sd = cov[(r, r)].sqrt();
            assert!((m.mean[r] - mean[r]).abs() < 4.0 * sd / (n as f64).sqrt());
            for c in 0..2 {
                assert!((m.cov[(r, c)] - cov[(r, c)]).abs() < 0.05 * cov[(r, c)].abs().max(0.5));
            }
        }
    }

    #[test]
    fn log_density_average_matches_entropy() {
        for cov in [
            DMatrix::<f64>::from_element(1, 1, 0.3),
            DMatrix::from_row_slice(2, 2, &[1.5, -0.4, -0.4, 0.8]),
        ] {
            let dim = cov.nrows() as f64;
            let entropy = 0.5
                * (dim * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
                    + cov.determinant().ln());
            let k = GaussianKernel::new(cov).unwrap();
            let mut rng = RngStream::new(3, 0).rng();
            let n = 50_000;
            let mean = vec![0.5; dim as usize];
            let avg: f64 = (0..n)
                .map(|_| -k.log_density(&k.sample(&mean, &mut rng), &mean))
                .sum::<f64>()
                / n as f64;
            assert!(
                (avg - entropy).abs() < 0.02 * entropy.abs(),
                "{avg} vs {entropy}"
            );
        }
    }

    #[test]
    fn flattened_mixture_matches_direct_sum() {
        let mut rng = RngStream::new(4, 0).rng();
        for dim in 1..=3 {
            let particles: Vec<Particle> = (0..12)
                .map(|i| Particle {
                    theta: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    weight: 1.0 + i as f64,
                    distance: 0.0,
                    stratum: 1 + i % 3,
                })
                .collect();
            let pop = Population::new(particles, 1);
            let mut sampling = pop.weights();
            sampling[3] = 0.0;
            let plan = KernelPlan::build(KernelPolicy::StratifiedSimple, &pop, 1, &sampling);
            let mix = ProposalMixture::new(&plan, &pop, &sampling);
            assert_eq!(mix.components(), 11);
            for _ in 0..20 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                let direct = plan.mixture_density(&x, &pop, &sampling);
                assert_relative_eq!(mix.log_density(&x).exp(), direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn mixture_survives_underflow() {
        let pop = pop1d(&[(0.0, 1.0, 1)]);
        let plan =
            KernelPlan::Shared(GaussianKernel::new(DMatrix::from_element(1, 1, 1e-6)).unwrap());
        let mix = ProposalMixture::new(&plan, &pop, &[1.0]);
        let ld = mix.log_density(&[1.0]);
        let expected = plan.kernel(0).log_density(&[1.0], &[0.0]);
        assert!(ld.is_finite());
        assert_relative_eq!(ld, expected, max_relative = 1e-12);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in KernelPolicy::ALL {
            assert_eq!(KernelPolicy::parse(p.as_str()), Some(p));
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.as_str()));
        }
        assert_eq!(KernelPolicy::parse("optimal"), None);
    }
}
