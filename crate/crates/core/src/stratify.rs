//! Predictive band frequencies and the quantities derived from them.
//!
//! Each proposal made from a particle in band `k` lands, after simulation,
//! in some band `l`. Counting these events over iterations estimates the
//! probability `C[l][k]` that a band-`k` particle produces a band-`l`
//! simulation. Those estimates rebalance the sampling weights towards bands
//! whose offspring tend to be accepted, and drive the early-stopping
//! statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Population;

/// Counts `f[l][k]` for a single iteration, row-major by landing band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyDelta {
    strata: usize,
    counts: Vec<u64>,
}

impl FrequencyDelta {
    pub fn new(strata: usize) -> Self {
        Self {
            strata,
            counts: vec![0; strata * strata],
        }
    }

    pub fn record(&mut self, landing: usize, source: usize) -> Result<()> {
        let idx = cell(self.strata, landing, source)?;
        self.counts[idx] += 1;
        Ok(())
    }

    pub fn get(&self, landing: usize, source: usize) -> u64 {
        self.counts[cell(self.strata, landing, source).expect("band index in range")]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &FrequencyDelta) {
        assert_eq!(self.strata, other.strata);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

fn cell(strata: usize, landing: usize, source: usize) -> Result<usize> {
    for idx in [landing, source] {
        if idx == 0 || idx > strata {
            return Err(Error::StratumOutOfRange { index: idx, strata });
        }
    }
    Ok((landing - 1) * strata + (source - 1))
}

/// Frequencies `f[l][k][m]` over landing band `l`, source band `k` and
/// iteration `m`, with running per-cell totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTensor {
    strata: usize,
    /// `iterations[m - 1]` holds the counts of iteration `m`.
    iterations: Vec<FrequencyDelta>,
    cumulative: FrequencyDelta,
}

impl FrequencyTensor {
    pub fn new(strata: usize) -> Self {
        Self {
            strata,
            iterations: Vec::new(),
            cumulative: FrequencyDelta::new(strata),
        }
    }

    pub fn strata(&self) -> usize {
        self.strata
    }

    /// Number of iterations with a slot (recorded or not).
    pub fn iterations(&self) -> usize {
        self.iterations.len()
    }

    fn slot(&mut self, iteration: usize) -> Result<&mut FrequencyDelta> {
        if iteration == 0 {
            return Err(Error::IterationOutOfRange {
                index: 0,
                iterations: self.iterations.len(),
            });
        }
        while self.iterations.len() < iteration {
            self.iterations.push(FrequencyDelta::new(self.strata));
        }
        Ok(&mut self.iterations[iteration - 1])
    }

    pub fn record_event(&mut self, landing: usize, source: usize, iteration: usize) -> Result<()> {
        cell(self.strata, landing, source)?;
        self.slot(iteration)?.record(landing, source)?;
        self.cumulative.record(landing, source)
    }

    /// Adds a whole iteration's worth of counts at once.
    pub fn merge(&mut self, delta: &FrequencyDelta, iteration: usize) -> Result<()> {
        self.slot(iteration)?.merge(delta);
        self.cumulative.merge(delta);
        Ok(())
    }

    pub fn count(&self, landing: usize, source: usize, iteration: usize) -> u64 {
        self.iterations
            .get(iteration.wrapping_sub(1))
            .map_or(0, |d| d.get(landing, source))
    }

    pub fn cumulative(&self, landing: usize, source: usize) -> u64 {
        self.cumulative.get(landing, source)
    }

    /// Sum of counts over iterations `1..=through`.
    pub fn cumulative_through(&self, through: usize) -> FrequencyDelta {
        let mut acc = FrequencyDelta::new(self.strata);
        for d in self.iterations.iter().take(through) {
            acc.merge(d);
        }
        acc
    }

    /// Column-normalized cumulative frequencies over iterations `1..=t`.
    pub fn predictive_matrix(&self, t: usize) -> PredictiveMatrix {
        let acc = self.cumulative_through(t);
        let n = self.strata;
        let mut totals = vec![0u64; n];
        for l in 1..=n {
            for (k, total) in totals.iter_mut().enumerate() {
                *total += acc.get(l, k + 1);
            }
        }
        let mut probs = vec![0.0; n * n];
        for l in 1..=n {
            for k in 1..=n {
                if totals[k - 1] > 0 {
                    probs[(l - 1) * n + (k - 1)] = acc.get(l, k) as f64 / totals[k - 1] as f64;
                }
            }
        }
        PredictiveMatrix {
            strata: n,
            probs,
            totals,
        }
    }
}

/// Estimated probabilities `C[l][k]` of landing in band `l` from band `k`.
/// Columns with no counts are unvisited and have no probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMatrix {
    strata: usize,
    probs: Vec<f64>,
    totals: Vec<u64>,
}

impl PredictiveMatrix {
    pub fn strata(&self) -> usize {
        self.strata
    }

    pub fn visited(&self, source: usize) -> bool {
        self.column_total(source) > 0
    }

    pub fn column_total(&self, source: usize) -> u64 {
        self.totals[source - 1]
    }

    pub fn get(&self, landing: usize, source: usize) -> Option<f64> {
        self.visited(source)
            .then(|| self.probs[(landing - 1) * self.strata + (source - 1)])
    }

    pub fn column(&self, source: usize) -> Option<Vec<f64>> {
        self.visited(source).then(|| {
            (1..=self.strata)
                .map(|l| self.probs[(l - 1) * self.strata + (source - 1)])
                .collect()
        })
    }

    /// Column with every entry floored at `1 / (total + T)`, renormalized.
    pub fn floored_column(&self, source: usize) -> Option<Vec<f64>> {
        let col = self.column(source)?;
        let floor = 1.0 / (self.column_total(source) as f64 + self.strata as f64);
        let floored: Vec<f64> = col.iter().map(|p| p.max(floor)).collect();
        let sum: f64 = floored.iter().sum();
        Some(floored.into_iter().map(|p| p / sum).collect())
    }
}

/// Probability mass each band's offspring put inside the next acceptance
/// region, indexed by band.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataWeights {
    /// `values[k - 1]` for band `k`; bands below the current iteration hold 0.
    pub values: Vec<f64>,
    /// Bands whose value is the neutral fallback rather than an estimate.
    pub fallback: Vec<bool>,
}

impl StrataWeights {
    pub fn get(&self, stratum: usize) -> f64 {
        self.values[stratum - 1]
    }
}

/// Weight mass of each band in a population, indexed `k - 1`.
pub fn stratum_masses(population: &Population, strata: usize) -> Vec<f64> {
    let mut mass = vec![0.0; strata];
    for p in &population.particles {
        mass[p.stratum - 1] += p.weight;
    }
    mass
}

/// `W_k = sum_{l = t+1..T} C[l][k]` for bands `k in t..=T`. Unvisited
/// columns get the band's current weight mass, which leaves sampling within
/// that band unchanged.
pub fn strata_weights(c: &PredictiveMatrix, t: usize, masses: &[f64]) -> StrataWeights {
    let n = c.strata();
    assert!(t >= 1 && t < n, "strata weights need 1 <= t < T");
    let mut values = vec![0.0; n];
    let mut fallback = vec![false; n];
    for k in t..=n {
        match c.column(k) {
            Some(col) => values[k - 1] = col[t..].iter().sum(),
            None => {
                values[k - 1] = masses[k - 1];
                fallback[k - 1] = true;
            }
        }
    }
    StrataWeights { values, fallback }
}

/// Sampling weights rebalanced across bands: normalize within each band,
/// scale by that band's `W_k`, and renormalize overall.
///
/// Returns the plain weights unchanged when only one band is occupied, when
/// every occupied band uses the neutral fallback, or when every occupied
/// band has zero `W_k`.
pub fn reweight(population: &Population, w: &StrataWeights) -> Vec<f64> {
    let plain = population.weights();
    let masses = stratum_masses(population, w.values.len());
    let occupied: Vec<usize> = (1..=masses.len())
        .filter(|&k| masses[k - 1] > 0.0)
        .collect();
    if occupied.len() <= 1 || occupied.iter().all(|&k| w.fallback[k - 1]) {
        return plain;
    }
    let raw: Vec<f64> = population
        .particles
        .iter()
        .map(|p| p.weight / masses[p.stratum - 1] * w.get(p.stratum))
        .collect();
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return plain;
    }
    raw.into_iter().map(|x| x / total).collect()
}

/// `KL(p || q) = sum_l p_l ln(p_l / q_l)`, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// Divergence of the innermost band's predictive column from band `t`'s,
/// after flooring. `None` while either column is unvisited.
pub fn kl_target_vs_current(c: &PredictiveMatrix, t: usize) -> Option<f64> {
    let target = c.floored_column(c.strata())?;
    let current = c.floored_column(t)?;
    Some(kl_divergence(&target, &current).max(0.0))
}

/// Divergence between band `t`'s column now and band `t - 1`'s column one
/// iteration earlier.
pub fn kl_consecutive(
    previous: &PredictiveMatrix,
    current: &PredictiveMatrix,
    t: usize,
) -> Option<f64> {
    if t < 2 {
        return None;
    }
    let now = current.floored_column(t)?;
    let before = previous.floored_column(t - 1)?;
    Some(kl_divergence(&now, &before).max(0.0))
}
