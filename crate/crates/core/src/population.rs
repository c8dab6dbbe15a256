use serde::{Deserialize, Serialize};

/// A weighted parameter sample together with the distance its simulation
/// achieved and the band that distance falls in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: Vec<f64>,
    pub weight: f64,
    pub distance: f64,
    /// One-based band index.
    pub stratum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub particles: Vec<Particle>,
    /// One-based SMC iteration this population approximates.
    pub iteration: usize,
}

impl Population {
    /// Builds a population and normalizes its weights to sum to one.
    pub fn new(mut particles: Vec<Particle>, iteration: usize) -> Self {
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        assert!(
            total > 0.0 && total.is_finite(),
            "population weights must have a positive finite sum, got {total}"
        );
        for p in &mut particles {
            p.weight /= total;
        }
        Self {
            particles,
            iteration,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn strata(&self) -> Vec<usize> {
        self.particles.iter().map(|p| p.stratum).collect()
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for p in &self.particles {
            for (m, x) in mean.iter_mut().zip(&p.theta) {
                *m += p.weight * x;
            }
        }
        mean
    }

    /// Per-coordinate weighted standard deviation (plug-in, no bias correction).
    pub fn weighted_sd(&self) -> Vec<f64> {
        let mean = self.weighted_mean();
        let mut var = vec![0.0; self.dim()];
        for p in &self.particles {
            for ((v, x), m) in var.iter_mut().zip(&p.theta).zip(&mean) {
                *v += p.weight * (x - m) * (x - m);
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    /// Kish effective sample size.
    pub fn ess(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        1.0 / sq
    }
}
