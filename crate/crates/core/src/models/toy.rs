use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{BoxPrior, SimulatorModel};

/// One observation `y ~ N(theta, 1)` with `theta ~ U[-6, 6]`, observed at `y = 0`.
#[derive(Debug, Clone)]
pub struct GaussianToy {
    prior: BoxPrior,
}

impl GaussianToy {
    pub fn new() -> Self {
        Self {
            prior: BoxPrior::new(vec![(-6.0, 6.0)]),
        }
    }
}

impl Default for GaussianToy {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatorModel for GaussianToy {
    fn name(&self) -> &'static str {
        "gaussian_toy"
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn prior(&self) -> &BoxPrior {
        &self.prior
    }

    fn true_parameter(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let z: f64 = StandardNormal.sample(rng);
        Some(vec![theta[0] + z])
    }

    fn fixed_observation(&self) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn distance_is_absolute_difference() {
        let m = GaussianToy::new();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..10 {
            let y = m.simulate(&[0.0], &mut rng).unwrap();
            assert_eq!(m.distance(&y, &[0.0]), y[0].abs());
        }
    }

    #[test]
    fn within_one_frequency_matches_normal_cdf() {
        let m = GaussianToy::new();
        let n = 1_000_000;
        let mut rng = RngStream::new(2, 0).rng();
        let hits = (0..n)
            .filter(|_| m.simulate_distance(&[0.0], &[0.0], &mut rng) < 1.0)
            .count();
        let phi = Normal::standard();
        let p = phi.cdf(1.0) - phi.cdf(-1.0);
        assert!((p - 0.6827).abs() < 1e-4);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
