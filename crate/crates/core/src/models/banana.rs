use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{BoxPrior, SimulatorModel};

/// Banana-shaped posterior: `y ~ N((t1, t1 + t2^2), diag(1, 0.5))` with
/// uniform priors on `[-50, 50]^2`.
#[derive(Debug, Clone)]
pub struct Banana {
    prior: BoxPrior,
}

impl Banana {
    pub const VARIANCES: [f64; 2] = [1.0, 0.5];

    pub fn new() -> Self {
        Self {
            prior: BoxPrior::new(vec![(-50.0, 50.0), (-50.0, 50.0)]),
        }
    }

    pub fn mean(theta: &[f64]) -> [f64; 2] {
        [theta[0], theta[0] + theta[1] * theta[1]]
    }
}

impl Default for Banana {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatorModel for Banana {
    fn name(&self) -> &'static str {
        "banana"
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["theta1", "theta2"]
    }

    fn prior(&self) -> &BoxPrior {
        &self.prior
    }

    fn true_parameter(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let mean = Self::mean(theta);
        Some(
            mean.iter()
                .zip(Self::VARIANCES)
                .map(|(m, v)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + v.sqrt() * z
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn mean_map() {
        assert_eq!(Banana::mean(&[0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(Banana::mean(&[1.0, 2.0]), [1.0, 5.0]);
    }

    #[test]
    fn simulation_moments() {
        let m = Banana::new();
        let mut rng = RngStream::new(3, 0).rng();
        let n = 1_000_000;
        let theta = [1.0, 2.0];
        let (mut s, mut ss, mut cross) = ([0.0; 2], [0.0; 2], 0.0);
        for _ in 0..n {
            let y = m.simulate(&theta, &mut rng).unwrap();
            for i in 0..2 {
                s[i] += y[i];
                ss[i] += y[i] * y[i];
            }
            cross += y[0] * y[1];
        }
        let nf = n as f64;
        let mean = [s[0] / nf, s[1] / nf];
        assert!((mean[0] - 1.0).abs() < 0.01);
        assert!((mean[1] - 5.0).abs() < 0.01);
        let var = [
            ss[0] / nf - mean[0] * mean[0],
            ss[1] / nf - mean[1] * mean[1],
        ];
        assert!((var[0] - 1.0).abs() < 0.01);
        assert!((var[1] - 0.5).abs() < 0.005);
        assert!((cross / nf - mean[0] * mean[1]).abs() < 0.01);
    }
}
