use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{BoxPrior, SimulatorModel};

pub const GK_DRAWS: usize = 50;

/// g-and-k quantile transform of a standard normal quantile `z`.
///
/// `(1 - exp(-g z)) / (1 + exp(-g z))` is evaluated as `tanh(g z / 2)`,
/// which is the same function without overflow for large `|g z|`.
pub fn gk_quantile(z: f64, a: f64, b: f64, g: f64, k: f64) -> f64 {
    let skew = 1.0 + 0.8 * (0.5 * g * z).tanh();
    a + b * skew * (1.0 + z * z).powf(k) * z
}

/// Univariate g-and-k distribution, summarised by 50 sorted draws.
#[derive(Debug, Clone)]
pub struct GAndK {
    prior: BoxPrior,
}

impl GAndK {
    pub fn new() -> Self {
        Self {
            prior: BoxPrior::new(vec![(0.0, 5.0), (0.0, 5.0), (0.0, 5.0), (0.0, 2.0)]),
        }
    }
}

impl Default for GAndK {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatorModel for GAndK {
    fn name(&self) -> &'static str {
        "gk"
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["A", "B", "g", "k"]
    }

    fn prior(&self) -> &BoxPrior {
        &self.prior
    }

    fn true_parameter(&self) -> Vec<f64> {
        vec![3.0, 1.0, 2.0, 0.5]
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let (a, b, g, k) = (theta[0], theta[1], theta[2], theta[3]);
        let mut ys: Vec<f64> = (0..GK_DRAWS)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                gk_quantile(z, a, b, g, k)
            })
            .collect();
        ys.sort_by(f64::total_cmp);
        Some(ys)
    }
}
