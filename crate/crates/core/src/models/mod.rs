//! Simulator models with uniform box priors.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};

mod banana;
mod gk;
mod lotka_volterra;
mod toy;

pub use banana::Banana;
pub use gk::{gk_quantile, GAndK, GK_DRAWS};
pub use lotka_volterra::{
    gillespie_step, simulate_trajectory, summarize, LotkaVolterra, LvConfig, LvError, LvTrajectory,
    Reaction,
};
pub use toy::GaussianToy;

pub const MODEL_NAMES: [&str; 4] = ["gaussian_toy", "banana", "lotka_volterra", "gk"];

/// Independent uniform prior on an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPrior {
    bounds: Vec<(f64, f64)>,
    density: f64,
}

impl BoxPrior {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
        assert!(volume > 0.0, "prior box must have positive volume");
        Self {
            bounds,
            density: 1.0 / volume,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.bounds.len()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        if self.contains(theta) {
            self.density
        } else {
            0.0
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect()
    }
}

/// A forward simulator with a prior and a discrepancy on its summaries.
pub trait SimulatorModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn parameter_names(&self) -> &'static [&'static str];

    fn prior(&self) -> &BoxPrior;

    /// Parameter used to generate synthetic observed data.
    fn true_parameter(&self) -> Vec<f64>;

    /// Summary statistics of one simulation at `theta`, or `None` when the
    /// simulation is degenerate and must never be accepted.
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>>;

    /// Observed data that is fixed by the model rather than simulated.
    fn fixed_observation(&self) -> Option<Vec<f64>> {
        None
    }

    fn dim(&self) -> usize {
        self.prior().bounds().len()
    }

    fn prior_sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.prior().sample(rng)
    }

    fn prior_density(&self, theta: &[f64]) -> f64 {
        self.prior().density(theta)
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    /// Distance of a simulation outcome to the observation; degenerate
    /// simulations are infinitely far away.
    fn simulate_distance(&self, theta: &[f64], observed: &[f64], rng: &mut dyn RngCore) -> f64 {
        match self.simulate(theta, rng) {
            Some(s) => {
                let d = self.distance(&s, observed);
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
            None => f64::INFINITY,
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const OBSERVED_RETRIES: u64 = 1000;

/// Draws the observed summary for one repetition: a single simulation at the
/// model's true parameter, retried on fresh streams if it is degenerate.
pub fn make_observed(model: &dyn SimulatorModel, seed: u64) -> Result<Vec<f64>> {
    if let Some(obs) = model.fixed_observation() {
        return Ok(obs);
    }
    let theta0 = model.true_parameter();
    for attempt in 0..OBSERVED_RETRIES {
        let mut rng = RngStream::for_draw(seed, Purpose::Observed, 0, attempt).rng();
        if let Some(s) = model.simulate(&theta0, &mut rng) {
            if s.iter().all(|v| v.is_finite()) {
                return Ok(s);
            }
        }
    }
    Err(Error::Config(format!(
        "model `{}` produced no valid observation at its true parameter",
        model.name()
    )))
}

pub fn model_by_name(name: &str, lv: LvConfig) -> Result<Box<dyn SimulatorModel>> {
    match name {
        "gaussian_toy" => Ok(Box::new(GaussianToy::new())),
        "banana" => Ok(Box::new(Banana::new())),
        "lotka_volterra" => Ok(Box::new(LotkaVolterra::new(lv)?)),
        "gk" => Ok(Box::new(GAndK::new())),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_models() -> Vec<Box<dyn SimulatorModel>> {
        MODEL_NAMES
            .iter()
            .map(|n| model_by_name(n, LvConfig::default()).unwrap())
            .collect()
    }

    #[test]
    fn registry_covers_every_name() {
        for (m, name) in all_models().iter().zip(MODEL_NAMES) {
            assert_eq!(m.name(), name);
            assert_eq!(m.parameter_names().len(), m.dim());
            assert!(m.prior().contains(&m.true_parameter()));
        }
        assert!(matches!(
            model_by_name("sir", LvConfig::default()),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_identical_summaries() {
        for m in all_models() {
            let mut rng = RngStream::new(5, 0).rng();
            let theta = m.true_parameter();
            let a = m.simulate(&theta, &mut rng).unwrap();
            let b = m.simulate(&theta, &mut rng).unwrap();
            assert_eq!(m.distance(&a, &a), 0.0);
            assert_eq!(m.distance(&a, &b), m.distance(&b, &a));
            assert!(m.distance(&a, &b) >= 0.0);
        }
    }

    #[test]
    fn box_prior_density() {
        let p = BoxPrior::new(vec![(-6.0, 6.0)]);
        assert_eq!(p.density(&[0.0]), 1.0 / 12.0);
        assert_eq!(p.density(&[7.0]), 0.0);
        assert_eq!(p.density(&[6.0]), 1.0 / 12.0);
        let p2 = BoxPrior::new(vec![(0.0, 5.0), (0.0, 2.0)]);
        assert_eq!(p2.density(&[1.0, 1.0]), 0.1);
        assert_eq!(p2.density(&[1.0]), 0.0);
    }

    #[test]
    fn observed_data_is_deterministic() {
        for m in all_models() {
            let a = make_observed(m.as_ref(), 11).unwrap();
            let b = make_observed(m.as_ref(), 11).unwrap();
            assert_eq!(a, b);
        }
        let toy = GaussianToy::new();
        assert_eq!(make_observed(&toy, 1).unwrap(), vec![0.0]);
        assert_eq!(make_observed(&toy, 2).unwrap(), vec![0.0]);
    }
}
