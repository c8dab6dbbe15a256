//! Stochastic Lotka-Volterra predator-prey system, simulated exactly with
//! Gillespie's direct method.
//!
//! Reactions, with hazards on the current state `(x1, x2)`:
//!
//! | reaction | effect              | hazard          |
//! |----------|---------------------|-----------------|
//! | R1       | `x1 -> x1 + 1`      | `r1 * x1`       |
//! | R2       | `x1 - 1, x2 + 1`    | `r2 * x1 * x2`  |
//! | R3       | `x2 -> x2 - 1`      | `r3 * x2`       |
//!
//! Parameters are the log-rates `log r_i`, each with a `U(-6, 1)` prior.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BoxPrior, SimulatorModel};
use crate::error::{Error, Result};

pub const INITIAL_PREY: u64 = 100;
pub const INITIAL_PREDATORS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LvConfig {
    pub horizon: f64,
    pub grid_step: f64,
    pub event_cap: u64,
}

impl Default for LvConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            grid_step: 0.2,
            event_cap: 200_000,
        }
    }
}

impl LvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "lv_horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.grid_step.is_finite() && self.grid_step > 0.0 && self.grid_step <= self.horizon) {
            return Err(Error::Config(format!(
                "lv_grid_step must be in (0, horizon], got {}",
                self.grid_step
            )));
        }
        if self.event_cap == 0 {
            return Err(Error::Config("lv_event_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        (self.horizon / self.grid_step).round() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reaction {
    PreyBirth,
    Predation,
    PredatorDeath,
}

impl Reaction {
    const ALL: [Reaction; 3] = [
        Reaction::PreyBirth,
        Reaction::Predation,
        Reaction::PredatorDeath,
    ];

    fn apply(self, state: &mut (u64, u64)) {
        match self {
            Reaction::PreyBirth => state.0 += 1,
            Reaction::Predation => {
                state.0 -= 1;
                state.1 += 1;
            }
            Reaction::PredatorDeath => state.1 -= 1,
        }
    }
}

pub fn hazards(rates: [f64; 3], state: (u64, u64)) -> [f64; 3] {
    let (x1, x2) = (state.0 as f64, state.1 as f64);
    [rates[0] * x1, rates[1] * x1 * x2, rates[2] * x2]
}

/// One step of the direct method: an exponential dwell time with rate equal
/// to the total hazard, and a reaction chosen proportionally to its hazard.
/// Returns `None` when the total hazard is zero and the process is absorbed.
pub fn gillespie_step(hazards: [f64; 3], rng: &mut dyn RngCore) -> Option<(f64, Reaction)> {
    let total: f64 = hazards.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let e: f64 = Exp1.sample(rng);
    let dwell = e / total;
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for (h, r) in hazards.iter().zip(Reaction::ALL) {
        acc += h;
        if *h > 0.0 {
            chosen = Some(r);
            if u < acc {
                break;
            }
        }
    }
    chosen.map(|r| (dwell, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LvError {
    #[error("event cap of {0} reached before the horizon")]
    EventCap(u64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LvTrajectory {
    /// Event times, only filled when events are recorded.
    pub event_times: Vec<f64>,
    /// Prey and predator counts after each recorded event, starting with
    /// the initial state.
    pub prey: Vec<u64>,
    pub predators: Vec<u64>,
    pub grid_prey: Vec<f64>,
    pub grid_predators: Vec<f64>,
}

/// Runs the SSA from `(100, 50)` up to the horizon and reads the state on
/// the grid `0, step, 2 step, ...`. The state at a grid time includes every
/// event at or before it.
pub fn simulate_trajectory(
    rates: [f64; 3],
    config: &LvConfig,
    rng: &mut dyn RngCore,
    record_events: bool,
) -> std::result::Result<LvTrajectory, LvError> {
    let n_grid = config.grid_len();
    let mut traj = LvTrajectory {
        grid_prey: Vec::with_capacity(n_grid),
        grid_predators: Vec::with_capacity(n_grid),
        ..Default::default()
    };
    let mut state = (INITIAL_PREY, INITIAL_PREDATORS);
    if record_events {
        traj.prey.push(state.0);
        traj.predators.push(state.1);
    }
    let mut time = 0.0;
    let mut events = 0u64;
    let grid_time = |i: usize| i as f64 * config.grid_step;

    while traj.grid_prey.len() < n_grid {
        let Some((dwell, reaction)) = gillespie_step(hazards(rates, state), rng) else {
            break;
        };
        let next = time + dwell;
        while traj.grid_prey.len() < n_grid && grid_time(traj.grid_prey.len()) < next {
            traj.grid_prey.push(state.0 as f64);
            traj.grid_predators.push(state.1 as f64);
        }
        if traj.grid_prey.len() == n_grid {
            break;
        }
        events += 1;
        if events > config.event_cap {
            return Err(LvError::EventCap(config.event_cap));
        }
        reaction.apply(&mut state);
        time = next;
        if record_events {
            traj.event_times.push(time);
            traj.prey.push(state.0);
            traj.predators.push(state.1);
        }
    }
    // Absorbed: the state is frozen for the rest of the grid.
    while traj.grid_prey.len() < n_grid {
        traj.grid_prey.push(state.0 as f64);
        traj.grid_predators.push(state.1 as f64);
    }
    Ok(traj)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Lag-`lag` autocorrelation with the full-series mean and variance in the
/// denominator. A constant series has autocorrelation 0.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 || lag >= xs.len() {
        return 0.0;
    }
    let num: f64 = xs.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    num / denom
}

/// The eight summaries: means, log-variances, then lag-1 and lag-2
/// autocorrelations, alternating prey and predator. `None` if any is not
/// finite (a zero variance).
pub fn summarize(traj: &LvTrajectory) -> Option<Vec<f64>> {
    let (prey, pred) = (&traj.grid_prey, &traj.grid_predators);
    let (m1, m2) = (mean(prey), mean(pred));
    let s = vec![
        m1,
        m2,
        variance(prey, m1).ln(),
        variance(pred, m2).ln(),
        autocorrelation(prey, 1),
        autocorrelation(pred, 1),
        autocorrelation(prey, 2),
        autocorrelation(pred, 2),
    ];
    s.iter().all(|v| v.is_finite()).then_some(s)
}

#[derive(Debug, Clone)]
pub struct LotkaVolterra {
    prior: BoxPrior,
    config: LvConfig,
}

impl LotkaVolterra {
    pub fn new(config: LvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            prior: BoxPrior::new(vec![(-6.0, 1.0); 3]),
            config,
        })
    }

    pub fn config(&self) -> &LvConfig {
        &self.config
    }

    pub fn rates(theta: &[f64]) -> [f64; 3] {
        [theta[0].exp(), theta[1].exp(), theta[2].exp()]
    }
}

impl SimulatorModel for LotkaVolterra {
    fn name(&self) -> &'static str {
        "lotka_volterra"
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["log_r1", "log_r2", "log_r3"]
    }

    fn prior(&self) -> &BoxPrior {
        &self.prior
    }

    fn true_parameter(&self) -> Vec<f64> {
        vec![2.0f64.ln(), 0.01f64.ln(), 0.0]
    }

    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let traj = simulate_trajectory(Self::rates(theta), &self.config, rng, false).ok()?;
        summarize(&traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn predation_hazard() {
        assert_eq!(hazards([2.0, 0.01, 1.0], (100, 50)), [200.0, 50.0, 50.0]);
    }

    #[test]
    fn single_live_reaction_is_certain() {
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..1000 {
            let (_, r) = gillespie_step([0.0, 0.0, 5.0], &mut rng).unwrap();
            assert_eq!(r, Reaction::PredatorDeath);
        }
    }

    #[test]
    fn zero_hazard_absorbs() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(gillespie_step([0.0, 0.0, 0.0], &mut rng).is_none());
    }

    #[test]
    fn mean_dwell_time_is_inverse_total_hazard() {
        let mut rng = RngStream::new(2, 0).rng();
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| gillespie_step([0.5, 1.0, 0.5], &mut rng).unwrap().0)
            .sum();
        assert!((total / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn reaction_frequencies_follow_hazards() {
        let mut rng = RngStream::new(3, 0).rng();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (_, r) = gillespie_step([1.0, 2.0, 1.0], &mut rng).unwrap();
            counts[Reaction::ALL.iter().position(|x| *x == r).unwrap()] += 1;
        }
        let frac = counts[1] as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "{counts:?}");
    }

    #[test]
    fn frozen_prey_is_rejected() {
        let config = LvConfig::default();
        let mut rng = RngStream::new(4, 0).rng();
        let traj = simulate_trajectory([0.0, 0.0, 1.0], &config, &mut rng, false).unwrap();
        assert!(traj.grid_prey.iter().all(|&x| x == 100.0));
        assert_eq!(mean(&traj.grid_prey), 100.0);
        assert!(summarize(&traj).is_none());
    }

    #[test]
    fn constant_series_has_zero_autocorrelation() {
        assert_eq!(autocorrelation(&[3.0; 10], 1), 0.0);
        assert_eq!(autocorrelation(&[3.0; 10], 2), 0.0);
    }

    #[test]
    fn autocorrelation_by_hand() {
        // mean 2, deviations (-1, 0, 1), denominator 2, lag-1 numerator 0, lag-2 numerator -1.
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(autocorrelation(&xs, 1), 0.0);
        assert_eq!(autocorrelation(&xs, 2), -0.5);
    }

    #[test]
    fn event_cap_is_enforced() {
        let config = LvConfig {
            event_cap: 100,
            ..LvConfig::default()
        };
        let mut rng = RngStream::new(5, 0).rng();
        assert_eq!(
            simulate_trajectory([2.0, 0.01, 1.0], &config, &mut rng, false),
            Err(LvError::EventCap(100))
        );
        let m = LotkaVolterra::new(config).unwrap();
        assert!(m.simulate(&m.true_parameter(), &mut rng).is_none());
    }

    #[test]
    fn true_parameter_gives_finite_summaries() {
        let m = LotkaVolterra::new(LvConfig::default()).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        let s = m.simulate(&m.true_parameter(), &mut rng).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(LvConfig::default().grid_len(), 151);
    }

    #[test]
    fn config_validation() {
        assert!(LvConfig {
            horizon: 0.0,
            ..LvConfig::default()
        }
        .validate()
        .is_err());
        assert!(LvConfig {
            grid_step: -1.0,
            ..LvConfig::default()
        }
        .validate()
        .is_err());
        assert!(LvConfig {
            event_cap: 0,
            ..LvConfig::default()
        }
        .validate()
        .is_err());
    }
}
