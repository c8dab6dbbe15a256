//! Rejection ABC and the ABC-SMC loop shared by all kernel policies.
//!
//! Proposals are numbered within an iteration and proposal `c` draws from its
//! own random stream. Batches of proposals are simulated in parallel and then
//! scanned in counter order, stopping at the `N`-th acceptance, so the output
//! is the same for any worker count.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelPlan, KernelPolicy, ProposalMixture};
use crate::models::SimulatorModel;
use crate::parallel;
use crate::population::{Particle, Population};
use crate::rng::{Purpose, RngStream};
use crate::schedule::{Band, ThresholdSchedule};
use crate::stratify::{
    self, kl_consecutive, kl_target_vs_current, strata_weights, stratum_masses, FrequencyDelta,
    FrequencyTensor, PredictiveMatrix,
};

pub const DEFAULT_MAX_PROPOSALS: u64 = 10_000_000;
pub const DEFAULT_STOP_KL: f64 = 0.05;
pub const DEFAULT_STOP_MIN_COUNT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub enabled: bool,
    pub kl_threshold: f64,
    /// Proposals needed from the innermost band before the rule may fire.
    pub min_count: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            enabled: false,
            kl_threshold: DEFAULT_STOP_KL,
            min_count: DEFAULT_STOP_MIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub schedule: ThresholdSchedule,
    pub particles: usize,
    pub policy: KernelPolicy,
    pub seed: u64,
    pub stopping: StoppingRule,
    /// Per-iteration cap on proposals, counting out-of-prior draws.
    pub max_proposals: u64,
}

impl SmcConfig {
    pub fn new(
        schedule: ThresholdSchedule,
        particles: usize,
        policy: KernelPolicy,
        seed: u64,
    ) -> Self {
        Self {
            schedule,
            particles,
            policy,
            seed,
            stopping: StoppingRule::default(),
            max_proposals: DEFAULT_MAX_PROPOSALS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config(format!(
                "particles must be at least 2, got {}",
                self.particles
            )));
        }
        if self.stopping.kl_threshold.is_nan() || self.stopping.kl_threshold <= 0.0 {
            return Err(Error::Config(format!(
                "stop_kl must be positive, got {}",
                self.stopping.kl_threshold
            )));
        }
        if self.stopping.min_count < 1 {
            return Err(Error::Config("stop_min_count must be at least 1".into()));
        }
        if self.max_proposals < self.particles as u64 {
            return Err(Error::Config(format!(
                "max_proposals ({}) must be at least the particle count",
                self.max_proposals
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub accepted: usize,
    pub generated: u64,
    pub acceptance_rate: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub ess: f64,
    /// Innermost-band column against this iteration's band column.
    pub kl: Option<f64>,
    /// This iteration's band column against the previous iteration's.
    pub kl_consecutive: Option<f64>,
    /// Cumulative proposals made from innermost-band particles.
    pub target_count: u64,
    /// Whether the stopping rule's conditions hold at this iteration.
    pub stop_signal: bool,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy: KernelPolicy,
    pub iterations: Vec<IterationRecord>,
    pub stopped_early: bool,
    pub aborted: Option<String>,
    pub frequencies: FrequencyTensor,
    pub final_population: Option<Population>,
}

impl RunRecord {
    pub fn cumulative_generated(&self) -> Vec<u64> {
        self.iterations
            .iter()
            .scan(0u64, |acc, r| {
                *acc += r.generated;
                Some(*acc)
            })
            .collect()
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
enum Outcome {
    OutOfSupport,
    Simulated(f64),
}

#[derive(Debug, Clone)]
struct Proposal {
    theta: Vec<f64>,
    source: usize,
    outcome: Outcome,
}

const MIN_BATCH: u64 = 64;
const MAX_BATCH: u64 = 1 << 16;

/// Evaluates proposals `0, 1, 2, ...` in parallel batches and feeds them in
/// counter order to `visit`, which returns whether the proposal is accepted.
/// Stops right after the `wanted`-th acceptance. Returns the accepted
/// proposals and the number of proposals visited.
fn drive<F, V>(
    wanted: usize,
    cap: u64,
    iteration: usize,
    propose: F,
    mut visit: V,
) -> Result<(Vec<Proposal>, u64)>
where
    F: Fn(u64) -> Proposal + Sync + Send,
    V: FnMut(&Proposal) -> bool,
{
    let mut accepted = Vec::with_capacity(wanted);
    let mut generated = 0u64;
    while accepted.len() < wanted {
        if generated >= cap {
            return Err(Error::ProposalCap {
                iteration,
                accepted: accepted.len(),
                wanted,
                cap,
            });
        }
        let remaining = (wanted - accepted.len()) as f64;
        let rate = (accepted.len() as f64 + 1.0) / (generated as f64 + 1.0);
        let batch = ((1.2 * remaining / rate) as u64 + 16).clamp(MIN_BATCH, MAX_BATCH);
        let end = (generated + batch).min(cap);
        for p in parallel::map_range(generated, end, &propose) {
            generated += 1;
            if visit(&p) {
                accepted.push(p);
                if accepted.len() == wanted {
                    break;
                }
            }
        }
    }
    Ok((accepted, generated))
}

/// Outcome of a rejection-ABC round.
#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub population: Population,
    pub generated: u64,
}

/// Samples the prior and keeps `n` simulations with distance below
/// `epsilon`, all equally weighted. Bands are assigned against `schedule`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_abc(
    model: &dyn SimulatorModel,
    observed: &[f64],
    schedule: &ThresholdSchedule,
    epsilon: f64,
    n: usize,
    seed: u64,
    cap: u64,
) -> Result<RejectionOutcome> {
    if epsilon.is_nan() || epsilon <= 0.0 || epsilon > schedule.eps(1) {
        return Err(Error::Config(format!(
            "rejection threshold {epsilon} must be in (0, {}]",
            schedule.eps(1)
        )));
    }
    if n == 0 {
        return Err(Error::Config(
            "rejection ABC needs at least one particle".into(),
        ));
    }
    let propose = |c: u64| {
        let mut rng = RngStream::for_draw(seed, Purpose::Proposal, 1, c).rng();
        let theta = model.prior_sample(&mut rng);
        let d = model.simulate_distance(&theta, observed, &mut rng);
        Proposal {
            theta,
            source: 0,
            outcome: Outcome::Simulated(d),
        }
    };
    let accept = |p: &Proposal| matches!(p.outcome, Outcome::Simulated(d) if d < epsilon);
    let (accepted, generated) = drive(n, cap, 1, propose, accept)?;
    let particles = accepted
        .into_iter()
        .map(|p| {
            let Outcome::Simulated(distance) = p.outcome else {
                unreachable!("only simulated proposals are accepted")
            };
            Particle {
                theta: p.theta,
                weight: 1.0,
                distance,
                stratum: schedule.stratum_of(distance).landing_row(),
            }
        })
        .collect();
    Ok(RejectionOutcome {
        population: Population::new(particles, 1),
        generated,
    })
}

/// Sampling weights for the next transition: predictive reweighting for the
/// full stratified policy, the population weights otherwise.
pub fn sampling_weights(
    population: &Population,
    policy: KernelPolicy,
    predictive: &PredictiveMatrix,
    t: usize,
) -> Vec<f64> {
    if policy != KernelPolicy::StratifiedFull {
        return population.weights();
    }
    let masses = stratum_masses(population, predictive.strata());
    let w = strata_weights(predictive, t, &masses);
    stratify::reweight(population, &w)
}

/// Unnormalized importance weight `prior(theta) / sum_j s_j K_j(theta | theta_j)`.
pub fn importance_weight(
    model: &dyn SimulatorModel,
    theta: &[f64],
    population: &Population,
    plan: &KernelPlan,
    sampling: &[f64],
) -> f64 {
    let prior = model.prior_density(theta);
    if prior == 0.0 {
        return 0.0;
    }
    prior / plan.mixture_density(theta, population, sampling)
}

/// Result of one SMC transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub population: Population,
    pub generated: u64,
    pub frequencies: FrequencyDelta,
}

/// One transition from iteration `t` to `t + 1`: build the sampling weights
/// and kernels, then propose, simulate and tally until `N` proposals land
/// below `eps_{t+1}`. Frequencies are counted for every simulated proposal,
/// accepted or not; out-of-prior proposals are counted as generated but never
/// simulated.
pub fn smc_iteration(
    model: &dyn SimulatorModel,
    observed: &[f64],
    population: &Population,
    t: usize,
    config: &SmcConfig,
    tensor: &FrequencyTensor,
) -> Result<Transition> {
    let schedule = &config.schedule;
    let strata = schedule.len();
    if t == 0 || t >= strata {
        return Err(Error::IterationOutOfRange {
            index: t,
            iterations: strata,
        });
    }
    let predictive = tensor.predictive_matrix(t);
    let sampling = sampling_weights(population, config.policy, &predictive, t);
    let plan = KernelPlan::build(config.policy, population, t, &sampling);
    let chooser = WeightedIndex::new(&sampling).expect("sampling weights have positive mass");
    let eps_next = schedule.eps(t + 1);

    let propose = |c: u64| {
        let mut rng = RngStream::for_draw(config.seed, Purpose::Proposal, t + 1, c).rng();
        let source = chooser.sample(&mut rng);
        let theta = plan
            .kernel(source)
            .sample(&population.particles[source].theta, &mut rng);
        let outcome = if model.prior().contains(&theta) {
            Outcome::Simulated(model.simulate_distance(&theta, observed, &mut rng))
        } else {
            Outcome::OutOfSupport
        };
        Proposal {
            theta,
            source,
            outcome,
        }
    };

    let mut delta = FrequencyDelta::new(strata);
    let visit = |p: &Proposal| match p.outcome {
        Outcome::OutOfSupport => false,
        Outcome::Simulated(d) => {
            let band = schedule.stratum_of(d);
            let source = population.particles[p.source].stratum;
            delta
                .record(band.landing_row(), source)
                .expect("bands lie inside the schedule");
            d < eps_next
        }
    };
    let (accepted, generated) = drive(
        config.particles,
        config.max_proposals,
        t + 1,
        propose,
        visit,
    )?;

    let mixture = ProposalMixture::new(&plan, population, &sampling);
    let log_weights = parallel::map_slice(&accepted, |p| {
        model.prior_density(&p.theta).ln() - mixture.log_density(&p.theta)
    });
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let particles = accepted
        .into_iter()
        .zip(log_weights)
        .map(|(p, lw)| {
            let Outcome::Simulated(distance) = p.outcome else {
                unreachable!("only simulated proposals are accepted")
            };
            let Band::Stratum(stratum) = schedule.stratum_of(distance) else {
                unreachable!("accepted distances lie inside the partition")
            };
            Particle {
                theta: p.theta,
                weight: (lw - max).exp(),
                distance,
                stratum,
            }
        })
        .collect();
    Ok(Transition {
        population: Population::new(particles, t + 1),
        generated,
        frequencies: delta,
    })
}

/// Stopping decision at iteration `t` and the divergence it was based on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCheck {
    pub stop: bool,
    pub kl: Option<f64>,
}

/// Whether the predictive column of band `t` is close enough to the
/// innermost band's column to stop. Never fires before iteration 2 or
/// before the innermost column holds `min_count` proposals.
pub fn should_stop(tensor: &FrequencyTensor, t: usize, rule: &StoppingRule) -> StopCheck {
    if t < 2 {
        return StopCheck {
            stop: false,
            kl: None,
        };
    }
    let c = tensor.predictive_matrix(t);
    let strata = c.strata();
    if c.column_total(strata) < rule.min_count {
        return StopCheck {
            stop: false,
            kl: None,
        };
    }
    let kl = kl_target_vs_current(&c, t);
    StopCheck {
        stop: kl.is_some_and(|v| v < rule.kl_threshold),
        kl,
    }
}

fn summarize(
    population: &Population,
    generated: u64,
    wall_seconds: f64,
    kl: Option<f64>,
    kl_consecutive: Option<f64>,
    target_count: u64,
    stop_signal: bool,
) -> IterationRecord {
    IterationRecord {
        iteration: population.iteration,
        accepted: population.len(),
        generated,
        acceptance_rate: population.len() as f64 / generated as f64,
        mean: population.weighted_mean(),
        sd: population.weighted_sd(),
        ess: population.ess(),
        kl,
        kl_consecutive,
        target_count,
        stop_signal,
        wall_seconds,
    }
}

/// Full run: rejection sampling at `eps_1`, then one transition per
/// remaining threshold, stopping early if the rule is enabled and fires.
pub fn run(model: &dyn SimulatorModel, observed: &[f64], config: &SmcConfig) -> Result<RunRecord> {
    config.validate()?;
    let schedule = &config.schedule;
    let strata = schedule.len();
    let mut record = RunRecord {
        policy: config.policy,
        iterations: Vec::new(),
        stopped_early: false,
        aborted: None,
        frequencies: FrequencyTensor::new(strata),
        final_population: None,
    };

    let clock = Clock::start();
    let first = match rejection_abc(
        model,
        observed,
        schedule,
        schedule.eps(1),
        config.particles,
        config.seed,
        config.max_proposals,
    ) {
        Ok(r) => r,
        Err(e @ Error::ProposalCap { .. }) => {
            record.aborted = Some(e.to_string());
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    record.iterations.push(summarize(
        &first.population,
        first.generated,
        clock.seconds(),
        None,
        None,
        0,
        false,
    ));
    let mut population = first.population;
    let mut previous = record.frequencies.predictive_matrix(1);

    for t in 1..strata {
        let clock = Clock::start();
        let step = match smc_iteration(model, observed, &population, t, config, &record.frequencies)
        {
            Ok(s) => s,
            Err(e @ Error::ProposalCap { .. }) => {
                record.aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        record.frequencies.merge(&step.frequencies, t + 1)?;
        let current = record.frequencies.predictive_matrix(t + 1);
        let check = should_stop(&record.frequencies, t + 1, &config.stopping);
        let kl = kl_target_vs_current(&current, t + 1);
        let kl_step = kl_consecutive(&previous, &current, t + 1);
        let target_count = current.column_total(strata);
        record.iterations.push(summarize(
            &step.population,
            step.generated,
            clock.seconds(),
            kl,
            kl_step,
            target_count,
            check.stop,
        ));
        population = step.population;
        previous = current;
        if config.stopping.enabled && check.stop && t + 1 < strata {
            record.stopped_early = true;
            break;
        }
    }
    record.final_population = Some(population);
    Ok(record)
}
