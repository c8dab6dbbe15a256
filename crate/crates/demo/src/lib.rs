//! Browser bindings: a toy SMC run per policy, g-and-k quantile curves and
//! Lotka-Volterra sample paths. Results are returned as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use strata_abc::kernels::KernelPolicy;
use strata_abc::models::{
    gk_quantile, make_observed, simulate_trajectory, GaussianToy, LotkaVolterra, LvConfig,
};
use strata_abc::rng::RngStream;
use strata_abc::{run, SmcConfig, ThresholdSchedule};

const MAX_PARTICLES: usize = 20_000;

#[derive(Serialize)]
struct IterationView {
    iteration: usize,
    epsilon: f64,
    acceptance_rate: f64,
    cumulative: u64,
    mean: f64,
    sd: f64,
}

#[derive(Serialize)]
struct PolicyView {
    policy: &'static str,
    iterations: Vec<IterationView>,
    aborted: Option<String>,
    /// Final particles as `[theta, weight]` pairs.
    particles: Vec<[f64; 2]>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn parse_thresholds(text: &str) -> Result<ThresholdSchedule, String> {
    let values = text
        .split(',')
        .map(|t| match t.trim() {
            "inf" | "Infinity" => Ok(f64::INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|_| format!("bad threshold `{other}`")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    ThresholdSchedule::new(values).map_err(|e| e.to_string())
}

fn toy_runs(thresholds: &str, particles: usize, seed: u64) -> Result<Vec<PolicyView>, String> {
    if particles == 0 || particles > MAX_PARTICLES {
        return Err(format!("particles must be in 1..={MAX_PARTICLES}"));
    }
    let schedule = parse_thresholds(thresholds)?;
    let model = GaussianToy::new();
    let observed = make_observed(&model, seed).map_err(|e| e.to_string())?;
    KernelPolicy::ALL
        .iter()
        .map(|&policy| {
            let mut config = SmcConfig::new(schedule.clone(), particles, policy, seed);
            config.max_proposals = 2_000_000;
            let record = run(&model, &observed, &config).map_err(|e| e.to_string())?;
            let cumulative = record.cumulative_generated();
            Ok(PolicyView {
                policy: policy.as_str(),
                iterations: record
                    .iterations
                    .iter()
                    .zip(cumulative)
                    .map(|(it, cum)| IterationView {
                        iteration: it.iteration,
                        epsilon: schedule.eps(it.iteration + 1),
                        acceptance_rate: it.acceptance_rate,
                        cumulative: cum,
                        mean: it.mean[0],
                        sd: it.sd[0],
                    })
                    .collect(),
                aborted: record.aborted.clone(),
                particles: record
                    .final_population
                    .map(|pop| {
                        pop.particles
                            .iter()
                            .map(|p| [p.theta[0], p.weight])
                            .collect()
                    })
                    .unwrap_or_default(),
            })
        })
        .collect()
}

/// Runs all four kernel policies on the Gaussian toy model.
/// `thresholds` is a comma-separated list such as `inf,4,3,2,1`.
#[wasm_bindgen]
pub fn toy_smc(thresholds: &str, particles: usize, seed: u64) -> Result<String, JsValue> {
    let runs = toy_runs(thresholds, particles, seed).map_err(|e| JsValue::from_str(&e))?;
    to_json(&runs)
}

/// Quantile function on `points` evenly spaced `z` values in `[-3, 3]`,
/// as `[[z, q], ...]`.
#[wasm_bindgen]
pub fn gk_curve(a: f64, b: f64, g: f64, k: f64, points: usize) -> Result<String, JsValue> {
    let n = points.clamp(2, 2000);
    let curve: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let z = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            [z, gk_quantile(z, a, b, g, k)]
        })
        .collect();
    to_json(&curve)
}

#[derive(Serialize)]
struct Trajectory {
    times: Vec<f64>,
    prey: Vec<f64>,
    predators: Vec<f64>,
    error: Option<String>,
}

/// One SSA path on the observation grid for the given log-rates.
#[wasm_bindgen]
pub fn lv_trajectory(log_r1: f64, log_r2: f64, log_r3: f64, seed: u64) -> Result<String, JsValue> {
    let config = LvConfig::default();
    let rates = LotkaVolterra::rates(&[log_r1, log_r2, log_r3]);
    let mut rng = RngStream::new(seed, 0).rng();
    let view = match simulate_trajectory(rates, &config, &mut rng, false) {
        Ok(t) => Trajectory {
            times: (0..t.grid_prey.len())
                .map(|i| i as f64 * config.grid_step)
                .collect(),
            prey: t.grid_prey,
            predators: t.grid_predators,
            error: None,
        },
        Err(e) => Trajectory {
            times: vec![],
            prey: vec![],
            predators: vec![],
            error: Some(e.to_string()),
        },
    };
    to_json(&view)
}
