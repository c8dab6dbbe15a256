//! Paired repetitions across kernel policies and their aggregation.

use serde::Serialize;

use crate::error::Result;
use crate::kernels::KernelPolicy;
use crate::models::{make_observed, model_by_name};
use crate::parallel::map_slice;
use crate::rng::repetition_seed;
use crate::smc::{run, RunRecord};

use super::config::ExperimentConfig;

/// All policies run on one observed dataset with one seed.
#[derive(Debug, Clone)]
pub struct Repetition {
    pub index: usize,
    pub seed: u64,
    pub observed: Vec<f64>,
    /// In the order of `ExperimentConfig::methods`.
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub parameter_names: Vec<String>,
    pub repetitions: Vec<Repetition>,
}

impl ExperimentResult {
    pub fn runs_for(&self, policy: KernelPolicy) -> impl Iterator<Item = &RunRecord> + '_ {
        self.repetitions
            .iter()
            .filter_map(move |r| r.runs.iter().find(|run| run.policy == policy))
    }

    pub fn aggregate(&self) -> AggregateTable {
        AggregateTable::build(self)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = model_by_name(&config.model, config.lv)?;
    let indices: Vec<usize> = (0..config.reps).collect();
    let reps = map_slice(&indices, |&index| -> Result<Repetition> {
        let seed = repetition_seed(config.smc.seed, index);
        let observed = make_observed(model.as_ref(), seed)?;
        let runs = config
            .methods
            .iter()
            .map(|&policy| run(model.as_ref(), &observed, &config.smc_for(policy, seed)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Repetition {
            index,
            seed,
            observed,
            runs,
        })
    });
    Ok(ExperimentResult {
        config: config.clone(),
        parameter_names: model
            .parameter_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        repetitions: reps.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles across repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            median: quantile_sorted(&v, 0.5),
            q25: quantile_sorted(&v, 0.25),
            q75: quantile_sorted(&v, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRow {
    pub policy: KernelPolicy,
    pub iteration: usize,
    /// Repetitions that reached this iteration.
    pub reps: usize,
    pub spread: Spread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorRow {
    pub policy: KernelPolicy,
    pub iteration: usize,
    pub parameter: String,
    pub reps: usize,
    pub mean: Spread,
    pub sd: Spread,
}

impl PosteriorRow {
    /// Median mean plus and minus 1.96 median standard deviations.
    pub fn band(&self) -> (f64, f64) {
        (
            self.mean.median - 1.96 * self.sd.median,
            self.mean.median + 1.96 * self.sd.median,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub policy: KernelPolicy,
    pub iteration: usize,
    pub reps: usize,
    pub kl: Option<Spread>,
    pub kl_consecutive: Option<Spread>,
    pub stop_signals: usize,
}

/// Per-policy, per-iteration summaries across repetitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregateTable {
    pub acceptance: Vec<ScalarRow>,
    pub cumulative: Vec<ScalarRow>,
    pub posterior: Vec<PosteriorRow>,
    pub kl: Vec<KlRow>,
}

impl AggregateTable {
    pub fn build(result: &ExperimentResult) -> Self {
        let mut table = Self::default();
        let t_max = result.config.smc.schedule.len();
        for &policy in &result.config.methods {
            let runs: Vec<&RunRecord> = result.runs_for(policy).collect();
            let cumulative: Vec<Vec<u64>> = runs.iter().map(|r| r.cumulative_generated()).collect();
            for t in 1..=t_max {
                let present: Vec<(usize, &RunRecord)> = runs
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.iterations.len() >= t)
                    .map(|(i, r)| (i, *r))
                    .collect();
                if present.is_empty() {
                    continue;
                }
                let reps = present.len();
                let recs: Vec<_> = present.iter().map(|(_, r)| &r.iterations[t - 1]).collect();

                let rates: Vec<f64> = recs.iter().map(|r| r.acceptance_rate).collect();
                table.acceptance.push(ScalarRow {
                    policy,
                    iteration: t,
                    reps,
                    spread: Spread::of(&rates).expect("non-empty"),
                });
                let cum: Vec<f64> = present
                    .iter()
                    .map(|(i, _)| cumulative[*i][t - 1] as f64)
                    .collect();
                table.cumulative.push(ScalarRow {
                    policy,
                    iteration: t,
                    reps,
                    spread: Spread::of(&cum).expect("non-empty"),
                });
                for (p, name) in result.parameter_names.iter().enumerate() {
                    let means: Vec<f64> = recs.iter().map(|r| r.mean[p]).collect();
                    let sds: Vec<f64> = recs.iter().map(|r| r.sd[p]).collect();
                    if let (Some(mean), Some(sd)) = (Spread::of(&means), Spread::of(&sds)) {
                        table.posterior.push(PosteriorRow {
                            policy,
                            iteration: t,
                            parameter: name.clone(),
                            reps,
                            mean,
                            sd,
                        });
                    }
                }
                let kl: Vec<f64> = recs.iter().filter_map(|r| r.kl).collect();
                let klc: Vec<f64> = recs.iter().filter_map(|r| r.kl_consecutive).collect();
                table.kl.push(KlRow {
                    policy,
                    iteration: t,
                    reps,
                    kl: Spread::of(&kl),
                    kl_consecutive: Spread::of(&klc),
                    stop_signals: recs.iter().filter(|r| r.stop_signal).count(),
                });
            }
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 0.75), 3.25);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn spread_ignores_nan_and_empty() {
        assert!(Spread::of(&[]).is_none());
        assert!(Spread::of(&[f64::NAN]).is_none());
        let s = Spread::of(&[3.0, f64::NAN, 1.0, 2.0]).unwrap();
        assert_eq!((s.q25, s.median, s.q75), (1.5, 2.0, 2.5));
    }
}
