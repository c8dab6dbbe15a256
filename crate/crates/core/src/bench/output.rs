//! CSV and JSON result files.
//!
//! Everything except `timings.csv` is a pure function of the resolved
//! config, so repeated runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelPolicy;
use crate::smc::IterationRecord;
use crate::stratify::FrequencyTensor;

use super::experiment::{AggregateTable, ExperimentResult, Spread};

pub const ACCEPTANCE_FILE: &str = "acceptance_rates.csv";
pub const CUMULATIVE_FILE: &str = "cumulative_samples.csv";
pub const POSTERIOR_FILE: &str = "posterior_summary.csv";
pub const KL_FILE: &str = "kl_trace.csv";
pub const RUNS_FILE: &str = "runs.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TIMINGS_FILE: &str = "timings.csv";

/// Files whose contents depend only on the config.
pub const DETERMINISTIC_FILES: [&str; 6] = [
    ACCEPTANCE_FILE,
    CUMULATIVE_FILE,
    POSTERIOR_FILE,
    KL_FILE,
    RUNS_FILE,
    CONFIG_FILE,
];

#[derive(Serialize)]
struct ScalarCsv {
    method: &'static str,
    iteration: usize,
    reps: usize,
    median: f64,
    q25: f64,
    q75: f64,
}

#[derive(Serialize)]
struct PosteriorCsv<'a> {
    method: &'static str,
    iteration: usize,
    parameter: &'a str,
    reps: usize,
    mean_median: f64,
    mean_q25: f64,
    mean_q75: f64,
    sd_median: f64,
    sd_q25: f64,
    sd_q75: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct KlCsv {
    method: &'static str,
    iteration: usize,
    reps: usize,
    kl_median: Option<f64>,
    kl_q25: Option<f64>,
    kl_q75: Option<f64>,
    kl_consecutive_median: Option<f64>,
    kl_consecutive_q25: Option<f64>,
    kl_consecutive_q75: Option<f64>,
    stop_signals: usize,
}

#[derive(Serialize)]
struct TimingCsv {
    repetition: usize,
    method: &'static str,
    iteration: usize,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct RunJson<'a> {
    method: KernelPolicy,
    stopped_early: bool,
    aborted: &'a Option<String>,
    iterations: &'a [IterationRecord],
    frequencies: &'a FrequencyTensor,
}

#[derive(Serialize)]
struct RepetitionJson<'a> {
    repetition: usize,
    seed: u64,
    observed: &'a [f64],
    runs: Vec<RunJson<'a>>,
}

#[derive(Serialize)]
struct RunsJson<'a> {
    model: &'a str,
    parameters: &'a [String],
    repetitions: Vec<RepetitionJson<'a>>,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Error::io(ctx(), std::io::Error::other(e)))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::io(ctx(), std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn split(s: Option<Spread>) -> (Option<f64>, Option<f64>, Option<f64>) {
    match s {
        Some(s) => (Some(s.median), Some(s.q25), Some(s.q75)),
        None => (None, None, None),
    }
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_outputs(
    result: &ExperimentResult,
    table: &AggregateTable,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = |name: &str| dir.join(name);

    let scalar = |rows: &[super::experiment::ScalarRow]| -> Vec<ScalarCsv> {
        rows.iter()
            .map(|r| ScalarCsv {
                method: r.policy.as_str(),
                iteration: r.iteration,
                reps: r.reps,
                median: r.spread.median,
                q25: r.spread.q25,
                q75: r.spread.q75,
            })
            .collect()
    };
    write_csv(&path(ACCEPTANCE_FILE), scalar(&table.acceptance))?;
    write_csv(&path(CUMULATIVE_FILE), scalar(&table.cumulative))?;

    write_csv(
        &path(POSTERIOR_FILE),
        table.posterior.iter().map(|r| {
            let (lower, upper) = r.band();
            PosteriorCsv {
                method: r.policy.as_str(),
                iteration: r.iteration,
                parameter: &r.parameter,
                reps: r.reps,
                mean_median: r.mean.median,
                mean_q25: r.mean.q25,
                mean_q75: r.mean.q75,
                sd_median: r.sd.median,
                sd_q25: r.sd.q25,
                sd_q75: r.sd.q75,
                lower,
                upper,
            }
        }),
    )?;

    write_csv(
        &path(KL_FILE),
        table.kl.iter().map(|r| {
            let (kl_median, kl_q25, kl_q75) = split(r.kl);
            let (kl_consecutive_median, kl_consecutive_q25, kl_consecutive_q75) =
                split(r.kl_consecutive);
            KlCsv {
                method: r.policy.as_str(),
                iteration: r.iteration,
                reps: r.reps,
                kl_median,
                kl_q25,
                kl_q75,
                kl_consecutive_median,
                kl_consecutive_q25,
                kl_consecutive_q75,
                stop_signals: r.stop_signals,
            }
        }),
    )?;

    let runs = RunsJson {
        model: &result.config.model,
        parameters: &result.parameter_names,
        repetitions: result
            .repetitions
            .iter()
            .map(|rep| RepetitionJson {
                repetition: rep.index,
                seed: rep.seed,
                observed: &rep.observed,
                runs: rep
                    .runs
                    .iter()
                    .map(|r| RunJson {
                        method: r.policy,
                        stopped_early: r.stopped_early,
                        aborted: &r.aborted,
                        iterations: &r.iterations,
                        frequencies: &r.frequencies,
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(&path(RUNS_FILE), &runs)?;
    write_json(&path(CONFIG_FILE), &result.config.to_raw())?;

    write_csv(
        &path(TIMINGS_FILE),
        result.repetitions.iter().flat_map(|rep| {
            rep.runs.iter().flat_map(move |r| {
                r.iterations.iter().map(move |it| TimingCsv {
                    repetition: rep.index,
                    method: r.policy.as_str(),
                    iteration: it.iteration,
                    wall_seconds: it.wall_seconds,
                })
            })
        }),
    )?;

    let mut written: Vec<PathBuf> = DETERMINISTIC_FILES.iter().map(|f| path(f)).collect();
    written.push(path(TIMINGS_FILE));
    Ok(written)
}
