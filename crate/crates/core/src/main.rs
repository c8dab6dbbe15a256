use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use strata_abc::bench::{
    parse_threshold_list, run_experiment, write_outputs, RawConfig, ThresholdValue, PROFILE_NAMES,
};
use strata_abc::models::{model_by_name, LvConfig, MODEL_NAMES};
use strata_abc::Error;

/// Stratified-distance ABC-SMC benchmark runner.
#[derive(Parser)]
#[command(name = "strata-abc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write result files.
    Run(Overrides),
    /// List available models and profiles.
    ListModels,
    /// Check a configuration without running it.
    Validate(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON config file with flat keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied underneath the config file.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Kernel policy; repeat or comma-separate for several.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    particles: Option<usize>,
    /// Comma-separated thresholds, e.g. `inf,100,50`.
    #[arg(long, allow_hyphen_values = true)]
    thresholds: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $STRATA_ABC_OUT or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable the stopping rule with this divergence threshold.
    #[arg(long)]
    stop_kl: Option<f64>,
    #[arg(long)]
    stop_min_count: Option<u64>,
    #[arg(long)]
    max_proposals: Option<u64>,
}

impl Overrides {
    fn resolve(&self) -> Result<strata_abc::bench::ExperimentConfig, Error> {
        let file = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let thresholds = self
            .thresholds
            .as_deref()
            .map(parse_threshold_list)
            .transpose()?
            .map(|v| v.into_iter().map(ThresholdValue::from_f64).collect());
        let flags = RawConfig {
            profile: self.profile.clone(),
            model: self.model.clone(),
            thresholds,
            particles: self.particles,
            methods: (!self.methods.is_empty()).then(|| self.methods.clone()),
            reps: self.reps,
            seed: self.seed,
            out: self.out.clone(),
            stop_kl: self.stop_kl,
            stop_min_count: self.stop_min_count,
            max_proposals: self.max_proposals,
            stopping: self.stop_kl.map(|_| true),
            ..RawConfig::default()
        };
        file.overlay(&flags).resolve()
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::Schedule(_) | Error::UnknownModel(_)
    )
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    if is_config_error(&e) {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListModels => {
            for name in MODEL_NAMES {
                let model = model_by_name(name, LvConfig::default()).expect("registered model");
                println!("{name}\t{}", model.parameter_names().join(","));
            }
            println!();
            println!("profiles: {}", PROFILE_NAMES.join(", "));
            ExitCode::SUCCESS
        }
        Command::Validate(o) => match o.resolve() {
            Ok(cfg) => {
                let text = serde_json::to_string_pretty(&cfg.to_raw()).expect("serializable");
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run(o) => {
            let cfg = match o.resolve() {
                Ok(cfg) => cfg,
                Err(e) => return fail(e),
            };
            let result = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let table = result.aggregate();
            if let Err(e) = write_outputs(&result, &table, &cfg.out) {
                return fail(e);
            }
            for row in table
                .cumulative
                .iter()
                .filter(|r| r.iteration == cfg.smc.schedule.len())
            {
                println!(
                    "{:<18} median simulations {:>12.0}  (q25 {:.0}, q75 {:.0})",
                    row.policy.as_str(),
                    row.spread.median,
                    row.spread.q25,
                    row.spread.q75
                );
            }
            println!("results written to {}", cfg.out.display());
            let aborted: Vec<String> = result
                .repetitions
                .iter()
                .flat_map(|rep| {
                    rep.runs.iter().filter_map(move |r| {
                        r.aborted
                            .as_ref()
                            .map(|msg| format!("repetition {} {}: {msg}", rep.index, r.policy))
                    })
                })
                .collect();
            if aborted.is_empty() {
                ExitCode::SUCCESS
            } else {
                for line in &aborted {
                    eprintln!("aborted: {line}");
                }
                ExitCode::from(2)
            }
        }
    }
}
