//! Command-line driver: single trials, parameter sweeps, beampattern export,
//! and solver convergence traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isac_beam::channel::draw_channel;
use isac_beam::config::{Objective, SystemConfig};
use isac_beam::error::{Error, Result};
use isac_beam::precoder::{optimal_digital_precoder, random_rf_init, rmcg_rf_design, RmcgSettings};
use isac_beam::runner::{
    run_sweep, run_trial, trial_seed, write_beampattern_csv, write_report_csv, write_sweep_csv,
    write_trace_csv, Scenario,
};

#[derive(Parser)]
#[command(name = "isac-beam", about = "Hybrid ISAC beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single Monte-Carlo trial and write its report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        objective: Option<Objective>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter over a list of values, averaging over trials.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        objective: Option<Objective>,
        /// One of: snr_db, epsilon_db, n_users, n_targets, n_rf.
        #[arg(long)]
        param: String,
        /// Comma-separated numeric values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the achieved transmit beampattern of one designed trial.
    Beampattern {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "epsilon-db", allow_negative_numbers = true)]
        epsilon_db: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the RF-design inner convergence trace.
    Convergence {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<SystemConfig> {
    let config = match path {
        None => SystemConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("cannot parse {}: {e}", p.display())))?
        }
    };
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            objective,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = objective {
                cfg.objective = o;
            }
            let scenario = Scenario::build(cfg)?;
            let outcome = run_trial(&scenario, trial_seed(scenario.config.seed, 0, 0))?;
            write_report_csv(&outcome.report, &out)?;
            if outcome.infeasible {
                eprintln!("warning: beampattern MSE budget not met (psi = {:.3e})", outcome.psi_rf);
            }
            Ok(())
        }
        Command::Sweep {
            config,
            seed,
            objective,
            param,
            values,
            trials,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = objective {
                cfg.objective = o;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if values.is_empty() {
                return Err(Error::Config("--values must not be empty".into()));
            }
            let result = run_sweep(&cfg, &param, &values)?;
            write_sweep_csv(&result, &out)
        }
        Command::Beampattern {
            config,
            seed,
            epsilon_db,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epsilon_db {
                cfg.epsilon_db = e;
            }
            let scenario = Scenario::build(cfg)?;
            let outcome = run_trial(&scenario, trial_seed(scenario.config.seed, 0, 0))?;
            write_beampattern_csv(&outcome.report.beampattern, &out)
        }
        Command::Convergence {
            config,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let scenario = Scenario::build(cfg)?;
            let cfg = &scenario.config;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0, 0));
            let channels: Vec<_> = (0..cfg.n_users)
                .map(|m| draw_channel(cfg, m, &mut rng))
                .collect::<Result<_>>()?;
            let f_opt = optimal_digital_precoder(&channels)?;
            let settings = RmcgSettings::from_config(cfg);
            let init = random_rf_init(cfg.n_tx, cfg.n_rf(), &mut rng);
            let (_, _, diag) = rmcg_rf_design(
                &f_opt,
                &scenario.spec,
                scenario.qf.as_ref(),
                &settings,
                Some(&init),
                &mut rng,
                None,
            )?;
            write_trace_csv(&diag.inner_trace, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
