//! Experiment orchestration: seeded Monte-Carlo trials, parameter sweeps,
//! aggregation, and CSV emission.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beampattern::{BeampatternSpec, QuadraticForm};
use crate::channel::draw_channel;
use crate::combiner::{design_all, LmbcSettings};
use crate::config::{Objective, SystemConfig};
use crate::error::{Error, Result};
use crate::gmse::gm_sequential;
use crate::metrics::{evaluate, EvaluationReport};
use crate::precoder::{design_hybrid, HybridDesign};

/// Outcome of one Monte-Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub report: EvaluationReport,
    /// Beampattern MSE of the RF precoder (the quantity the budget binds).
    pub psi_rf: f64,
    /// The RF design could not meet the MSE budget.
    pub infeasible: bool,
}

/// One aggregated row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub trials: usize,
    pub mean_sum_se: f64,
    pub std_sum_se: f64,
    pub mean_gm_se: f64,
    pub mean_min_rate: f64,
    pub mean_psi_db: f64,
    pub infeasible_frac: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// splitmix64 mixing step, used to derive independent trial seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Trial seed from (master seed, sweep index, trial index); adding sweep
/// values never perturbs existing trials.
pub fn trial_seed(master: u64, sweep_idx: usize, trial_idx: usize) -> u64 {
    let mut state =
        master.wrapping_add((sweep_idx as u64).wrapping_mul(0x9e3779b97f4a7c15));
    let mixed = splitmix64(&mut state);
    let mut state2 =
        mixed.wrapping_add((trial_idx as u64).wrapping_mul(0x9e3779b97f4a7c15));
    splitmix64(&mut state2)
}

/// Cached per-scenario objects shared across trials of one sweep value.
pub struct Scenario {
    pub config: SystemConfig,
    pub spec: BeampatternSpec,
    pub qf: Option<QuadraticForm>,
}

impl Scenario {
    pub fn build(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let spec = BeampatternSpec::from_config(&config)?;
        let qf = if config.n_targets > 0 && config.epsilon_linear().is_finite() {
            Some(spec.build_quadratic_form()?)
        } else {
            None
        };
        Ok(Scenario { config, spec, qf })
    }
}

/// Run one fully deterministic trial: channel draws, the selected pipeline,
/// blind combiners, evaluation.
pub fn run_trial(scenario: &Scenario, seed: u64) -> Result<TrialOutcome> {
    let config = &scenario.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels: Vec<_> = (0..config.n_users)
        .map(|m| draw_channel(config, m, &mut rng))
        .collect::<Result<_>>()?;
    let sigma2 = config.noise_power();

    let (design, report): (HybridDesign, EvaluationReport) = match config.objective {
        Objective::SumSe => {
            let design = design_hybrid(
                &channels,
                &scenario.spec,
                scenario.qf.as_ref(),
                config,
                &mut rng,
                None,
                None,
            )?;
            let combiners =
                design_all(&channels, sigma2, &LmbcSettings::from_solver(&config.solver))?;
            let report = evaluate(&design, &combiners, &channels, &scenario.spec, sigma2)?;
            (design, report)
        }
        Objective::GmSe => {
            let (design, _, report, _) = gm_sequential(
                &channels,
                &scenario.spec,
                scenario.qf.as_ref(),
                config,
                &mut rng,
            )?;
            (design, report)
        }
    };
    Ok(TrialOutcome {
        psi_rf: design.psi_achieved,
        infeasible: design.diagnostics.infeasible,
        report,
    })
}

/// Run a parameter sweep; per value, `n_trials` trials with derived seeds.
pub fn run_sweep(base: &SystemConfig, param: &str, values: &[f64]) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(values.len());
    for (sweep_idx, &value) in values.iter().enumerate() {
        let config = base.with_param(param, value)?;
        let scenario = Scenario::build(config)?;
        let n = scenario.config.n_trials;
        let mut sum_se = Vec::with_capacity(n);
        let mut gm_se = Vec::with_capacity(n);
        let mut min_rate = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        let mut infeasible = 0usize;
        for trial_idx in 0..n {
            let seed = trial_seed(scenario.config.seed, sweep_idx, trial_idx);
            let outcome = run_trial(&scenario, seed)?;
            sum_se.push(outcome.report.sum_se);
            gm_se.push(outcome.report.gm_se);
            min_rate.push(outcome.report.min_rate);
            psi.push(outcome.psi_rf);
            if outcome.infeasible {
                infeasible += 1;
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let m_sum = mean(&sum_se);
        let var = sum_se
            .iter()
            .map(|x| (x - m_sum) * (x - m_sum))
            .sum::<f64>()
            / sum_se.len().max(1) as f64;
        let mean_psi = mean(&psi);
        rows.push(SweepRow {
            param: param.to_string(),
            value,
            trials: n,
            mean_sum_se: m_sum,
            std_sum_se: var.sqrt(),
            mean_gm_se: mean(&gm_se),
            mean_min_rate: mean(&min_rate),
            mean_psi_db: if mean_psi > 0.0 {
                10.0 * mean_psi.log10()
            } else {
                f64::NEG_INFINITY
            },
            infeasible_frac: infeasible as f64 / n.max(1) as f64,
        });
    }
    Ok(SweepResult { rows })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Format a float with 9 significant digits.
fn fmt(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// Write the sweep CSV (fixed column order).
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::from(
        "param,value,trials,mean_sum_se,std_sum_se,mean_gm_se,mean_min_rate,mean_psi_db,infeasible_frac\n",
    );
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.param,
            fmt(r.value),
            r.trials,
            fmt(r.mean_sum_se),
            fmt(r.std_sum_se),
            fmt(r.mean_gm_se),
            fmt(r.mean_min_rate),
            fmt(r.mean_psi_db),
            fmt(r.infeasible_frac),
        ));
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Write a single-trial report as a small CSV of per-user rows plus totals.
pub fn write_report_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut out = String::from("metric,user,value\n");
    for (m, (s, r)) in report
        .per_user_sinr
        .iter()
        .zip(&report.per_user_rate)
        .enumerate()
    {
        out.push_str(&format!("sinr,{m},{}\n", fmt(*s)));
        out.push_str(&format!("rate,{m},{}\n", fmt(*r)));
    }
    out.push_str(&format!("sum_se,,{}\n", fmt(report.sum_se)));
    out.push_str(&format!("gm_se,,{}\n", fmt(report.gm_se)));
    out.push_str(&format!("min_rate,,{}\n", fmt(report.min_rate)));
    out.push_str(&format!("psi,,{}\n", fmt(report.psi)));
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Write the achieved beampattern (one row per grid angle, gains in dB).
pub fn write_beampattern_csv(pattern: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut out = String::from("angle_deg,gain_db\n");
    for &(angle, gain) in pattern {
        let db = if gain > 0.0 {
            10.0 * gain.log10()
        } else {
            f64::NEG_INFINITY
        };
        out.push_str(&format!("{},{}\n", fmt(angle), fmt(db)));
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Write the RF-design convergence trace (iteration, penalized cost).
pub fn write_trace_csv(trace: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt(*v)));
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}
