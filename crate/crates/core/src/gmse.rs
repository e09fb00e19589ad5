//! Geometric-mean-SE maximization via sequential weighted redesigns.
//!
//! Each round linearizes the GM objective at the current rates, turns the
//! linearization slopes into per-user weights, and reruns the whole hybrid
//! design (weighted LS target, ZF, NSP, power projection, blind combiners)
//! until the GM-SE stalls.

use rand::Rng;

use crate::beampattern::{BeampatternSpec, QuadraticForm};
use crate::channel::ChannelRealization;
use crate::combiner::{design_all, CombinerSet, LmbcSettings};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvaluationReport};
use crate::precoder::{design_hybrid, HybridDesign};

/// One round of the sequential GM loop.
#[derive(Debug, Clone)]
pub struct GmState {
    pub iteration: usize,
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
    /// f = 1 / GM(rates), the linearization constant.
    pub f_value: f64,
    /// (sum_se, gm_se, min_rate) after this round's redesign.
    pub history: (f64, f64, f64),
}

/// Linearization weights: f = 1/GM(rates), rho_m = f / rates_m.
pub fn gm_weights(rates: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Some(idx) = rates.iter().position(|&r| r <= 0.0) {
        return Err(Error::ZeroRate(idx));
    }
    let m = rates.len() as f64;
    let log_gm: f64 = rates.iter().map(|r| r.ln()).sum::<f64>() / m;
    let f = (-log_gm).exp();
    let rho = rates.iter().map(|&r| f / r).collect();
    Ok((rho, f))
}

/// Run the sequential weighted GM-SE loop; returns the best design seen (by
/// GM-SE), its combiners and report, and the per-round history.
pub fn gm_sequential(
    channels: &[ChannelRealization],
    spec: &BeampatternSpec,
    qf: Option<&QuadraticForm>,
    config: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<(HybridDesign, CombinerSet, EvaluationReport, Vec<GmState>)> {
    let sigma2 = config.noise_power();
    let lmbc = LmbcSettings::from_solver(&config.solver);
    let floor = config.solver.rate_floor;

    // Round 0: the unweighted sum-SE pipeline provides the starting rates.
    let design0 = design_hybrid(channels, spec, qf, config, rng, None, None)?;
    let combiners0 = design_all(channels, sigma2, &lmbc)?;
    let report0 = evaluate(&design0, &combiners0, channels, spec, sigma2)?;

    let mut best = (design0, combiners0, report0.clone());
    // Warm-start each weighted redesign from the previous RF precoder so the
    // loop refines one trajectory instead of restarting from random phases.
    let mut warm_rf = best.0.f_rf.clone();
    let mut rates = report0.per_user_rate.clone();
    let mut gm_prev = report0.gm_se;
    let mut history = Vec::new();

    for iteration in 1..=config.solver.gm_max_iters {
        // Floor relative to the strongest user so the clamp is scale
        // invariant; an absolute floor would flatten the weights whenever the
        // operating point pushes every rate below it.
        let scale = rates.iter().cloned().fold(0.0f64, f64::max);
        let floored: Vec<f64> = rates.iter().map(|&r| r.max(floor * scale)).collect();
        let (weights, f_value) = gm_weights(&floored)?;

        // Only the relative weight magnitudes shape the LS target direction;
        // dividing by the largest weight keeps the matching objective at the
        // same numeric scale as the unweighted problem so the line search
        // operates on sane step sizes.
        let wmax = weights.iter().cloned().fold(0.0f64, f64::max);
        let normalized: Vec<f64> = weights.iter().map(|w| w / wmax).collect();

        // A refinement round can steer the RF precoder into a corner where a
        // downstream stage degenerates (singular effective channel, rank
        // deficiency). The loop already holds a valid design, so numeric
        // failures end the refinement instead of failing the trial.
        let design =
            match design_hybrid(channels, spec, qf, config, rng, Some(&warm_rf), Some(&normalized)) {
                Ok(d) => d,
                Err(
                    Error::SingularChannel(_)
                    | Error::RankDeficient(_)
                    | Error::Numeric(_)
                    | Error::DegenerateChannel(_),
                ) => break,
                Err(e) => return Err(e),
            };
        let combiners = design_all(channels, sigma2, &lmbc)?;
        let report = evaluate(&design, &combiners, channels, spec, sigma2)?;
        history.push(GmState {
            iteration,
            rates: floored,
            weights,
            f_value,
            history: (report.sum_se, report.gm_se, report.min_rate),
        });

        rates = report.per_user_rate.clone();
        warm_rf = design.f_rf.clone();
        let gm_new = report.gm_se;
        if gm_new >= best.2.gm_se {
            best = (design, combiners, report);
        }
        let rel = (gm_new - gm_prev).abs() / gm_prev.abs().max(1e-30);
        gm_prev = gm_new;
        // Uniform weights (always the case for M = 1) make the weighted
        // problem identical to the round just solved, so iterating further
        // only re-polishes the same objective.
        let uniform = normalized.iter().all(|w| (w - 1.0).abs() < 1e-9);
        if rel < config.solver.gm_tol || uniform {
            break;
        }
    }

    let (design, combiners, report) = best;
    Ok((design, combiners, report, history))
}
