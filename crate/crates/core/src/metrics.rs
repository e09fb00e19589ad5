//! Communication and sensing metrics for a completed design: per-user SINR
//! and rate, sum and geometric-mean spectral efficiency, minimum rate, and
//! the achieved beampattern of the full constrained precoder.

use crate::beampattern::BeampatternSpec;
use crate::channel::ChannelRealization;
use crate::combiner::CombinerSet;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::precoder::HybridDesign;

/// Everything the experiment driver records per trial.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_se: f64,
    pub gm_se: f64,
    pub min_rate: f64,
    /// Beampattern MSE of the full constrained precoder.
    pub psi: f64,
    /// (angle_deg, linear gain) over the evaluation grid.
    pub beampattern: Vec<(f64, f64)>,
    /// Set when a user rate is exactly zero (gm_se is reported as 0).
    pub zero_rate_user: Option<usize>,
}

/// SINR of user m under the full precoder; all other streams, including the
/// radar streams, count as interference.
pub fn sinr(
    m: usize,
    combiners: &CombinerSet,
    f_rf: &CMat,
    f_bb_hat: &CMat,
    channels: &[ChannelRealization],
    noise_var: f64,
) -> Result<f64> {
    if noise_var <= 0.0 {
        return Err(Error::Domain("noise variance must be positive".into()));
    }
    let w = &combiners.combiners[m];
    let row = w.adjoint() * &channels[m].matrix * f_rf; // 1 x M_t
    let k = f_bb_hat.ncols();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for n in 0..k {
        let p = (&row * f_bb_hat.column(n))[(0, 0)].norm_sqr();
        if n == m {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(signal / (interference + noise_var * w.norm_squared()))
}

/// Achievable rate log2(1 + SINR).
pub fn user_rate(sinr: f64) -> Result<f64> {
    if sinr < 0.0 {
        return Err(Error::Domain(format!("negative SINR {sinr}")));
    }
    Ok((1.0 + sinr).log2())
}

/// Geometric mean of the rates; zero with the offending index if any rate
/// is zero.
pub fn geometric_mean(rates: &[f64]) -> (f64, Option<usize>) {
    if let Some(idx) = rates.iter().position(|&r| r <= 0.0) {
        return (0.0, Some(idx));
    }
    let log_sum: f64 = rates.iter().map(|r| r.ln()).sum();
    ((log_sum / rates.len() as f64).exp(), None)
}

/// Full evaluation of a design against its channels.
pub fn evaluate(
    design: &HybridDesign,
    combiners: &CombinerSet,
    channels: &[ChannelRealization],
    spec: &BeampatternSpec,
    noise_var: f64,
) -> Result<EvaluationReport> {
    let m_users = channels.len();
    let mut per_user_sinr = Vec::with_capacity(m_users);
    let mut per_user_rate = Vec::with_capacity(m_users);
    for m in 0..m_users {
        let s = sinr(m, combiners, &design.f_rf, &design.f_bb_hat, channels, noise_var)?;
        per_user_sinr.push(s);
        per_user_rate.push(user_rate(s)?);
    }
    let sum_se: f64 = per_user_rate.iter().sum();
    let (gm_se, zero_rate_user) = geometric_mean(&per_user_rate);
    let min_rate = per_user_rate.iter().cloned().fold(f64::INFINITY, f64::min);

    let full = design.full_precoder();
    let gains = spec.gains_on_grid(&full);
    let beampattern: Vec<(f64, f64)> = spec
        .grid_angles_deg
        .iter()
        .cloned()
        .zip(gains.iter().cloned())
        .collect();
    let psi = if spec.desired_gains.iter().any(|&g| g > 0.0) {
        spec.psi_mse(&full)?
    } else {
        0.0
    };

    Ok(EvaluationReport {
        per_user_sinr,
        per_user_rate,
        sum_se,
        gm_se,
        min_rate,
        psi,
        beampattern,
        zero_rate_user,
    })
}
