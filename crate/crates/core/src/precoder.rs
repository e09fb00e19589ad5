//! Two-stage hybrid transmit precoder design.
//!
//! The RF precoder lives on the constant-modulus manifold and is found by a
//! penalized Riemannian CG that tracks the convexified beampattern-MSE
//! constraint (outer MM loop rebuilds the surrogate, an inner RCG minimizes
//! the penalized matching objective). The baseband stages are least squares
//! against the per-user optimal digital precoder, zero forcing across users,
//! a null-space projection for the radar streams, and a final scaled-unitary
//! power projection.

use num_complex::Complex64;
use rand::Rng;

use crate::beampattern::{BeampatternSpec, QuadraticForm};
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, hermitian_eigen_desc, solve_hpd, thin_svd, CMat};
use crate::manifold::{ManifoldPoint, RcgSettings};
use crate::mm_surrogate::{surrogate_coeffs, surrogate_grad, surrogate_value};

/// Complete hybrid design for one channel realization.
#[derive(Debug, Clone)]
pub struct HybridDesign {
    /// Constant-modulus RF precoder, N_t x M_t.
    pub f_rf: CMat,
    /// Stage-1 LS baseband, M_t x M.
    pub f_bb1: CMat,
    /// Stage-2 ZF baseband, M x M.
    pub f_bb2: CMat,
    /// Radar baseband from the null-space projection, M_t x L.
    pub f_bb_radar: CMat,
    /// Power-constrained combined baseband, M_t x K.
    pub f_bb_hat: CMat,
    pub beta: f64,
    /// Beampattern MSE of the RF precoder.
    pub psi_achieved: f64,
    pub diagnostics: RmcgDiagnostics,
}

impl HybridDesign {
    /// Full transmit precoder F_RF * F_BB_hat (N_t x K).
    pub fn full_precoder(&self) -> CMat {
        &self.f_rf * &self.f_bb_hat
    }
}

/// Settings of the outer penalized MM loop around the inner RCG.
#[derive(Debug, Clone)]
pub struct RmcgSettings {
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    pub penalty_mu0: f64,
    pub penalty_growth: f64,
    pub inner: RcgSettings,
}

impl RmcgSettings {
    pub fn from_config(config: &SystemConfig) -> Self {
        let s = &config.solver;
        RmcgSettings {
            outer_tol: s.outer_tol,
            max_outer_iters: s.max_outer_iters,
            penalty_mu0: s.penalty_mu0,
            penalty_growth: s.penalty_growth,
            inner: RcgSettings {
                grad_tol: s.grad_tol,
                max_inner_iters: s.max_inner_iters,
                armijo_shrink: s.armijo_shrink,
                armijo_slope: s.armijo_slope,
                initial_step: s.initial_step,
                pr_restart: true,
            },
        }
    }
}

impl Default for RmcgSettings {
    fn default() -> Self {
        Self::from_config(&SystemConfig::default())
    }
}

/// Traces recorded while designing the RF precoder.
#[derive(Debug, Clone, Default)]
pub struct RmcgDiagnostics {
    /// Matching objective per outer iteration.
    pub objective_trace: Vec<f64>,
    /// True beampattern MSE per outer iteration.
    pub psi_trace: Vec<f64>,
    /// Penalized-cost trace concatenated across inner RCG runs.
    pub inner_trace: Vec<f64>,
    /// Set when the final design exceeds the MSE budget.
    pub infeasible: bool,
}

/// Column m is the leading right singular vector of user m's channel.
pub fn optimal_digital_precoder(channels: &[ChannelRealization]) -> Result<CMat> {
    if channels.is_empty() {
        return Err(Error::Config("at least one user channel required".into()));
    }
    let n_tx = channels[0].matrix.ncols();
    let mut f = CMat::zeros(n_tx, channels.len());
    for (m, ch) in channels.iter().enumerate() {
        if ch.singular_values.first().copied().unwrap_or(0.0) <= 0.0 {
            return Err(Error::DegenerateChannel(format!(
                "user {m} channel has zero gain"
            )));
        }
        f.set_column(m, &ch.dominant_right());
    }
    Ok(f)
}

/// Random constant-modulus initializer with independent uniform phases.
pub fn random_rf_init(n_tx: usize, m_t: usize, rng: &mut impl Rng) -> CMat {
    let modulus = 1.0 / (n_tx as f64).sqrt();
    CMat::from_fn(n_tx, m_t, |_, _| {
        Complex64::from_polar(modulus, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// Constant-modulus start point that already points beams where they are
/// needed: the first M columns carry the phases of the per-user optimal
/// precoder, the rest are target steering vectors (cycled when M_t - M
/// exceeds L). Steering vectors are constant-modulus by construction, so the
/// point is exactly feasible. A random start instead spreads its energy as
/// flat speckle, a local basin the penalized search rarely escapes.
pub fn sensing_aware_init(f_opt: &CMat, spec: &BeampatternSpec, m_t: usize) -> Result<CMat> {
    let n_tx = f_opt.nrows();
    let m = f_opt.ncols();
    let modulus = 1.0 / (n_tx as f64).sqrt();
    let geometry = crate::channel::UlaGeometry::half_wavelength(n_tx)?;
    let mut init = CMat::zeros(n_tx, m_t);
    for j in 0..m.min(m_t) {
        for i in 0..n_tx {
            init[(i, j)] = Complex64::from_polar(modulus, f_opt[(i, j)].arg());
        }
    }
    let targets = &spec.target_angles_deg;
    for j in m..m_t {
        if targets.is_empty() {
            for i in 0..n_tx {
                init[(i, j)] = Complex64::from_polar(modulus, f_opt[(i, j % m)].arg());
            }
        } else {
            let angle = targets[(j - m) % targets.len()];
            init.set_column(j, &crate::channel::ula_response(geometry, angle));
        }
    }
    Ok(init)
}

/// Stage-1 least-squares baseband (optionally weighted target F_opt * diag(w)).
pub fn bb_stage1_ls(f_rf: &CMat, f_opt: &CMat, weight: Option<&[f64]>) -> Result<CMat> {
    let target = apply_column_weights(f_opt, weight);
    let gram = f_rf.adjoint() * f_rf;
    // Condition check on the Gram before solving.
    let (evals, _) = hermitian_eigen_desc(&gram);
    let emax = evals.first().copied().unwrap_or(0.0);
    let emin = evals.last().copied().unwrap_or(0.0);
    if emin <= 0.0 || emax / emin > 1e12 {
        return Err(Error::RankDeficient(
            "RF precoder columns are numerically dependent".into(),
        ));
    }
    solve_hpd(&gram, &(f_rf.adjoint() * target), "stage-1 LS")
}

fn apply_column_weights(f_opt: &CMat, weight: Option<&[f64]>) -> CMat {
    match weight {
        None => f_opt.clone(),
        Some(w) => {
            let mut out = f_opt.clone();
            for (j, &wj) in w.iter().enumerate() {
                out.column_mut(j).scale_mut(wj);
            }
            out
        }
    }
}

/// RF precoder via the penalized Riemannian CG with an MM-refreshed surrogate.
///
/// Pass `qf = None` (or an infinite `spec.epsilon`) to disable the sensing
/// constraint. Returns the RF precoder, the matching stage-1 baseband, and
/// the solver diagnostics.
pub fn rmcg_rf_design(
    f_opt: &CMat,
    spec: &BeampatternSpec,
    qf: Option<&QuadraticForm>,
    settings: &RmcgSettings,
    init: Option<&CMat>,
    rng: &mut impl Rng,
    weight: Option<&[f64]>,
) -> Result<(CMat, CMat, RmcgDiagnostics)> {
    let n_tx = f_opt.nrows();
    let m_t = init.map_or(f_opt.ncols(), |f| f.ncols()).max(f_opt.ncols());
    let modulus = 1.0 / (n_tx as f64).sqrt();
    let target = apply_column_weights(f_opt, weight);
    let eps = spec.epsilon;
    let constrained = qf.is_some() && eps.is_finite();
    let feas_tol = 1.0 + 1e-3;

    let mut f_rf = match init {
        Some(f) => f.clone(),
        None => random_rf_init(n_tx, m_t, rng),
    };
    let mut mu = settings.penalty_mu0;
    let mut diag = RmcgDiagnostics::default();
    let mut prev_obj = f64::INFINITY;
    let mut f_bb1 = bb_stage1_ls(&f_rf, &target, None)?;

    for _ in 0..settings.max_outer_iters {
        let state = if constrained {
            Some(surrogate_coeffs(qf.unwrap(), spec, &f_rf)?)
        } else {
            None
        };
        let bb = f_bb1.clone();
        let bbh = bb.adjoint();
        let bb_gram = &bb * &bbh;
        // The convex surrogate majorizes the MSE with a slack of
        // lambda*(M_t^2 - ||F F^H||_F^2) coming from the power bound used to
        // convexify it; that slack dwarfs any realistic budget, so the
        // penalty tracks the tight majorizer (slack restored), which touches
        // the true MSE at the expansion point.
        let lambda = qf.map_or(0.0, |q| q.lambda_max);
        let slack_ref = lambda * (m_t * m_t) as f64;
        let tight = |st: &crate::mm_surrogate::SurrogateState, f: &CMat| {
            let ffh = f * f.adjoint();
            surrogate_value(st, f) + lambda * fro_norm_sq(&ffh) - slack_ref
        };
        let cost = |f: &CMat| {
            let mut c = fro_norm_sq(&(&target - f * &bb));
            if let Some(st) = &state {
                let v = tight(st, f) - eps;
                if v > 0.0 {
                    c += mu * v * v;
                }
            }
            c
        };
        let egrad = |f: &CMat| {
            let mut g = (&target * &bbh - f * &bb_gram) * Complex64::new(-2.0, 0.0);
            if let Some(st) = &state {
                let v = tight(st, f) - eps;
                if v > 0.0 {
                    let mut pg = surrogate_grad(st, f);
                    pg += (f * f.adjoint()) * f * Complex64::new(4.0 * lambda, 0.0);
                    g += pg * Complex64::new(2.0 * mu * v, 0.0);
                }
            }
            g
        };
        let start = ManifoldPoint::circle(f_rf.clone(), modulus)?;
        let (point, trace) = crate::manifold::rcg_minimize(cost, egrad, start, &settings.inner)?;
        diag.inner_trace.extend_from_slice(&trace);

        // An aggressive penalty can steer the columns toward a common phase
        // profile until the Gram turns numerically singular. The previous
        // iterate is still valid, so stop there instead of failing.
        match bb_stage1_ls(&point.value, &target, None) {
            Ok(bb) => {
                f_rf = point.value;
                f_bb1 = bb;
            }
            Err(Error::RankDeficient(_)) => break,
            Err(e) => return Err(e),
        }
        let obj = fro_norm_sq(&(&target - &f_rf * &f_bb1));
        let psi = if constrained {
            spec.psi_mse(&f_rf)?
        } else {
            0.0
        };
        diag.objective_trace.push(obj);
        diag.psi_trace.push(psi);

        let violated = constrained && psi > eps * feas_tol;
        if violated {
            mu *= settings.penalty_growth;
        }
        let rel = (prev_obj - obj).abs() / prev_obj.abs().max(1e-30);
        if rel < settings.outer_tol && !violated {
            break;
        }
        prev_obj = obj;
    }
    diag.infeasible = constrained && spec.psi_mse(&f_rf)? > eps * feas_tol;
    Ok((f_rf, f_bb1, diag))
}

/// Stage-2 zero-forcing inverse of the stacked effective channel rows.
pub fn bb_stage2_zf(effective_rows: &CMat) -> Result<CMat> {
    let m = effective_rows.nrows();
    if effective_rows.ncols() != m {
        return Err(Error::Shape {
            expected: format!("{m}x{m}"),
            got: format!("{}x{}", effective_rows.nrows(), effective_rows.ncols()),
        });
    }
    let gram = effective_rows * effective_rows.adjoint();
    let (evals, _) = hermitian_eigen_desc(&gram);
    let emax = evals.first().copied().unwrap_or(0.0);
    let emin = evals.last().copied().unwrap_or(0.0);
    if emin <= 0.0 || emax / emin > 1e12 {
        return Err(Error::SingularChannel(
            "effective user channel is singular; ZF undefined".into(),
        ));
    }
    // H^H (H H^H)^{-1}, computed as H^H * solve(H H^H, I).
    let inv = solve_hpd(&gram, &CMat::identity(m, m), "ZF inverse")?;
    Ok(effective_rows.adjoint() * inv)
}

/// Radar baseband: orthonormal basis of the L weakest right-singular
/// directions of the stacked effective downlink channels H_m F_RF.
pub fn bb_radar_nsp(effective_channels: &[CMat], l: usize) -> Result<CMat> {
    if effective_channels.is_empty() {
        return Err(Error::Config("no effective channels for NSP".into()));
    }
    let m_t = effective_channels[0].ncols();
    if l > m_t {
        return Err(Error::Shape {
            expected: format!("L <= M_t = {m_t}"),
            got: format!("L = {l}"),
        });
    }
    // Eigen of the accumulated Gram sum_m (H_m F_RF)^H (H_m F_RF) gives the
    // full right-singular basis of the stacked matrix.
    let mut gram = CMat::zeros(m_t, m_t);
    for h in effective_channels {
        gram += h.adjoint() * h;
    }
    let (_, vectors) = hermitian_eigen_desc(&gram);
    Ok(vectors.columns(m_t - l, l).into_owned())
}

/// Project the combined baseband onto {F : F F^H = (P_t/K) I} (nearest point,
/// refined on the scaled-unitary manifold).
pub fn bb_power_constrain(
    f_bb: &CMat,
    p_t: f64,
    k: usize,
    settings: &RcgSettings,
) -> Result<CMat> {
    let m_t = f_bb.nrows();
    if f_bb.ncols() != k {
        return Err(Error::Shape {
            expected: format!("{m_t}x{k}"),
            got: format!("{}x{}", f_bb.nrows(), f_bb.ncols()),
        });
    }
    if m_t > k {
        return Err(Error::RankDeficient(format!(
            "row Gram (P_t/K)I is infeasible for M_t = {m_t} > K = {k}"
        )));
    }
    let (u, s, v) = thin_svd(f_bb)?;
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 || s.iter().any(|&si| si <= 1e-12 * smax) {
        return Err(Error::RankDeficient(
            "combined baseband is rank deficient; power projection undefined".into(),
        ));
    }
    let scale = (p_t / k as f64).sqrt();
    // Closed-form nearest point (polar factor), then an RCG polish.
    let init = (u * v.adjoint()) * Complex64::new(scale, 0.0);
    let start = ManifoldPoint::scaled_unitary(init, p_t / k as f64)?;
    let cost = |f: &CMat| fro_norm_sq(&(f - f_bb));
    let grad = |f: &CMat| (f - f_bb) * Complex64::new(2.0, 0.0);
    let (point, _) = crate::manifold::rcg_minimize(cost, grad, start, settings)?;
    Ok(point.value)
}

/// Per-user effective scalar rows u_m^H H_m F_RF F_BB1, stacked into M x M.
pub fn effective_user_rows(
    channels: &[ChannelRealization],
    f_rf: &CMat,
    f_bb1: &CMat,
) -> CMat {
    let m = channels.len();
    let mut rows = CMat::zeros(m, f_bb1.ncols());
    for (i, ch) in channels.iter().enumerate() {
        let u = ch.dominant_left();
        let row = (u.adjoint() * &ch.matrix) * f_rf * f_bb1;
        rows.set_row(i, &row.row(0));
    }
    rows
}

/// Full hybrid design (Algorithm steps: RF, LS, ZF, NSP, power projection).
pub fn design_hybrid(
    channels: &[ChannelRealization],
    spec: &BeampatternSpec,
    qf: Option<&QuadraticForm>,
    config: &SystemConfig,
    rng: &mut impl Rng,
    init_rf: Option<&CMat>,
    weight: Option<&[f64]>,
) -> Result<HybridDesign> {
    let m = channels.len();
    let l = config.n_targets;
    let k = m + l;
    let m_t = config.n_rf();
    let p_t = config.transmit_power();

    let f_opt = optimal_digital_precoder(channels)?;
    let settings = RmcgSettings::from_config(config);
    let constrained = qf.is_some() && spec.epsilon.is_finite();
    let init = match init_rf {
        Some(f) => f.clone(),
        None if constrained => sensing_aware_init(&f_opt, spec, m_t)?,
        None => random_rf_init(config.n_tx, m_t, rng),
    };
    let (f_rf, f_bb1, diagnostics) =
        rmcg_rf_design(&f_opt, spec, qf, &settings, Some(&init), rng, weight)?;

    let rows = effective_user_rows(channels, &f_rf, &f_bb1);
    let f_bb2 = bb_stage2_zf(&rows)?;

    let f_bb_radar = if l > 0 {
        let effective: Vec<CMat> = channels.iter().map(|ch| &ch.matrix * &f_rf).collect();
        bb_radar_nsp(&effective, l)?
    } else {
        CMat::zeros(m_t, 0)
    };

    // The raw ZF inverse lives at the reciprocal scale of the effective
    // channel (easily 1e10 for mmWave path losses), which would swamp the
    // unit-norm radar columns in the power projection. Rescale the whole
    // communication block by one common factor so its largest column is unit
    // norm: the projection only sees directions and *relative* column norms,
    // and those relative norms are exactly how ZF (and the fairness weights)
    // bias the projection toward the weaker users. Fold the scaling into
    // F_BB2 so the stored stages stay consistent.
    let mut f_bb2 = f_bb2;
    let max_norm = (0..m)
        .map(|j| (&f_bb1 * f_bb2.column(j)).norm())
        .fold(0.0f64, f64::max);
    if max_norm <= 0.0 {
        return Err(Error::SingularChannel(
            "ZF solution collapsed to zero".into(),
        ));
    }
    f_bb2.scale_mut(1.0 / max_norm);

    // F_BB = [F_BB1 F_BB2 | F_BB_radar], then the power projection.
    let comm = &f_bb1 * &f_bb2;
    let mut f_bb = CMat::zeros(m_t, k);
    for j in 0..m {
        f_bb.set_column(j, &comm.column(j));
    }
    for j in 0..l {
        f_bb.set_column(m + j, &f_bb_radar.column(j));
    }
    let f_bb_hat = bb_power_constrain(&f_bb, p_t, k, &settings.inner)?;

    let (beta, psi_achieved) = match qf {
        Some(_) => {
            let gains = spec.gains_on_grid(&f_rf);
            (spec.optimal_beta(&gains)?, spec.psi_mse(&f_rf)?)
        }
        None => (0.0, 0.0),
    };

    Ok(HybridDesign {
        f_rf,
        f_bb1,
        f_bb2,
        f_bb_radar,
        f_bb_hat,
        beta,
        psi_achieved,
        diagnostics,
    })
}
