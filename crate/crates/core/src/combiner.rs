//! Blind phase-only receive combiner design (per-user, no precoder feedback).
//!
//! Each user builds a surrogate of the downlink transmission from its own
//! channel: its own stream arrives along the strongest right singular
//! direction, while the other users' streams are modeled along the weakest
//! right singular directions. The combiner phases then minimize the expected
//! symbol MSE of that surrogate model by Armijo-backtracked gradient descent.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Per-user combiners, their phase vectors, and objective traces.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    pub combiners: Vec<CVec>,
    pub phases: Vec<Vec<f64>>,
    pub traces: Vec<Vec<f64>>,
}

impl CombinerSet {
    /// Stack the combiners as columns (N_r x M).
    pub fn as_matrix(&self) -> CMat {
        CMat::from_columns(&self.combiners.iter().map(|w| w.clone()).collect::<Vec<_>>())
    }
}

/// Settings of the per-user phase descent.
#[derive(Debug, Clone, Copy)]
pub struct LmbcSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
}

impl LmbcSettings {
    pub fn from_solver(s: &SolverConfig) -> Self {
        LmbcSettings {
            tol: s.combiner_tol,
            max_iters: s.combiner_max_iters,
            armijo_shrink: s.armijo_shrink,
            armijo_slope: s.armijo_slope,
            initial_step: s.initial_step,
        }
    }
}

impl Default for LmbcSettings {
    fn default() -> Self {
        Self::from_solver(&SolverConfig::default())
    }
}

/// Surrogate transmit directions assumed by the user: own stream on the
/// strongest right singular direction, the other M-1 streams on the weakest.
pub fn blind_precoder_surrogate(channel: &ChannelRealization, m: usize) -> Result<CMat> {
    let n_tx = channel.v.nrows();
    if m > n_tx {
        return Err(Error::Shape {
            expected: format!("M <= N_t = {n_tx}"),
            got: format!("M = {m}"),
        });
    }
    if m == 0 {
        return Err(Error::Config("surrogate needs at least one stream".into()));
    }
    let mut f = CMat::zeros(n_tx, m);
    f.set_column(0, &channel.v.column(0));
    for j in 1..m {
        f.set_column(j, &channel.v.column(n_tx - m + j));
    }
    Ok(f)
}

/// Unit-modulus combiner w with entries (1/sqrt(N_r)) e^{j phase_n}.
pub fn combiner_from_phases(phases: &[f64]) -> CVec {
    let scale = 1.0 / (phases.len() as f64).sqrt();
    CVec::from_iterator(
        phases.len(),
        phases.iter().map(|&p| Complex64::from_polar(scale, p)),
    )
}

/// Expected-MSE objective g(w) = 1 - 2 Re{w^H h} + w^H A w.
pub fn objective(w: &CVec, h: &CVec, a: &CMat) -> f64 {
    1.0 - 2.0 * w.dotc(h).re + w.dotc(&(a * w)).re
}

/// Gradient of g with respect to the phases: 2 Im{conj(w) .* (A w - h)}.
pub fn phase_gradient(w: &CVec, h: &CVec, a: &CMat) -> Vec<f64> {
    let r = a * w - h;
    w.iter()
        .zip(r.iter())
        .map(|(wi, ri)| 2.0 * (wi.conj() * ri).im)
        .collect()
}

/// Design one user's phase-only combiner from its own channel alone.
///
/// Returns the unit-modulus-scaled combiner, the final phases, and the
/// monotone objective trace.
pub fn lmbc_design(
    channel: &ChannelRealization,
    n_users: usize,
    noise_var: f64,
    settings: &LmbcSettings,
) -> Result<(CVec, Vec<f64>, Vec<f64>)> {
    let n_rx = channel.matrix.nrows();
    if n_rx == 0 {
        return Err(Error::Config("combiner needs at least one antenna".into()));
    }
    let f_bar = blind_precoder_surrogate(channel, n_users)?;
    let h = &channel.matrix * f_bar.column(0);
    // A = h h^H + R_I + sigma^2 I with R_I over the surrogate interferers.
    let mut a = &h * h.adjoint() + CMat::identity(n_rx, n_rx) * Complex64::new(noise_var, 0.0);
    for j in 1..n_users {
        let hj = &channel.matrix * f_bar.column(j);
        a += &hj * hj.adjoint();
    }

    // Warm start: phases of the dominant left singular vector.
    let u = channel.dominant_left();
    let mut phases: Vec<f64> = u.iter().map(|e| e.arg()).collect();
    let mut w = combiner_from_phases(&phases);
    let mut g_cur = objective(&w, &h, &a);
    if !g_cur.is_finite() {
        return Err(Error::Numeric(format!("combiner objective non-finite: {g_cur}")));
    }
    let mut trace = vec![g_cur];
    let mut step_hint = settings.initial_step;

    for _ in 0..settings.max_iters {
        let grad = phase_gradient(&w, &h, &a);
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            break;
        }
        // Armijo backtracking along -grad with an adaptive initial step.
        let mut step = 2.0 * step_hint;
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = phases
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - step * g)
                .collect();
            let w_new = combiner_from_phases(&cand);
            let g_new = objective(&w_new, &h, &a);
            if !g_new.is_finite() {
                return Err(Error::Numeric(format!(
                    "combiner objective non-finite: {g_new}"
                )));
            }
            if g_new <= g_cur - settings.armijo_slope * step * gnorm2 {
                accepted = Some((cand, w_new, g_new, step));
                break;
            }
            step *= settings.armijo_shrink;
        }
        let Some((cand, w_new, g_new, used)) = accepted else {
            break;
        };
        step_hint = used;
        let delta = g_cur - g_new;
        phases = cand;
        w = w_new;
        g_cur = g_new;
        trace.push(g_cur);
        if delta <= settings.tol {
            break;
        }
    }
    Ok((w, phases, trace))
}

/// Run the blind combiner design for every user.
pub fn design_all(
    channels: &[ChannelRealization],
    noise_var: f64,
    settings: &LmbcSettings,
) -> Result<CombinerSet> {
    let n_users = channels.len();
    let mut combiners = Vec::with_capacity(n_users);
    let mut phases = Vec::with_capacity(n_users);
    let mut traces = Vec::with_capacity(n_users);
    for ch in channels {
        let (w, p, t) = lmbc_design(ch, n_users, noise_var, settings)?;
        combiners.push(w);
        phases.push(p);
        traces.push(t);
    }
    Ok(CombinerSet {
        combiners,
        phases,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channel;
    use crate::config::SystemConfig;
    use crate::linalg::full_svd;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn test_channel(seed: u64, n_rx: usize, n_tx: usize) -> ChannelRealization {
        let mut config = SystemConfig::default();
        config.n_rx = n_rx;
        config.n_tx = n_tx;
        config.n_paths = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        draw_channel(&config, 0, &mut rng).unwrap()
    }

    fn override_matrix(ch: &mut ChannelRealization, m: CMat) {
        let s = full_svd(&m);
        ch.matrix = m;
        ch.u = s.u;
        ch.singular_values = s.singular_values;
        ch.v = s.v;
    }

    #[test]
    fn surrogate_columns_orthonormal() {
        let ch = test_channel(1, 4, 16);
        let f = blind_precoder_surrogate(&ch, 3).unwrap();
        let gram = f.adjoint() * &f;
        assert!((gram - CMat::identity(3, 3)).norm() < 1e-10);
        let single = blind_precoder_surrogate(&ch, 1).unwrap();
        assert!((single.column(0) - ch.v.column(0)).norm() < 1e-12);
        assert!(blind_precoder_surrogate(&ch, 17).is_err());
    }

    #[test]
    fn surrogate_interferers_live_in_null_space() {
        // rank(H) = 4 < N_t - M + 1, so the weakest right singular directions
        // are exact null-space vectors.
        let ch = test_channel(2, 4, 16);
        let f = blind_precoder_surrogate(&ch, 3).unwrap();
        for j in 1..3 {
            let leak = (&ch.matrix * f.column(j)).norm() / ch.matrix.norm();
            assert!(leak < 1e-8, "interference leak {leak}");
        }
    }

    #[test]
    fn single_antenna_aligns_phase() {
        let mut ch = test_channel(3, 1, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        override_matrix(&mut ch, random_cmat(&mut rng, 1, 8));
        let (w, _, _) = lmbc_design(&ch, 1, 1e-6, &LmbcSettings::default()).unwrap();
        let f = blind_precoder_surrogate(&ch, 1).unwrap();
        let h = (&ch.matrix * f.column(0))[(0, 0)];
        let aligned = (w[0].conj() * h).re;
        assert_abs_diff_eq!(aligned, h.norm(), epsilon = 1e-6 * h.norm());
    }

    #[test]
    fn rank_one_noiseless_matches_phase_alignment_oracle() {
        let n_rx = 6;
        let mut ch = test_channel(5, n_rx, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_cmat(&mut rng, n_rx, 1);
        let un = &u / Complex64::new(u.norm(), 0.0);
        let v = random_cmat(&mut rng, 12, 1);
        let vn = &v / Complex64::new(v.norm(), 0.0);
        override_matrix(&mut ch, &un * vn.adjoint() * Complex64::new(2.0, 0.0));
        let mut settings = LmbcSettings::default();
        settings.max_iters = 500;
        settings.tol = 1e-14;
        let (w, _, trace) = lmbc_design(&ch, 1, 1e-12, &settings).unwrap();
        // Phase-only optimum aligns with u entrywise.
        let achieved = w.dotc(&ch.u.column(0).into_owned()).norm();
        let oracle = ch.u.column(0).iter().map(|e| e.norm()).sum::<f64>()
            / (n_rx as f64).sqrt();
        assert_abs_diff_eq!(achieved, oracle, epsilon = 1e-4);
        assert!(trace.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn combiner_modulus_exact() {
        let ch = test_channel(7, 8, 32);
        let (w, phases, _) = lmbc_design(&ch, 3, 1e-12, &LmbcSettings::default()).unwrap();
        let scale = 1.0 / (8f64).sqrt();
        for (wi, p) in w.iter().zip(&phases) {
            assert!((wi - Complex64::from_polar(scale, *p)).norm() < 1e-15);
            assert_abs_diff_eq!(wi.norm(), scale, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n_rx = 5;
        let h = CVec::from_fn(n_rx, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let x = random_cmat(&mut rng, n_rx, n_rx);
        let a = &x * x.adjoint() + CMat::identity(n_rx, n_rx) * Complex64::new(0.3, 0.0);
        let phases: Vec<f64> = (0..n_rx).map(|_| rng.random::<f64>() * 6.0).collect();
        let w = combiner_from_phases(&phases);
        let grad = phase_gradient(&w, &h, &a);
        let step = 1e-6;
        for k in 0..n_rx {
            let mut pp = phases.clone();
            pp[k] += step;
            let mut pm = phases.clone();
            pm[k] -= step;
            let fd = (objective(&combiner_from_phases(&pp), &h, &a)
                - objective(&combiner_from_phases(&pm), &h, &a))
                / (2.0 * step);
            assert_abs_diff_eq!(grad[k], fd, epsilon = 1e-5 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn traces_monotone_on_realistic_channels() {
        let config = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let channels: Vec<_> = (0..3)
            .map(|m| draw_channel(&config, m, &mut rng).unwrap())
            .collect();
        let set = design_all(&channels, config.noise_power(), &LmbcSettings::default()).unwrap();
        for t in &set.traces {
            assert!(t.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        }
        assert_eq!(set.as_matrix().shape(), (8, 3));
    }
}
