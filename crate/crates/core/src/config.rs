//! Scenario configuration: antenna counts, user/target geometry, SNR, solver
//! tolerances. Mirrors the key simulation parameters of the evaluated setup.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    SumSe,
    GmSe,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum_se" => Ok(Objective::SumSe),
            "gm_se" => Ok(Objective::GmSe),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

/// Iteration caps and tolerances for the nested solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative objective-change tolerance of the outer MM loop.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    /// Riemannian-gradient norm tolerance of the inner CG loop.
    pub grad_tol: f64,
    pub max_inner_iters: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
    pub penalty_mu0: f64,
    pub penalty_growth: f64,
    /// Objective-change tolerance of the blind combiner descent.
    pub combiner_tol: f64,
    pub combiner_max_iters: usize,
    pub gm_tol: f64,
    pub gm_max_iters: usize,
    /// Rates below this fraction of the strongest user's rate are clamped
    /// when computing fairness weights.
    pub rate_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_tol: 1e-4,
            max_outer_iters: 50,
            grad_tol: 1e-6,
            max_inner_iters: 200,
            armijo_shrink: 0.5,
            armijo_slope: 0.1,
            initial_step: 1.0,
            penalty_mu0: 1.0,
            penalty_growth: 10.0,
            combiner_tol: 1e-8,
            combiner_max_iters: 200,
            gm_tol: 1e-4,
            gm_max_iters: 10,
            rate_floor: 0.3,
        }
    }
}

/// Full scenario description. All fields have defaults matching the reference
/// setup, so a config file only needs to override what differs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_users: usize,
    pub n_targets: usize,
    /// RF chain count; `None` means the default M + L.
    pub n_rf: Option<usize>,
    pub user_angles_deg: Vec<f64>,
    pub target_angles_deg: Vec<f64>,
    pub snr_db: f64,
    pub epsilon_db: f64,
    pub noise_dbm: f64,
    pub n_paths: usize,
    pub angular_spread_deg: f64,
    pub sigma_theta: f64,
    pub grid_step_deg: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub objective: Objective,
    pub distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub path_loss_intercept_db: f64,
    pub path_loss_exponent: f64,
    pub solver: SolverConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 64,
            n_rx: 8,
            n_users: 3,
            n_targets: 2,
            n_rf: None,
            user_angles_deg: vec![0.0, 30.0, 60.0],
            target_angles_deg: vec![-60.0, -20.0],
            snr_db: 20.0,
            epsilon_db: -10.0,
            noise_dbm: -91.0,
            n_paths: 10,
            angular_spread_deg: 10.0,
            sigma_theta: std::f64::consts::FRAC_1_SQRT_2,
            grid_step_deg: 1.0,
            n_trials: 500,
            seed: 1,
            objective: Objective::SumSe,
            distance_m: 30.0,
            shadowing_sigma_db: 5.8,
            path_loss_intercept_db: 61.4,
            path_loss_exponent: 2.0,
            solver: SolverConfig::default(),
        }
    }
}

impl SystemConfig {
    /// Number of data streams K = M + L.
    pub fn n_streams(&self) -> usize {
        self.n_users + self.n_targets
    }

    /// Resolved RF chain count (defaults to K).
    pub fn n_rf(&self) -> usize {
        self.n_rf.unwrap_or_else(|| self.n_streams())
    }

    pub fn noise_power(&self) -> f64 {
        10f64.powf((self.noise_dbm - 30.0) / 10.0)
    }

    /// Transmit power from SNR = P_t / sigma^2.
    pub fn transmit_power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0) * self.noise_power()
    }

    pub fn epsilon_linear(&self) -> f64 {
        10f64.powf(self.epsilon_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_users == 0 {
            return Err(Error::Config("antenna and user counts must be positive".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if self.n_rf() < self.n_streams() {
            return Err(Error::Config(format!(
                "n_rf = {} must be at least M + L = {}",
                self.n_rf(),
                self.n_streams()
            )));
        }
        if self.n_rf() > self.n_tx {
            return Err(Error::Config("n_rf may not exceed n_tx".into()));
        }
        if self.user_angles_deg.len() != self.n_users {
            return Err(Error::Config(format!(
                "{} user angles for {} users",
                self.user_angles_deg.len(),
                self.n_users
            )));
        }
        if self.target_angles_deg.len() != self.n_targets {
            return Err(Error::Config(format!(
                "{} target angles for {} targets",
                self.target_angles_deg.len(),
                self.n_targets
            )));
        }
        if self.grid_step_deg <= 0.0 || self.distance_m <= 0.0 {
            return Err(Error::Config("grid_step_deg and distance_m must be positive".into()));
        }
        if self.noise_power() <= 0.0 {
            return Err(Error::Config("noise power must be positive".into()));
        }
        Ok(())
    }

    /// Evenly spaced user angles over [0, 60] degrees for `m` users.
    pub fn default_user_angles(m: usize) -> Vec<f64> {
        if m == 1 {
            return vec![30.0];
        }
        (0..m).map(|i| 60.0 * i as f64 / (m - 1) as f64).collect()
    }

    /// Target angles in the [-90, 0] bin with 10-degree gaps.
    pub fn default_target_angles(l: usize) -> Vec<f64> {
        (0..l).map(|i| -20.0 - 10.0 * i as f64).collect()
    }

    /// Copy of the config with one swept parameter replaced; dependent fields
    /// (angle lists, default RF-chain count) are regenerated.
    pub fn with_param(&self, param: &str, value: f64) -> Result<SystemConfig> {
        let mut c = self.clone();
        match param {
            "snr_db" => c.snr_db = value,
            "epsilon_db" => c.epsilon_db = value,
            "n_users" => {
                c.n_users = value as usize;
                c.user_angles_deg = Self::default_user_angles(c.n_users);
                c.n_rf = None;
            }
            "n_targets" => {
                c.n_targets = value as usize;
                c.target_angles_deg = Self::default_target_angles(c.n_targets);
                c.n_rf = None;
            }
            "n_rf" => c.n_rf = Some(value as usize),
            other => {
                return Err(Error::Config(format!("unknown sweep parameter '{other}'")));
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn too_few_rf_chains_rejected() {
        let mut c = SystemConfig::default();
        c.n_rf = Some(3);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_param_regenerates_angles() {
        let c = SystemConfig::default().with_param("n_targets", 4.0).unwrap();
        assert_eq!(c.target_angles_deg, vec![-20.0, -30.0, -40.0, -50.0]);
        assert_eq!(c.n_rf(), 7);
        assert!(SystemConfig::default().with_param("bogus", 1.0).is_err());
    }

    #[test]
    fn power_from_snr() {
        let c = SystemConfig::default();
        let sigma2 = c.noise_power();
        assert!((c.transmit_power() / sigma2 - 100.0).abs() < 1e-9);
    }
}
