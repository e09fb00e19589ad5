//! Desired radar beampattern on an angular grid, designed-beampattern gain and
//! MSE evaluation, and the quadratic form backing the MM surrogate.
//!
//! The MSE sums over a sampled angular grid (default one-degree steps over
//! [-90, 90]); the desired pattern is a unit-height indicator around each
//! target, and the scale mismatch is absorbed by the optimal beta.

use num_complex::Complex64;

use crate::channel::{ula_response, UlaGeometry};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Angular grid, desired gains, and cached steering vectors.
#[derive(Debug, Clone)]
pub struct BeampatternSpec {
    pub grid_angles_deg: Vec<f64>,
    pub desired_gains: Vec<f64>,
    /// Steering vector a_t(theta_l) per grid angle; the rank-one outer
    /// products A_l are formed on demand.
    pub steering: Vec<CVec>,
    pub target_angles_deg: Vec<f64>,
    pub sigma_theta: f64,
    /// MSE budget on linear scale.
    pub epsilon: f64,
    pub n_tx: usize,
}

/// Implicit representation of the Hermitian PSD matrix C = (1/L) sum b_l b_l^H.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub b_vectors: Vec<CVec>,
    pub lambda_max: f64,
    pub zeta: f64,
    pub n_tx: usize,
}

/// Unit-height indicator: 1 within +-spread of any target angle, else 0.
pub fn desired_pattern(grid_angles: &[f64], target_angles: &[f64], spread: f64) -> Vec<f64> {
    grid_angles
        .iter()
        .map(|&g| {
            if target_angles.iter().any(|&t| (g - t).abs() < spread) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

impl BeampatternSpec {
    pub fn new(
        n_tx: usize,
        grid_step_deg: f64,
        target_angles_deg: &[f64],
        sigma_theta: f64,
        epsilon_linear: f64,
    ) -> Result<Self> {
        if grid_step_deg <= 0.0 {
            return Err(Error::Config("grid step must be positive".into()));
        }
        let geometry = UlaGeometry::half_wavelength(n_tx)?;
        let mut grid_angles_deg = Vec::new();
        let mut a = -90.0;
        while a <= 90.0 + 1e-9 {
            grid_angles_deg.push(a);
            a += grid_step_deg;
        }
        let desired_gains = desired_pattern(&grid_angles_deg, target_angles_deg, sigma_theta);
        let steering = grid_angles_deg
            .iter()
            .map(|&angle| ula_response(geometry, angle))
            .collect();
        Ok(BeampatternSpec {
            grid_angles_deg,
            desired_gains,
            steering,
            target_angles_deg: target_angles_deg.to_vec(),
            sigma_theta,
            epsilon: epsilon_linear,
            n_tx,
        })
    }

    pub fn from_config(config: &SystemConfig) -> Result<Self> {
        Self::new(
            config.n_tx,
            config.grid_step_deg,
            &config.target_angles_deg,
            config.sigma_theta,
            config.epsilon_linear(),
        )
    }

    pub fn grid_len(&self) -> usize {
        self.grid_angles_deg.len()
    }

    /// Transmit beampattern gain a^H F F^H a at an arbitrary angle.
    pub fn tx_gain(&self, precoder: &CMat, angle_deg: f64) -> f64 {
        let geometry = UlaGeometry::half_wavelength(self.n_tx).expect("n_tx checked at build");
        let a = ula_response(geometry, angle_deg);
        (a.adjoint() * precoder).norm_squared()
    }

    /// Gains at every grid angle, using the cached steering vectors.
    pub fn gains_on_grid(&self, precoder: &CMat) -> Vec<f64> {
        self.steering
            .iter()
            .map(|a| (a.adjoint() * precoder).norm_squared())
            .collect()
    }

    /// Scale beta* minimizing the pattern MSE for the given gains.
    pub fn optimal_beta(&self, gains: &[f64]) -> Result<f64> {
        let zeta: f64 = self.desired_gains.iter().map(|g| g * g).sum();
        if zeta <= 0.0 {
            return Err(Error::DegeneratePattern);
        }
        let num: f64 = self
            .desired_gains
            .iter()
            .zip(gains)
            .map(|(gd, g)| gd * g)
            .sum();
        Ok(num / zeta)
    }

    /// Mean-squared error between beta* times the desired pattern and the
    /// designed pattern of `precoder`.
    pub fn psi_mse(&self, precoder: &CMat) -> Result<f64> {
        let gains = self.gains_on_grid(precoder);
        let beta = self.optimal_beta(&gains)?;
        let l = self.grid_len() as f64;
        Ok(self
            .desired_gains
            .iter()
            .zip(&gains)
            .map(|(gd, g)| {
                let e = beta * gd - g;
                e * e
            })
            .sum::<f64>()
            / l)
    }

    /// Assemble the quadratic form (b_l vectors, largest eigenvalue of C).
    pub fn build_quadratic_form(&self) -> Result<QuadraticForm> {
        let zeta: f64 = self.desired_gains.iter().map(|g| g * g).sum();
        if zeta <= 0.0 {
            return Err(Error::DegeneratePattern);
        }
        let n2 = self.n_tx * self.n_tx;
        // s = sum_l G_d(l) vec(A_l)
        let mut s = CVec::zeros(n2);
        for (a, &gd) in self.steering.iter().zip(&self.desired_gains) {
            if gd != 0.0 {
                add_scaled_outer_vec(&mut s, a, gd);
            }
        }
        let b_vectors: Vec<CVec> = self
            .steering
            .iter()
            .zip(&self.desired_gains)
            .map(|(a, &gd)| {
                let mut b = &s * Complex64::new(gd / zeta, 0.0);
                add_scaled_outer_vec(&mut b, a, -1.0);
                b
            })
            .collect();
        let mut qf = QuadraticForm {
            b_vectors,
            lambda_max: 0.0,
            zeta,
            n_tx: self.n_tx,
        };
        qf.lambda_max = qf.power_iteration_lambda();
        Ok(qf)
    }
}

/// out += scale * vec(a a^H)
fn add_scaled_outer_vec(out: &mut CVec, a: &CVec, scale: f64) {
    let n = a.len();
    for j in 0..n {
        let col = a[j].conj() * scale;
        for i in 0..n {
            out[j * n + i] += a[i] * col;
        }
    }
}

impl QuadraticForm {
    /// C x without materializing C.
    pub fn apply(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(x.len());
        let inv_l = 1.0 / self.b_vectors.len() as f64;
        for b in &self.b_vectors {
            let coeff = b.dotc(x) * inv_l;
            out += b * coeff;
        }
        out
    }

    /// x^H C x (real for Hermitian C).
    pub fn quad(&self, x: &CVec) -> f64 {
        let inv_l = 1.0 / self.b_vectors.len() as f64;
        self.b_vectors
            .iter()
            .map(|b| b.dotc(x).norm_sqr() * inv_l)
            .sum()
    }

    fn power_iteration_lambda(&self) -> f64 {
        let n2 = self.n_tx * self.n_tx;
        let mut x = CVec::from_fn(n2, |i, _| {
            Complex64::new(1.0, 0.3 * ((i % 7) as f64 - 3.0))
        });
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x /= Complex64::new(norm, 0.0);
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let y = self.apply(&x);
            let ynorm = y.norm();
            if ynorm <= 1e-300 {
                return 0.0;
            }
            let next = ynorm;
            x = y / Complex64::new(ynorm, 0.0);
            if (next - lambda).abs() <= 1e-12 * next.max(1.0e-30) {
                return next;
            }
            lambda = next;
        }
        lambda
    }

    /// Dense assembly of C; intended for small instances and oracle tests.
    pub fn dense_c(&self) -> CMat {
        let n2 = self.n_tx * self.n_tx;
        let mut c = CMat::zeros(n2, n2);
        let inv_l = Complex64::new(1.0 / self.b_vectors.len() as f64, 0.0);
        for b in &self.b_vectors {
            c += (b * b.adjoint()) * inv_l;
        }
        c
    }
}
