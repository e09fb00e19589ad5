//! ULA steering vectors, path loss, and clustered multipath channel draws.
//!
//! Channels follow the sparse Saleh-Valenzuela form: a sum of rank-one outer
//! products of receive/transmit steering vectors weighted by complex gains.
//! The steering convention uses cos(angle), so broadside sits at 90 degrees.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{full_svd, CMat, CVec};

pub const DEFAULT_PATH_LOSS_INTERCEPT_DB: f64 = 61.4;
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.0;

/// Uniform linear array geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaGeometry {
    pub n_elements: usize,
    pub spacing_over_wavelength: f64,
}

impl UlaGeometry {
    pub fn new(n_elements: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidGeometry("n_elements must be at least 1".into()));
        }
        if spacing_over_wavelength <= 0.0 {
            return Err(Error::InvalidGeometry("spacing must be positive".into()));
        }
        Ok(UlaGeometry {
            n_elements,
            spacing_over_wavelength,
        })
    }

    pub fn half_wavelength(n_elements: usize) -> Result<Self> {
        Self::new(n_elements, 0.5)
    }
}

/// Unit-norm ULA response: element n carries phase 2*pi*(d/lambda)*n*sin(angle),
/// with the angle measured from broadside. This makes the map from angle to
/// steering vector injective over [-90, 90] degrees, so directions on the two
/// sides of broadside (where the scenario places its users and targets) stay
/// distinguishable; measuring from the array axis instead would alias each
/// angle with its mirror image.
pub fn ula_response(geometry: UlaGeometry, angle_deg: f64) -> CVec {
    let n = geometry.n_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let k = 2.0 * std::f64::consts::PI * geometry.spacing_over_wavelength
        * angle_deg.to_radians().sin();
    CVec::from_fn(n, |i, _| {
        Complex64::from_polar(scale, k * i as f64)
    })
}

/// Path loss in dB at `distance_m` with a caller-supplied shadowing draw.
pub fn path_loss_db(distance_m: f64, shadowing_db: f64) -> Result<f64> {
    path_loss_db_with(
        distance_m,
        shadowing_db,
        DEFAULT_PATH_LOSS_INTERCEPT_DB,
        DEFAULT_PATH_LOSS_EXPONENT,
    )
}

pub fn path_loss_db_with(
    distance_m: f64,
    shadowing_db: f64,
    intercept_db: f64,
    exponent: f64,
) -> Result<f64> {
    if distance_m <= 0.0 {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    Ok(intercept_db + 10.0 * exponent * distance_m.log10() + shadowing_db)
}

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    pub aod_deg: f64,
    pub aoa_deg: f64,
}

/// A drawn channel matrix together with its path parameters and full SVD.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub matrix: CMat,
    pub paths: Vec<PathParams>,
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
    pub distance_m: f64,
    pub path_loss_db: f64,
}

impl ChannelRealization {
    pub fn n_rx(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.matrix.ncols()
    }

    /// Leading right singular vector (the rate-optimal fully digital precoder).
    pub fn dominant_right(&self) -> CVec {
        self.v.column(0).into_owned()
    }

    /// Leading left singular vector.
    pub fn dominant_left(&self) -> CVec {
        self.u.column(0).into_owned()
    }
}

/// Laplacian draw with the given standard deviation (inverse-CDF sampling).
fn sample_laplacian(rng: &mut impl Rng, std_dev: f64) -> f64 {
    let scale = std_dev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let n = Normal::new(0.0, (variance / 2.0).sqrt()).expect("valid sigma");
    Complex64::new(n.sample(rng), n.sample(rng))
}

/// Draw one user's channel. AoDs are Laplacian around the user's nominal
/// angle (clipped to [-90, 90]); AoAs are uniform; per-path gains carry the
/// Nr*Nt/Np normalization and the distance path loss with log-normal shadowing.
pub fn draw_channel(
    config: &SystemConfig,
    user_index: usize,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    config.validate()?;
    if user_index >= config.n_users {
        return Err(Error::Config(format!(
            "user index {user_index} out of range for {} users",
            config.n_users
        )));
    }
    let tx = UlaGeometry::half_wavelength(config.n_tx)?;
    let rx = UlaGeometry::half_wavelength(config.n_rx)?;
    let center = config.user_angles_deg[user_index];

    let shadowing = if config.shadowing_sigma_db > 0.0 {
        Normal::new(0.0, config.shadowing_sigma_db)
            .expect("valid sigma")
            .sample(rng)
    } else {
        0.0
    };
    let pl_db = path_loss_db_with(
        config.distance_m,
        shadowing,
        config.path_loss_intercept_db,
        config.path_loss_exponent,
    )?;
    let gamma_sq = (config.n_rx * config.n_tx) as f64 / config.n_paths as f64;
    let gain_var = gamma_sq * 10f64.powf(-0.1 * pl_db);

    let mut paths = Vec::with_capacity(config.n_paths);
    let mut h = CMat::zeros(config.n_rx, config.n_tx);
    for _ in 0..config.n_paths {
        let aod = (center + sample_laplacian(rng, config.angular_spread_deg)).clamp(-90.0, 90.0);
        let aoa = rng.random_range(-90.0..=90.0);
        let gain = complex_normal(rng, gain_var);
        let a_r = ula_response(rx, aoa);
        let a_t = ula_response(tx, aod);
        h += (&a_r * a_t.adjoint()) * gain;
        paths.push(PathParams {
            gain,
            aod_deg: aod,
            aoa_deg: aoa,
        });
    }

    let svd = full_svd(&h);
    Ok(ChannelRealization {
        matrix: h,
        paths,
        u: svd.u,
        singular_values: svd.singular_values,
        v: svd.v,
        distance_m: config.distance_m,
        path_loss_db: pl_db,
    })
}
