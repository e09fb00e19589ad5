//! Per-iteration convex surrogate of the beampattern-MSE constraint.
//!
//! At an expansion point F^t the constraint value d^H C d (with
//! d = vec(F F^H)) is upper-bounded by a convex quadratic in the precoder
//! columns: sum_j Re{f_j^H B1 f_j + 2 f_j^H u_j} + c2, where B1 is PSD, the
//! concave part (NSD B2) has been linearized at F^t, and c2 collects the
//! constants. B1 and B2 are assembled from the cached steering vectors, so no
//! N_t^2 x N_t^2 object is ever formed.

use num_complex::Complex64;

use crate::beampattern::{BeampatternSpec, QuadraticForm};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, CMat, CVec};

/// Coefficients of the convex surrogate, valid for one expansion point.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    /// PSD Hermitian quadratic term.
    pub b1: CMat,
    /// NSD Hermitian matrix backing the linearized concave part.
    pub b2: CMat,
    /// Linear terms u_j = B2 f^t_j, one per precoder column.
    pub u: Vec<CVec>,
    pub c1: f64,
    pub c2: f64,
    /// b^t = 2(C - lambda I) d^t, kept for the vec(B1 + B2) identity.
    pub b_t: CVec,
    pub expansion_point: CMat,
}

/// Build the surrogate coefficients at the expansion point `f_t`.
///
/// `f_t` must lie on the constant-modulus manifold (|entries| = 1/sqrt(N_t)).
pub fn surrogate_coeffs(
    qf: &QuadraticForm,
    spec: &BeampatternSpec,
    f_t: &CMat,
) -> Result<SurrogateState> {
    let n_tx = spec.n_tx;
    if f_t.nrows() != n_tx {
        return Err(Error::Shape {
            expected: format!("{n_tx} rows"),
            got: format!("{}", f_t.nrows()),
        });
    }
    let target = 1.0 / (n_tx as f64).sqrt();
    for e in f_t.iter() {
        if (e.norm() - target).abs() > 1e-8 {
            return Err(Error::Domain(format!(
                "expansion point entry modulus {} is off the manifold (expected {target})",
                e.norm()
            )));
        }
    }

    let l_grid = spec.grid_len() as f64;
    let m_t = f_t.ncols();
    let ffh = f_t * f_t.adjoint();

    // Per-angle designed gains g_l = a_l^H F F^H a_l = ||F^H a_l||^2 and the
    // two structured sums over the grid.
    let mut s_g = CMat::zeros(n_tx, n_tx); // sum_l G_d(l) a_l a_l^H
    let mut b1 = CMat::zeros(n_tx, n_tx); // accumulates sum_l g_l a_l a_l^H
    let mut sd = 0.0; // s^H d = sum_l G_d(l) g_l
    for (a, &gd) in spec.steering.iter().zip(&spec.desired_gains) {
        let g_l = (a.adjoint() * f_t).norm_squared();
        if gd != 0.0 {
            s_g += (a * a.adjoint()) * Complex64::new(gd, 0.0);
            sd += gd * g_l;
        }
        if g_l != 0.0 {
            b1 += (a * a.adjoint()) * Complex64::new(g_l, 0.0);
        }
    }
    let zeta = qf.zeta;
    let scale = sd / zeta;
    b1 = (b1 + &s_g * Complex64::new(scale, 0.0)) * Complex64::new(2.0 / l_grid, 0.0);
    let b2 = &s_g * Complex64::new(-4.0 * scale / l_grid, 0.0)
        - &ffh * Complex64::new(2.0 * qf.lambda_max, 0.0);

    let u: Vec<CVec> = (0..m_t)
        .map(|j| &b2 * CVec::from(f_t.column(j)))
        .collect();
    let c1 = {
        let d = crate::linalg::vec_of(&ffh);
        qf.lambda_max * fro_norm_sq(&ffh) - qf.quad(&d)
    };
    let c2 = {
        let lin: f64 = (0..m_t)
            .map(|j| f_t.column(j).dotc(&u[j]).re)
            .sum();
        -lin + c1 + qf.lambda_max * (m_t * m_t) as f64
    };

    // b^t = 2 (C - lambda I) d^t, kept only as a consistency handle.
    let d = crate::linalg::vec_of(&ffh);
    let b_t = qf.apply(&d) * Complex64::new(2.0, 0.0)
        - &d * Complex64::new(2.0 * qf.lambda_max, 0.0);

    Ok(SurrogateState {
        b1,
        b2,
        u,
        c1,
        c2,
        b_t,
        expansion_point: f_t.clone(),
    })
}

/// Surrogate objective sum_j Re{f_j^H B1 f_j + 2 f_j^H u_j} + c2.
pub fn surrogate_value(state: &SurrogateState, f: &CMat) -> f64 {
    let quad_lin: f64 = (0..f.ncols())
        .map(|j| {
            let col = f.column(j);
            let b1f = &state.b1 * col;
            (col.dotc(&b1f) + col.dotc(&state.u[j]) * Complex64::new(2.0, 0.0)).re
        })
        .sum();
    quad_lin + state.c2
}

/// Euclidean gradient of `surrogate_value` with respect to F, column j being
/// 2(B1 f_j + u_j); pairs with the real trace inner product.
pub fn surrogate_grad(state: &SurrogateState, f: &CMat) -> CMat {
    let mut grad = CMat::zeros(f.nrows(), f.ncols());
    for j in 0..f.ncols() {
        let col = (&state.b1 * f.column(j) + &state.u[j]) * Complex64::new(2.0, 0.0);
        grad.set_column(j, &col);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen_desc, vec_of};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec_of(n_tx: usize, step: f64) -> (BeampatternSpec, QuadraticForm) {
        // Widen the indicator with the grid step so coarse grids still
        // contain desired-gain samples near both targets.
        let spread = 0.71 * step.max(1.0);
        let spec = BeampatternSpec::new(n_tx, step, &[-60.0, -20.0], spread, 0.1).unwrap();
        let qf = spec.build_quadratic_form().unwrap();
        (spec, qf)
    }

    fn random_feasible(rng: &mut ChaCha8Rng, n_tx: usize, cols: usize) -> CMat {
        let scale = 1.0 / (n_tx as f64).sqrt();
        CMat::from_fn(n_tx, cols, |_, _| {
            Complex64::from_polar(scale, rng.random::<f64>() * std::f64::consts::TAU)
        })
    }

    #[test]
    fn rejects_off_manifold_expansion_point() {
        let (spec, qf) = spec_of(4, 30.0);
        let f = CMat::from_element(4, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            surrogate_coeffs(&qf, &spec, &f),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn degenerate_zero_form_gives_constant_surrogate() {
        // A single grid angle with G_d = 1 makes every b_l = 0, so C = 0 and
        // the surrogate collapses to the constant c2.
        let mut spec = BeampatternSpec::new(4, 1.0, &[-20.0], 0.7071, 0.1).unwrap();
        spec.grid_angles_deg.truncate(1);
        spec.steering.truncate(1);
        spec.desired_gains = vec![1.0];
        let qf = spec.build_quadratic_form().unwrap();
        assert!(qf.lambda_max < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f_t = random_feasible(&mut rng, 4, 2);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        assert!(state.b_t.norm() < 1e-10);
        let v0 = surrogate_value(&state, &f_t);
        for _ in 0..10 {
            let f = random_feasible(&mut rng, 4, 2);
            let v = surrogate_value(&state, &f);
            // c2 dominates; quadratic/linear parts differ but psi is identically
            // zero here, so the surrogate must stay non-negative.
            assert!(v >= -1e-10, "surrogate {v} fell below zero on zero form");
            let _ = v0;
        }
    }

    #[test]
    fn vec_b1_plus_b2_reconstructs_b_t() {
        let (spec, qf) = spec_of(4, 26.0); // 7 grid points
        assert_eq!(spec.grid_len(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f_t = random_feasible(&mut rng, 4, 2);
            let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
            let v = vec_of(&(&state.b1 + &state.b2));
            let err = (&v - &state.b_t).norm();
            assert!(
                err <= 1e-8 * state.b_t.norm().max(1e-12),
                "vec(B1+B2) mismatch {err}"
            );
        }
    }

    #[test]
    fn quadratic_split_matches_re_d_h_b() {
        // sum_j Re{f_j^H (B1 + B2) f_j} = Re{d^H b^t} for feasible F.
        let (spec, qf) = spec_of(4, 26.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f_t = random_feasible(&mut rng, 4, 2);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        let b_full = &state.b1 + &state.b2;
        for _ in 0..50 {
            let f = random_feasible(&mut rng, 4, 2);
            let lhs: f64 = (0..2)
                .map(|j| f.column(j).dotc(&(&b_full * f.column(j))).re)
                .sum();
            let d = vec_of(&(&f * f.adjoint()));
            let rhs = state.b_t.dotc(&d).re; // Re{d^H b} = Re{b^H d}
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8 * rhs.abs().max(1e-10));
        }
    }

    #[test]
    fn b1_psd_b2_nsd() {
        let (spec, qf) = spec_of(6, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f_t = random_feasible(&mut rng, 6, 3);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        let (e1, _) = hermitian_eigen_desc(&state.b1);
        let (e2, _) = hermitian_eigen_desc(&state.b2);
        assert!(e1.iter().all(|&e| e >= -1e-8), "B1 eigenvalues {e1:?}");
        assert!(e2.iter().all(|&e| e <= 1e-8), "B2 eigenvalues {e2:?}");
    }

    #[test]
    fn u_columns_match_b2_times_expansion_point() {
        let (spec, qf) = spec_of(5, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let f_t = random_feasible(&mut rng, 5, 3);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        for j in 0..3 {
            let expect = state.b2.adjoint() * f_t.column(j);
            assert!((&state.u[j] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn majorization_dominates_psi() {
        let (spec, qf) = spec_of(8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f_t = random_feasible(&mut rng, 8, 3);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        for _ in 0..200 {
            let f = random_feasible(&mut rng, 8, 3);
            let sur = surrogate_value(&state, &f);
            let psi = spec.psi_mse(&f).unwrap();
            assert!(
                sur >= psi - 1e-8,
                "surrogate {sur} below psi {psi}"
            );
        }
    }

    #[test]
    fn surrogate_is_convex_midpoint() {
        let (spec, qf) = spec_of(6, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f_t = random_feasible(&mut rng, 6, 2);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        for _ in 0..100 {
            let fa = random_feasible(&mut rng, 6, 2);
            let fb = random_feasible(&mut rng, 6, 2);
            let mid = (&fa + &fb) * Complex64::new(0.5, 0.0);
            let lhs = surrogate_value(&state, &mid);
            let rhs = 0.5 * (surrogate_value(&state, &fa) + surrogate_value(&state, &fb));
            assert!(lhs <= rhs + 1e-9, "midpoint {lhs} above average {rhs}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (spec, qf) = spec_of(5, 12.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let f_t = random_feasible(&mut rng, 5, 2);
        let state = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        let f = random_feasible(&mut rng, 5, 2);
        let grad = surrogate_grad(&state, &f);
        let h = 1e-6;
        for (i, j) in [(0, 0), (3, 1), (4, 0)] {
            for re_dir in [true, false] {
                let mut fp = f.clone();
                let mut fm = f.clone();
                let delta = if re_dir {
                    Complex64::new(h, 0.0)
                } else {
                    Complex64::new(0.0, h)
                };
                fp[(i, j)] += delta;
                fm[(i, j)] -= delta;
                let fd = (surrogate_value(&state, &fp) - surrogate_value(&state, &fm)) / (2.0 * h);
                let g = if re_dir { grad[(i, j)].re } else { grad[(i, j)].im };
                assert_abs_diff_eq!(g, fd, epsilon = 1e-4 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn deterministic_coefficients() {
        let (spec, qf) = spec_of(4, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let f_t = random_feasible(&mut rng, 4, 2);
        let a = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        let b = surrogate_coeffs(&qf, &spec, &f_t).unwrap();
        assert_eq!(a.b1, b.b1);
        assert_eq!(a.b2, b.b2);
        assert_eq!(a.c1.to_bits(), b.c1.to_bits());
        assert_eq!(a.c2.to_bits(), b.c2.to_bits());
    }
}
