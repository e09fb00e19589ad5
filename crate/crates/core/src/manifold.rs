//! Riemannian conjugate gradient over the two feasible sets of the design:
//! the complex-circle (constant-modulus) manifold and the scaled-unitary-rows
//! manifold {X : X X^H = g I}. Polak-Ribiere directions with nonnegativity
//! restart, projection-based vector transport, and Armijo backtracking.
//!
//! The metric is the real trace inner product Re{tr(A^H B)} throughout.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{real_inner, thin_svd, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldKind {
    /// Every entry has the given modulus.
    Circle { modulus: f64 },
    /// Rows form a scaled orthonormal set: X X^H = gram_scale I (needs m <= n).
    ScaledUnitary { gram_scale: f64 },
}

#[derive(Debug, Clone)]
pub struct ManifoldPoint {
    pub value: CMat,
    pub kind: ManifoldKind,
}

/// Settings of the inner Riemannian CG loop.
#[derive(Debug, Clone, Copy)]
pub struct RcgSettings {
    pub grad_tol: f64,
    pub max_inner_iters: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
    pub pr_restart: bool,
}

impl Default for RcgSettings {
    fn default() -> Self {
        RcgSettings {
            grad_tol: 1e-6,
            max_inner_iters: 200,
            armijo_shrink: 0.5,
            armijo_slope: 0.1,
            initial_step: 1.0,
            pr_restart: true,
        }
    }
}

impl ManifoldPoint {
    pub fn circle(value: CMat, modulus: f64) -> Result<Self> {
        let p = ManifoldPoint {
            value,
            kind: ManifoldKind::Circle { modulus },
        };
        p.check_invariant()?;
        Ok(p)
    }

    pub fn scaled_unitary(value: CMat, gram_scale: f64) -> Result<Self> {
        if value.nrows() > value.ncols() {
            return Err(Error::Shape {
                expected: "rows <= cols for scaled-unitary rows".into(),
                got: format!("{}x{}", value.nrows(), value.ncols()),
            });
        }
        let p = ManifoldPoint {
            value,
            kind: ManifoldKind::ScaledUnitary { gram_scale },
        };
        p.check_invariant()?;
        Ok(p)
    }

    pub fn check_invariant(&self) -> Result<()> {
        match self.kind {
            ManifoldKind::Circle { modulus } => {
                for e in self.value.iter() {
                    if (e.norm() - modulus).abs() > 1e-12 * modulus.max(1.0) {
                        return Err(Error::Domain(format!(
                            "circle invariant violated: |entry| = {}, expected {modulus}",
                            e.norm()
                        )));
                    }
                }
            }
            ManifoldKind::ScaledUnitary { gram_scale } => {
                let m = self.value.nrows();
                let gram = &self.value * self.value.adjoint();
                let dev = (&gram - CMat::identity(m, m) * Complex64::new(gram_scale, 0.0)).norm();
                if dev > 1e-8 * gram_scale.max(1.0) {
                    return Err(Error::Domain(format!(
                        "scaled-unitary invariant violated: ||XX^H - gI|| = {dev}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient gradient onto the tangent space.
    pub fn tangent_project(&self, ambient: &CMat) -> Result<CMat> {
        if ambient.shape() != self.value.shape() {
            return Err(Error::Shape {
                expected: format!("{:?}", self.value.shape()),
                got: format!("{:?}", ambient.shape()),
            });
        }
        Ok(match self.kind {
            ManifoldKind::Circle { modulus } => {
                let inv_m2 = 1.0 / (modulus * modulus);
                let mut out = ambient.clone();
                for (o, p) in out.iter_mut().zip(self.value.iter()) {
                    let radial = (o.conj() * p).re * inv_m2;
                    *o -= p * radial;
                }
                out
            }
            ManifoldKind::ScaledUnitary { gram_scale } => {
                // Remove the Hermitian part of G X^H in the row-Gram directions:
                // P(G) = G - sym(G X^H)/g * X with sym(A) = (A + A^H)/2.
                let gxh = ambient * self.value.adjoint();
                let sym = (&gxh + gxh.adjoint()) * Complex64::new(0.5 / gram_scale, 0.0);
                ambient - sym * &self.value
            }
        })
    }

    /// Move along `direction` with the given step and map back onto the
    /// manifold.
    pub fn retract(&self, direction: &CMat, step: f64) -> Result<ManifoldPoint> {
        if step < 0.0 {
            return Err(Error::Domain("retraction step must be nonnegative".into()));
        }
        if step == 0.0 {
            return Ok(self.clone());
        }
        let x = &self.value + direction * Complex64::new(step, 0.0);
        let value = match self.kind {
            ManifoldKind::Circle { modulus } => {
                let mut out = x;
                for e in out.iter_mut() {
                    let r = e.norm();
                    if r < 1e-300 {
                        return Err(Error::Numeric(
                            "retraction hit a zero entry; phase undefined".into(),
                        ));
                    }
                    *e *= modulus / r;
                }
                out
            }
            ManifoldKind::ScaledUnitary { gram_scale } => {
                // sqrt(g) (X X^H)^{-1/2} X = sqrt(g) U V^H from the thin SVD.
                let (u, s, v) = thin_svd(&x)?;
                let smax = s.iter().cloned().fold(0.0f64, f64::max);
                if s.iter().any(|&si| si <= 1e-12 * smax) || smax == 0.0 {
                    return Err(Error::RankDeficient(
                        "retraction target is rank deficient".into(),
                    ));
                }
                (u * v.adjoint()) * Complex64::new(gram_scale.sqrt(), 0.0)
            }
        };
        let p = ManifoldPoint {
            value,
            kind: self.kind,
        };
        debug_assert!(p.check_invariant().is_ok());
        Ok(p)
    }

    /// Transport a tangent vector from a previous point into this point's
    /// tangent space (projection transport).
    pub fn transport(&self, old_direction: &CMat) -> Result<CMat> {
        self.tangent_project(old_direction)
    }
}

/// Minimize `cost` over the manifold by Riemannian CG.
///
/// `euclidean_grad` returns the ambient gradient paired with the real trace
/// inner product; the Riemannian gradient is its tangent projection. Returns
/// the final point and the cost trace (one entry per accepted iterate,
/// starting with the initial cost).
pub fn rcg_minimize<C, G>(
    cost: C,
    euclidean_grad: G,
    start: ManifoldPoint,
    settings: &RcgSettings,
) -> Result<(ManifoldPoint, Vec<f64>)>
where
    C: Fn(&CMat) -> f64,
    G: Fn(&CMat) -> CMat,
{
    start.check_invariant()?;
    let mut point = start;
    let mut f_cur = cost(&point.value);
    if !f_cur.is_finite() {
        return Err(Error::Numeric(format!(
            "cost is non-finite ({f_cur}) at the start point"
        )));
    }
    let mut trace = vec![f_cur];
    let mut rgrad = point.tangent_project(&euclidean_grad(&point.value))?;
    let mut dir = -rgrad.clone();
    // Remember the last accepted step so the initial trial adapts to the
    // problem's scale (doubling heuristic).
    let mut step_hint = settings.initial_step;

    for _ in 0..settings.max_inner_iters {
        let gnorm2 = real_inner(&rgrad, &rgrad);
        if gnorm2.sqrt() <= settings.grad_tol {
            break;
        }
        let mut slope = real_inner(&rgrad, &dir);
        if slope >= 0.0 {
            // Not a descent direction; restart with steepest descent.
            dir = -rgrad.clone();
            slope = -gnorm2;
        }

        // Armijo backtracking from an adaptive initial step.
        let mut step = (2.0 * step_hint).min(settings.initial_step.max(2.0 * step_hint));
        let mut accepted = None;
        for _ in 0..60 {
            match point.retract(&dir, step) {
                Ok(cand) => {
                    let f_new = cost(&cand.value);
                    if !f_new.is_finite() {
                        return Err(Error::Numeric(format!(
                            "cost is non-finite ({f_new}) at step {step}"
                        )));
                    }
                    if f_new <= f_cur + settings.armijo_slope * step * slope {
                        accepted = Some((cand, f_new, step));
                        break;
                    }
                }
                Err(_) => {} // shrink past the failing step
            }
            step *= settings.armijo_shrink;
        }
        let Some((new_point, f_new, used_step)) = accepted else {
            break; // no progress possible at this scale
        };
        step_hint = used_step;

        let new_rgrad = new_point.tangent_project(&euclidean_grad(&new_point.value))?;
        let transported_old = new_point.transport(&rgrad)?;
        let transported_dir = new_point.transport(&dir)?;
        // Polak-Ribiere with nonnegativity restart.
        let denom = gnorm2;
        let mut nu = if denom > 0.0 {
            real_inner(&new_rgrad, &(&new_rgrad - &transported_old)) / denom
        } else {
            0.0
        };
        if settings.pr_restart {
            nu = nu.max(0.0);
        }
        dir = -&new_rgrad + transported_dir * Complex64::new(nu, 0.0);
        rgrad = new_rgrad;
        point = new_point;
        f_cur = f_new;
        trace.push(f_cur);
    }
    Ok((point, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm_sq;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_circle(rng: &mut ChaCha8Rng, r: usize, c: usize, modulus: f64) -> ManifoldPoint {
        let value = CMat::from_fn(r, c, |_, _| {
            Complex64::from_polar(modulus, rng.random::<f64>() * std::f64::consts::TAU)
        });
        ManifoldPoint::circle(value, modulus).unwrap()
    }

    fn random_scaled_unitary(rng: &mut ChaCha8Rng, m: usize, n: usize, g: f64) -> ManifoldPoint {
        let x = random_cmat(rng, m, n);
        let (u, _, v) = thin_svd(&x).unwrap();
        ManifoldPoint::scaled_unitary((u * v.adjoint()) * Complex64::new(g.sqrt(), 0.0), g).unwrap()
    }

    #[test]
    fn radial_direction_projects_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_circle(&mut rng, 4, 3, 0.5);
        let ambient = &p.value * Complex64::new(2.7, 0.0);
        let proj = p.tangent_project(&ambient).unwrap();
        assert!(proj.norm() < 1e-12);
    }

    #[test]
    fn circle_projection_tangent_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_circle(&mut rng, 5, 2, 0.3);
        let g = random_cmat(&mut rng, 5, 2);
        let t = p.tangent_project(&g).unwrap();
        for (ti, pi) in t.iter().zip(p.value.iter()) {
            assert!((ti.conj() * pi).re.abs() < 1e-12);
        }
        let tt = p.tangent_project(&t).unwrap();
        assert!((tt - &t).norm() < 1e-12);
    }

    #[test]
    fn scaled_unitary_projection_tangent_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = 1.7;
        let p = random_scaled_unitary(&mut rng, 3, 6, g);
        let a = random_cmat(&mut rng, 3, 6);
        let t = p.tangent_project(&a).unwrap();
        // Tangent condition: T X^H + X T^H = 0.
        let sym = &t * p.value.adjoint() + &p.value * t.adjoint();
        assert!(sym.norm() < 1e-10);
        let tt = p.tangent_project(&t).unwrap();
        assert!((tt - &t).norm() < 1e-10);
    }

    #[test]
    fn retract_zero_step_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_circle(&mut rng, 3, 3, 1.0);
        let d = random_cmat(&mut rng, 3, 3);
        let q = p.retract(&d, 0.0).unwrap();
        assert_eq!(p.value, q.value);
    }

    #[test]
    fn circle_retraction_preserves_phase() {
        let p = ManifoldPoint::circle(
            CMat::from_element(1, 1, Complex64::new(1.0, 0.0)),
            1.0,
        )
        .unwrap();
        // Move so the intermediate entry becomes 0.3 + 0.4j, then renormalize.
        let d = CMat::from_element(1, 1, Complex64::new(-0.7, 0.4));
        let q = p.retract(&d, 1.0).unwrap();
        assert_abs_diff_eq!(q.value[(0, 0)].re, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(q.value[(0, 0)].im, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn circle_retraction_zero_entry_errors() {
        let p = ManifoldPoint::circle(
            CMat::from_element(1, 1, Complex64::new(1.0, 0.0)),
            1.0,
        )
        .unwrap();
        let d = CMat::from_element(1, 1, Complex64::new(-1.0, 0.0));
        assert!(matches!(p.retract(&d, 1.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn scaled_unitary_retraction_restores_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = 2.3;
        let p = random_scaled_unitary(&mut rng, 3, 7, g);
        for _ in 0..10 {
            let d = p.tangent_project(&random_cmat(&mut rng, 3, 7)).unwrap();
            let q = p.retract(&d, 0.7).unwrap();
            let gram = &q.value * q.value.adjoint();
            let dev = (gram - CMat::identity(3, 3) * Complex64::new(g, 0.0)).norm();
            assert!(dev < 1e-10, "Gram deviation {dev}");
        }
    }

    #[test]
    fn transport_lands_in_tangent_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_circle(&mut rng, 4, 2, 0.25);
        let v = random_cmat(&mut rng, 4, 2);
        let t = p.transport(&v).unwrap();
        for (ti, pi) in t.iter().zip(p.value.iter()) {
            assert!((ti.conj() * pi).re.abs() < 1e-12);
        }
        // Already-tangent input is unchanged; zero maps to zero.
        let t2 = p.transport(&t).unwrap();
        assert!((t2 - &t).norm() < 1e-12);
        assert!(p.transport(&CMat::zeros(4, 2)).unwrap().norm() == 0.0);
    }

    #[test]
    fn rcg_circle_matches_phase_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let modulus = 0.5;
        let a = random_cmat(&mut rng, 6, 4);
        let cost = |f: &CMat| fro_norm_sq(&(f - &a));
        let grad = |f: &CMat| (f - &a) * Complex64::new(2.0, 0.0);
        let start = random_circle(&mut rng, 6, 4, modulus);
        let settings = RcgSettings {
            max_inner_iters: 500,
            ..RcgSettings::default()
        };
        let (end, trace) = rcg_minimize(cost, grad, start, &settings).unwrap();
        // Oracle: entrywise phase projection of A.
        let oracle = CMat::from_fn(6, 4, |i, j| {
            Complex64::from_polar(modulus, a[(i, j)].arg())
        });
        let best = fro_norm_sq(&(&oracle - &a));
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_abs_diff_eq!(cost(&end.value), best, epsilon = 1e-6);
    }

    #[test]
    fn rcg_scaled_unitary_matches_procrustes_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = 1.9;
        let b = random_cmat(&mut rng, 3, 6);
        let cost = |f: &CMat| fro_norm_sq(&(f - &b));
        let grad = |f: &CMat| (f - &b) * Complex64::new(2.0, 0.0);
        let start = random_scaled_unitary(&mut rng, 3, 6, g);
        let settings = RcgSettings {
            max_inner_iters: 500,
            ..RcgSettings::default()
        };
        let (end, trace) = rcg_minimize(cost, grad, start, &settings).unwrap();
        // Orthogonal-Procrustes oracle: sqrt(g) times the polar factor of B.
        let (u, _, v) = thin_svd(&b).unwrap();
        let oracle = (u * v.adjoint()) * Complex64::new(g.sqrt(), 0.0);
        let best = fro_norm_sq(&(&oracle - &b));
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_abs_diff_eq!(cost(&end.value), best, epsilon = 1e-6);
    }

    #[test]
    fn rcg_stationary_start_terminates_quickly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let modulus = 1.0;
        let a = random_cmat(&mut rng, 4, 4);
        let oracle = CMat::from_fn(4, 4, |i, j| {
            Complex64::from_polar(modulus, a[(i, j)].arg())
        });
        let start = ManifoldPoint::circle(oracle, modulus).unwrap();
        let cost = |f: &CMat| fro_norm_sq(&(f - &a));
        let grad = |f: &CMat| (f - &a) * Complex64::new(2.0, 0.0);
        let settings = RcgSettings {
            grad_tol: 1e-8,
            ..RcgSettings::default()
        };
        let (_, trace) = rcg_minimize(cost, grad, start, &settings).unwrap();
        assert!(trace.len() <= 3, "took {} iterations", trace.len());
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn riemannian_gradient_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_cmat(&mut rng, 5, 3);
        let cost = |f: &CMat| fro_norm_sq(&(f - &a));
        let p = random_circle(&mut rng, 5, 3, 0.4);
        let egrad = (&p.value - &a) * Complex64::new(2.0, 0.0);
        let rgrad = p.tangent_project(&egrad).unwrap();
        let h = 1e-6;
        for _ in 0..20 {
            let xi = p.tangent_project(&random_cmat(&mut rng, 5, 3)).unwrap();
            // Central difference along the curve point + t*xi (ambient line is
            // first-order tangent to the retraction curve).
            let fp = cost(&(&p.value + &xi * Complex64::new(h, 0.0)));
            let fm = cost(&(&p.value - &xi * Complex64::new(h, 0.0)));
            let fd = (fp - fm) / (2.0 * h);
            let ip = real_inner(&rgrad, &xi);
            assert_abs_diff_eq!(ip, fd, epsilon = 1e-4 * fd.abs().max(1e-6));
        }
    }

    #[test]
    fn non_finite_cost_reports_numeric_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_circle(&mut rng, 2, 2, 1.0);
        let cost = |_: &CMat| f64::NAN;
        let grad = |f: &CMat| f.clone();
        assert!(matches!(
            rcg_minimize(cost, grad, p, &RcgSettings::default()),
            Err(Error::Numeric(_))
        ));
    }
}
