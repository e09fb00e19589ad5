//! Small complex linear-algebra helpers shared by the design modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Real inner product Re{tr(A^H B)}.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn fro_norm_sq(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Full SVD H = U diag(s) V^H with square unitary U (n_r x n_r) and V (n_t x n_t).
///
/// V comes from the eigendecomposition of H^H H; U columns on the range of H are
/// H v_i / s_i, and the remainder is completed to an orthonormal basis so the
/// reconstruction holds exactly including rank-deficient channels.
pub struct FullSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

pub fn full_svd(h: &CMat) -> FullSvd {
    let (nr, nt) = h.shape();
    let gram = h.adjoint() * h;
    let (evals, v) = hermitian_eigen_desc(&gram);
    let k = nr.min(nt);
    let singular_values: Vec<f64> = evals.iter().take(k).map(|&e| e.max(0.0).sqrt()).collect();
    let smax = singular_values.first().copied().unwrap_or(0.0);
    // Singular values below ~1e-8 relative are pure noise of the Gram-based
    // eigendecomposition (eps under the square root); treating them as exact
    // zeros keeps the computed U columns orthonormal.
    let cutoff = smax * 1e-7;

    let mut u = CMat::zeros(nr, nr);
    let mut filled = 0usize;
    for i in 0..k {
        if singular_values[i] > cutoff {
            let col = h * v.column(i) / Complex64::new(singular_values[i], 0.0);
            u.set_column(filled, &col);
            filled += 1;
        }
    }
    // Complete U to an orthonormal basis over the null space of H^H.
    let mut candidate = 0usize;
    while filled < nr && candidate < 2 * nr {
        let mut col = CVec::zeros(nr);
        if candidate < nr {
            col[candidate] = Complex64::new(1.0, 0.0);
        } else {
            col[candidate - nr] = Complex64::new(0.0, 1.0);
        }
        for j in 0..filled {
            let proj = u.column(j).dotc(&col);
            col -= u.column(j) * proj;
        }
        let norm = col.norm();
        if norm > 1e-6 {
            u.set_column(filled, &(col / Complex64::new(norm, 0.0)));
            filled += 1;
        }
        candidate += 1;
    }
    debug_assert_eq!(filled, nr);

    FullSvd {
        u,
        singular_values,
        v,
    }
}

/// Thin SVD wrapper returning (U, s, V) with V as n x k columns.
pub fn thin_svd(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not produce V".into()))?;
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    Ok((u, s, v_t.adjoint()))
}

/// Solve the Hermitian positive-definite system G x = B via Cholesky.
pub fn solve_hpd(g: &CMat, b: &CMat, context: &str) -> Result<CMat> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(context.to_string()))?;
    Ok(chol.solve(b))
}

/// vec(A): column-stacking of a matrix.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_iterator(m.nrows() * m.ncols(), m.iter().copied())
}
