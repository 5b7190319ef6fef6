//! Dense matrix kernels shared by the solver modules: Moore-Penrose
//! pseudo-inverse, semidefinite factorization, ordered invariant subspaces,
//! and matrix-pencil spectral analysis.

mod pencil;
mod schur;

pub use pencil::{pencil_spectrum, stable_deflating_subspace, PencilInfo};
pub use schur::{eigenvalues, ordered_invariant_subspace};

use crate::{tol, C64, CMat, Error, Mat, Result};

/// Returns an error if the matrix contains NaN or infinite entries.
pub fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// `tol * sigma_max` are treated as zero.
pub fn pinv(m: &Mat, tol: f64) -> Mat {
    if m.is_empty() {
        return Mat::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max();
    let cut = tol * smax;
    let mut sinv = Mat::zeros(vt.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Numerical rank: count of singular values above `tol * sigma_max`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Spectral condition number `sigma_max / sigma_min`; infinite when the
/// smallest singular value underflows.
pub fn cond(m: &Mat) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Inverse with a condition-number guard.
pub fn inv_checked(m: &Mat, limit: f64, what: &str) -> Result<Mat> {
    let c = cond(m);
    if !c.is_finite() || c > limit {
        return Err(Error::SingularTransformation(format!(
            "{what}: cond estimate {c:e} exceeds {limit:e}"
        )));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularTransformation(format!("{what}: LU inversion failed")))
}

/// Symmetric part `(M + M^T) / 2`.
pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius-norm symmetry defect `||M - M^T||`.
pub fn sym_defect(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_part(m).symmetric_eigen().eigenvalues.min()
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_sym_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_part(m).symmetric_eigen().eigenvalues.max()
}

/// Full-column-rank factor `L` of a symmetric positive semidefinite matrix,
/// `L L^T = M`. Eigenvalues in `[-tol_abs, tol_abs]` (with
/// `tol_abs = tol * max(|lambda|)`) are clipped to zero; the column count of
/// `L` is the numerical rank of `M`.
pub fn psd_factor(m: &Mat, tol: f64) -> Result<Mat> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "psd_factor expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = tol::scale(m.norm());
    let defect = sym_defect(m);
    if defect > tol * scale {
        return Err(Error::NotSymmetric {
            defect,
            tol: tol * scale,
        });
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let eig = sym_part(m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let cut = tol * lmax.max(1.0);
    let lmin = eig.eigenvalues.min();
    if lmin < -cut {
        return Err(Error::NotPsd {
            lambda_min: lmin,
            tol: cut,
        });
    }
    let kept: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let mut l = Mat::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let col = eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt();
        l.set_column(j, &col);
    }
    Ok(l)
}

/// Nearest positive semidefinite matrix in the spectral sense: symmetrize
/// and clamp negative eigenvalues to zero.
pub fn psd_clip(m: &Mat) -> Mat {
    if m.is_empty() {
        return m.clone();
    }
    let eig = sym_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = eig.eigenvalues[i].max(0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Symmetric square root of a positive semidefinite matrix (eigenvalues
/// clipped at zero).
pub fn psd_sqrt(m: &Mat) -> Mat {
    if m.is_empty() {
        return m.clone();
    }
    let eig = sym_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    &eig.eigenvectors * s * eig.eigenvectors.transpose()
}

/// Converts a real matrix into a complex one.
pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Smallest singular value of a complex matrix.
pub fn smallest_singular_complex(m: &CMat) -> f64 {
    m.clone().singular_values().min()
}

/// Numerical rank of a complex matrix.
pub fn rank_complex(m: &CMat, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis of the kernel of `m` (right null space).
///
/// Computed from the eigendecomposition of `M^T M`, which is adequate for
/// the structurally well-separated kernels this crate works with.
pub fn kernel_basis(m: &Mat, tol: f64) -> Mat {
    let n = m.ncols();
    if m.nrows() == 0 || n == 0 {
        return Mat::identity(n, n);
    }
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.max().max(0.0);
    let cut = lmax * (tol * tol).max(1e-14) + f64::MIN_POSITIVE;
    let kept: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= cut).collect();
    let mut basis = Mat::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        basis.set_column(j, &eig.eigenvectors.column(i));
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_diagonal() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
        let p = pinv(&m, tol::RANK);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn pinv_identity() {
        let m = Mat::identity(3, 3);
        let p = pinv(&m, tol::RANK);
        assert_relative_eq!((p - Mat::identity(3, 3)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_column() {
        // Normal-equations oracle: pinv of the column (1,1)^T is (0.5, 0.5).
        let m = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = pinv(&m, tol::RANK);
        assert_eq!(p.shape(), (1, 2));
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[(0, 1)], 0.5, epsilon = 1e-14);
    }

    fn penrose_ok(m: &Mat, p: &Mat) -> bool {
        let scale = tol::scale(m.norm());
        let e1 = (m * p * m - m).norm();
        let e2 = (p * m * p - p).norm();
        let mp = m * p;
        let pm = p * m;
        let e3 = (&mp - mp.transpose()).norm();
        let e4 = (&pm - pm.transpose()).norm();
        e1 <= 1e-10 * scale && e2 <= 1e-10 * tol::scale(p.norm()) && e3 <= 1e-10 * scale
            && e4 <= 1e-10 * scale
    }

    #[test]
    fn pinv_penrose_mixed_rank() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for rank in [1usize, 5, 15, 30] {
            let a = Mat::from_fn(50, rank, |_, _| rng.gen_range(-1.0..1.0));
            let b = Mat::from_fn(rank, 30, |_, _| rng.gen_range(-1.0..1.0));
            let m = a * b;
            let p = pinv(&m, tol::RANK);
            assert!(penrose_ok(&m, &p), "penrose identities failed at rank {rank}");
        }
    }

    #[test]
    fn psd_factor_zero_matrix() {
        let m = Mat::zeros(2, 2);
        let l = psd_factor(&m, tol::STRUCTURE).unwrap();
        assert_eq!(l.shape(), (2, 0));
    }

    #[test]
    fn psd_factor_identity() {
        let l = psd_factor(&Mat::identity(3, 3), tol::STRUCTURE).unwrap();
        assert_eq!(l.ncols(), 3);
        assert_relative_eq!((&l * l.transpose() - Mat::identity(3, 3)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_factor_rank_one() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&m, tol::STRUCTURE).unwrap();
        assert_eq!(l.ncols(), 1);
        assert_relative_eq!((&l * l.transpose() - &m).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_factor_rejects_asymmetric() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            psd_factor(&m, tol::STRUCTURE),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            psd_factor(&m, tol::STRUCTURE),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn psd_factor_reconstruction_random() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [1usize, 3, 6] {
            let a = Mat::from_fn(8, k, |_, _| rng.gen_range(-1.0..1.0));
            let m = &a * a.transpose();
            let l = psd_factor(&m, tol::STRUCTURE).unwrap();
            assert_eq!(l.ncols(), k);
            let err = (&l * l.transpose() - &m).norm();
            assert!(err <= 1e-10 * (1.0 + m.norm()));
        }
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let m = Mat::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
        let k = kernel_basis(&m, tol::RANK);
        assert_eq!(k.ncols(), 2);
        assert!((m * &k).norm() < 1e-12);
        assert!(((k.transpose() * &k) - Mat::identity(2, 2)).norm() < 1e-10);
    }
}
