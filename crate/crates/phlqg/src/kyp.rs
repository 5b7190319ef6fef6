//! Reduced Kalman-Yakubovich-Popov linear matrix inequalities and their
//! maximal solutions via an artificial-feedthrough regularization.
//!
//! The LMI `W(X) >= 0` on the differential part has the block form
//!
//! ```text
//! W(X) = [ -A11^T X - X A11 - Hq    C1^T - X B1 + Wc ]
//!        [ (C1^T - X B1 + Wc)^T     S                ]
//! ```
//!
//! where the extras `Hq` (quadratic) and `Wc` (cross) vanish for the
//! index-1 variant. Adding `eps * I` to the singular lower-right block `S`
//! turns the extremal-solution problem into an algebraic Riccati equation
//! associated with the Schur complement; the maximal root is obtained by
//! selecting the anti-stable invariant subspace. The dual route (minimal
//! solution of the dual problem, then inversion) is provided as a
//! cross-check.

use crate::hamiltonian::DecoupledWcf;
use crate::linalg;
use crate::riccati::{self, QuadraticSign};
use crate::{tol, Error, Mat, Result};

/// Which reduced KYP LMI shape is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KypVariant {
    /// Impulse-free systems, no feedback applied.
    Index1,
    /// Arbitrary index after the regularizing output feedback.
    General,
}

/// Reduced KYP LMI data on the differential part of a decoupled system.
#[derive(Debug, Clone)]
pub struct ReducedKypProblem {
    pub a11: Mat,
    pub b1: Mat,
    pub c1: Mat,
    /// Lower-right block: `-C2 B2 - B2^T C2^T`, minus `2 B2^T C2^T C2 B2`
    /// for the general variant.
    pub s_block: Mat,
    /// Cross extra in the (1,2) block; zero for index-1, `2 C1^T C2 B2`
    /// for the general variant.
    pub cross_extra: Mat,
    /// Quadratic extra in the (1,1) block; zero for index-1, `2 C1^T C1`
    /// for the general variant.
    pub quad_extra: Mat,
    pub variant: KypVariant,
    /// The Hamiltonian block `Q11` of the source system; a guaranteed
    /// solution used as the certificate anchor.
    pub q11: Mat,
}

impl ReducedKypProblem {
    /// Dimension of the differential part.
    pub fn r(&self) -> usize {
        self.a11.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b1.ncols()
    }
}

/// Assembles the LMI block matrix `W(X)`.
pub fn assemble_w(problem: &ReducedKypProblem, x: &Mat) -> Mat {
    let r = problem.r();
    let m = problem.m();
    let mut w = Mat::zeros(r + m, r + m);
    let top_left =
        -(problem.a11.transpose() * x) - x * &problem.a11 - &problem.quad_extra;
    let top_right = problem.c1.transpose() - x * &problem.b1 + &problem.cross_extra;
    w.view_mut((0, 0), (r, r)).copy_from(&top_left);
    w.view_mut((0, r), (r, m)).copy_from(&top_right);
    w.view_mut((r, 0), (m, r)).copy_from(&top_right.transpose());
    w.view_mut((r, r), (m, m)).copy_from(&problem.s_block);
    w
}

/// Smallest eigenvalue of `W(X)`.
pub fn lmi_residual(problem: &ReducedKypProblem, x: &Mat) -> f64 {
    linalg::min_sym_eig(&assemble_w(problem, x))
}

/// Builds the reduced KYP problem from a decoupled system and certifies
/// that `Q11` satisfies it.
pub fn build_reduced_kyp(wcf: &DecoupledWcf, variant: KypVariant) -> Result<ReducedKypProblem> {
    match variant {
        KypVariant::Index1 if wcf.fed_back => {
            return Err(Error::InvalidArgument(
                "index-1 KYP variant expects a decoupling without output feedback".into(),
            ))
        }
        KypVariant::General if !wcf.fed_back => {
            return Err(Error::InvalidArgument(
                "general KYP variant expects the output-feedback decoupling".into(),
            ))
        }
        _ => {}
    }
    let r = wcf.r;
    let m = wcf.b1.ncols();
    let c2b2 = &wcf.c2 * &wcf.b2;
    let mut s_block = -(&c2b2) - c2b2.transpose();
    let (cross_extra, quad_extra) = match variant {
        KypVariant::Index1 => (Mat::zeros(r, m), Mat::zeros(r, r)),
        KypVariant::General => {
            s_block -= 2.0 * c2b2.transpose() * &c2b2;
            (
                2.0 * wcf.c1.transpose() * &wcf.c2 * &wcf.b2,
                2.0 * wcf.c1.transpose() * &wcf.c1,
            )
        }
    };
    let problem = ReducedKypProblem {
        a11: wcf.a11.clone(),
        b1: wcf.b1.clone(),
        c1: wcf.c1.clone(),
        s_block: linalg::sym_part(&s_block),
        cross_extra,
        quad_extra,
        variant,
        q11: wcf.q11.clone(),
    };
    let w_q11 = assemble_w(&problem, &wcf.q11);
    let lambda_min = linalg::min_sym_eig(&w_q11);
    let gate = 1e-7 * tol::scale(w_q11.norm());
    if lambda_min < -gate {
        return Err(Error::CertificateFailure {
            lambda_min,
            tol: gate,
        });
    }
    Ok(problem)
}

/// Regularized Schur-complement data with the inverse taken analytically:
/// `A^ = A11 - B1 Se^{-1} W12^T`, `G = B1 Se^{-1} B1^T`,
/// `H = Hq + W12 Se^{-1} W12^T`, `Se = S + eps I`. Only the dual
/// cross-check route forms these strongly graded matrices explicitly.
struct RegularizedAre {
    s_eps: Mat,
    w12: Mat,
    a_hat: Mat,
    g: Mat,
    h: Mat,
}

fn regularized_are(problem: &ReducedKypProblem, eps: f64) -> Result<RegularizedAre> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(
            "KYP regularization eps must be positive".into(),
        ));
    }
    let m = problem.m();
    let s_eps = linalg::sym_part(&(&problem.s_block + Mat::identity(m, m) * eps));
    let eig = s_eps.clone().symmetric_eigen();
    let min_ev = eig.eigenvalues.min();
    if min_ev <= 0.0 {
        return Err(Error::NoMaximalSolution(format!(
            "regularized S block is not positive definite (lambda_min = {min_ev:e})"
        )));
    }
    let mut inv_diag = Mat::zeros(m, m);
    for i in 0..m {
        inv_diag[(i, i)] = 1.0 / eig.eigenvalues[i];
    }
    let s_inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();

    let w12 = problem.c1.transpose() + &problem.cross_extra;
    let a_hat = &problem.a11 - &problem.b1 * &s_inv * w12.transpose();
    let g = &problem.b1 * &s_inv * problem.b1.transpose();
    let h = &problem.quad_extra + &w12 * &s_inv * w12.transpose();
    Ok(RegularizedAre {
        s_eps,
        w12,
        a_hat,
        g: linalg::sym_part(&g),
        h: linalg::sym_part(&h),
    })
}

/// Largest subspace contained in `ker(B1^T) & ker(W12^T) & ker(Hq)` that is
/// invariant under `A11` and `A11^T`. On it every LMI solution bounded by
/// the maximal one vanishes and the extremal subspace selection
/// degenerates, so it is split off before solving. (On this subspace the
/// Schur-complement closed loop reduces to `A11` itself, so invariance
/// under `A11` is the right notion and avoids the graded `A^`.)
fn degenerate_subspace(problem: &ReducedKypProblem) -> Mat {
    let r = problem.r();
    let m = problem.m();
    let w12 = problem.c1.transpose() + &problem.cross_extra;
    let mut stacked = Mat::zeros(2 * m + r, r);
    stacked
        .view_mut((0, 0), (m, r))
        .copy_from(&problem.b1.transpose());
    stacked.view_mut((m, 0), (m, r)).copy_from(&w12.transpose());
    stacked
        .view_mut((2 * m, 0), (r, r))
        .copy_from(&problem.quad_extra);
    let mut basis = linalg::kernel_basis(&stacked, tol::RANK);
    loop {
        if basis.ncols() == 0 {
            return basis;
        }
        let proj = Mat::identity(r, r) - &basis * basis.transpose();
        let fwd = &proj * &problem.a11 * &basis;
        let bwd = &proj * problem.a11.transpose() * &basis;
        let mut test = Mat::zeros(2 * r, basis.ncols());
        test.view_mut((0, 0), (r, basis.ncols())).copy_from(&fwd);
        test.view_mut((r, 0), (r, basis.ncols())).copy_from(&bwd);
        let keep = linalg::kernel_basis(&test, tol::RANK);
        if keep.ncols() == basis.ncols() {
            return basis;
        }
        basis = &basis * keep;
    }
}

/// Solves the Schur-complement ARE
/// `A^T X + X A + Hq + (W - X B) S^{-1} (W^T - B^T X) = 0`
/// through the extended structured pencil
///
/// ```text
/// E = diag(I, I, 0),  A = [ A    0     B ]
///                         [ -Hq  -A^T  W ]
///                         [ W^T  -B^T  S ]
/// ```
///
/// whose deflating subspace `[V1; V2; U]` for the selected half-plane
/// yields `X = V2 V1^{-1}`. `S^{-1}` is never formed, so tiny
/// regularizations do not grade the matrices.
fn solve_schur_complement_are(
    a: &Mat,
    b: &Mat,
    w: &Mat,
    s: &Mat,
    hq: &Mat,
    anti_stable: bool,
) -> Result<Mat> {
    let r = a.nrows();
    let m = s.nrows();
    let dim = 2 * r + m;
    let mut script_e = Mat::zeros(dim, dim);
    for i in 0..2 * r {
        script_e[(i, i)] = 1.0;
    }
    let mut script_a = Mat::zeros(dim, dim);
    script_a.view_mut((0, 0), (r, r)).copy_from(a);
    script_a.view_mut((0, 2 * r), (r, m)).copy_from(b);
    script_a.view_mut((r, 0), (r, r)).copy_from(&(-hq));
    script_a.view_mut((r, r), (r, r)).copy_from(&(-a.transpose()));
    script_a.view_mut((r, 2 * r), (r, m)).copy_from(w);
    script_a
        .view_mut((2 * r, 0), (m, r))
        .copy_from(&w.transpose());
    script_a
        .view_mut((2 * r, r), (m, r))
        .copy_from(&(-b.transpose()));
    script_a.view_mut((2 * r, 2 * r), (m, m)).copy_from(s);

    let basis = if anti_stable {
        linalg::stable_deflating_subspace(&script_e, &(-script_a), r)?
    } else {
        linalg::stable_deflating_subspace(&script_e, &script_a, r)?
    };
    let v1 = basis.view((0, 0), (r, r)).into_owned();
    let v2 = basis.view((r, 0), (r, r)).into_owned();
    let cond_v1 = linalg::cond(&v1);
    if !cond_v1.is_finite() || cond_v1 > tol::COND_LIMIT {
        return Err(Error::IllConditioned {
            cond: cond_v1,
            limit: tol::COND_LIMIT,
        });
    }
    let v1_inv = linalg::inv_checked(&v1, tol::COND_LIMIT, "deflating leading block")?;
    Ok(linalg::sym_part(&(v2 * v1_inv)))
}

fn map_solver_error(e: Error) -> Error {
    match e {
        Error::NoStabilizingSolution(msg) => Error::NoMaximalSolution(msg),
        other => other,
    }
}

/// Maximal solution of the regularized reduced KYP LMI by selecting the
/// anti-stable invariant subspace of the Schur-complement ARE.
///
/// The returned `X` is symmetric, satisfies `lambda_min(W(X))` down to a
/// small multiple of `eps`, and dominates `Q11` up to `1e-6 * scale`.
pub fn solve_max(problem: &ReducedKypProblem, eps: f64) -> Result<Mat> {
    let x = solve_extremal(problem, eps, Route::Direct)?;
    certify_max(problem, &x, eps)?;
    Ok(x)
}

/// Cross-check route: solves the dual problem for its minimal solution and
/// inverts. Agrees with [`solve_max`] on nondegenerate problems; kept as
/// an independent oracle.
pub fn solve_max_via_dual(problem: &ReducedKypProblem, eps: f64) -> Result<Mat> {
    let x = solve_extremal(problem, eps, Route::DualInverted)?;
    certify_max(problem, &x, eps)?;
    Ok(x)
}

#[derive(Clone, Copy, PartialEq)]
enum Route {
    Direct,
    DualInverted,
}

fn solve_extremal(problem: &ReducedKypProblem, eps: f64, route: Route) -> Result<Mat> {
    let r = problem.r();
    let are = regularized_are(problem, eps)?;
    let v0 = degenerate_subspace(problem);
    let (w1, k0) = if v0.ncols() == 0 {
        (Mat::identity(r, r), 0)
    } else {
        (linalg::kernel_basis(&v0.transpose(), tol::RANK), v0.ncols())
    };
    let dim = r - k0;
    if dim == 0 {
        return Ok(Mat::zeros(r, r));
    }
    let a_r = w1.transpose() * &problem.a11 * &w1;
    let x_r = match route {
        Route::Direct => {
            let b_r = w1.transpose() * &problem.b1;
            let w_r = w1.transpose() * &are.w12;
            let hq_r = linalg::sym_part(&(w1.transpose() * &problem.quad_extra * &w1));
            solve_schur_complement_are(&a_r, &b_r, &w_r, &are.s_eps, &hq_r, true)
                .map_err(map_solver_error)?
        }
        Route::DualInverted => {
            // Independent cross-check: the dual minimal solution through
            // the explicitly inverted (graded) Schur-complement data.
            let a_hat_r = w1.transpose() * &are.a_hat * &w1;
            let g_r = linalg::sym_part(&(w1.transpose() * &are.g * &w1));
            let h_r = linalg::sym_part(&(w1.transpose() * &are.h * &w1));
            let y = riccati::solve_quadratic(
                &a_hat_r.transpose(),
                &h_r,
                &g_r,
                QuadraticSign::Plus,
                false,
            )
            .map_err(map_solver_error)?;
            let cond_y = linalg::cond(&y);
            if !cond_y.is_finite() || cond_y > tol::COND_LIMIT {
                return Err(Error::IllConditioned {
                    cond: cond_y,
                    limit: tol::COND_LIMIT,
                });
            }
            linalg::sym_part(&linalg::inv_checked(&y, tol::COND_LIMIT, "dual minimal solution")?)
        }
    };
    Ok(linalg::sym_part(&(&w1 * x_r * w1.transpose())))
}

fn certify_max(problem: &ReducedKypProblem, x: &Mat, eps: f64) -> Result<()> {
    let w = assemble_w(problem, x);
    let scale = tol::scale(w.norm());
    // 10*eps is the theoretical slack of the regularization; the floor
    // covers double-precision residuals of the underlying Riccati solve.
    let gate = (10.0 * eps * scale).max(1e-9 * scale);
    let lambda_min = linalg::min_sym_eig(&w);
    if lambda_min < -gate {
        return Err(Error::NoMaximalSolution(format!(
            "W(X_max) has eigenvalue {lambda_min:e} below -{gate:e}"
        )));
    }
    let dominance = linalg::min_sym_eig(&(x - &problem.q11));
    let dom_gate = 1e-6 * tol::scale(problem.q11.norm());
    if dominance < -dom_gate {
        return Err(Error::NoMaximalSolution(format!(
            "X_max does not dominate Q11 (lambda_min of difference {dominance:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_problem() -> ReducedKypProblem {
        ReducedKypProblem {
            a11: -Mat::identity(1, 1),
            b1: Mat::identity(1, 1),
            c1: Mat::identity(1, 1),
            s_block: Mat::zeros(1, 1),
            cross_extra: Mat::zeros(1, 1),
            quad_extra: Mat::zeros(1, 1),
            variant: KypVariant::Index1,
            q11: Mat::identity(1, 1),
        }
    }

    #[test]
    fn scalar_w_blocks() {
        let p = scalar_problem();
        let x = Mat::from_element(1, 1, 0.25);
        let w = assemble_w(&p, &x);
        let expect = Mat::from_row_slice(2, 2, &[0.5, 0.75, 0.75, 0.0]);
        assert_relative_eq!((w - expect).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_maximal_root() {
        // Exact regularized root 1 + eps + sqrt(2 eps + eps^2).
        let p = scalar_problem();
        let eps = 1e-12;
        let x = solve_max(&p, eps).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 2e-6);
        let exact = 1.0 + eps + (2.0 * eps + eps * eps).sqrt();
        assert_relative_eq!(x[(0, 0)], exact, epsilon = 1e-9);
        assert!(lmi_residual(&p, &x) >= -1e-6);
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = ReducedKypProblem {
            a11: -Mat::identity(2, 2),
            b1: Mat::zeros(2, 1),
            c1: Mat::zeros(1, 2),
            s_block: Mat::zeros(1, 1),
            cross_extra: Mat::zeros(2, 1),
            quad_extra: Mat::zeros(2, 2),
            variant: KypVariant::Index1,
            q11: Mat::zeros(2, 2),
        };
        let x = solve_max(&p, 1e-12).unwrap();
        assert!(x.norm() < 1e-12);
    }

    #[test]
    fn decoupled_two_by_two() {
        // A11 = diag(-1, -2), B1 = e1, C1 = e1^T: the second coordinate is
        // untouched by the data, so the maximal root is diag(~1, 0).
        let p = ReducedKypProblem {
            a11: Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            b1: Mat::from_column_slice(2, 1, &[1.0, 0.0]),
            c1: Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            s_block: Mat::zeros(1, 1),
            cross_extra: Mat::zeros(2, 1),
            quad_extra: Mat::zeros(2, 2),
            variant: KypVariant::Index1,
            q11: Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0])),
        };
        let x = solve_max(&p, 1e-12).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 2e-6);
        assert!(x[(1, 1)].abs() < 1e-10);
        assert!(x[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn exceeding_the_maximum_violates_the_lmi() {
        let p = scalar_problem();
        let x = solve_max(&p, 1e-12).unwrap();
        let beyond = &x + Mat::identity(1, 1) * 1e-3;
        assert!(lmi_residual(&p, &beyond) < 0.0);
        // Small downward perturbations stay near-feasible.
        let below = &x - Mat::identity(1, 1) * 1e-3;
        assert!(lmi_residual(&p, &below) >= -1e-6);
    }

    #[test]
    fn dual_route_agrees_scalar() {
        let p = scalar_problem();
        let direct = solve_max(&p, 1e-12).unwrap();
        let dual = solve_max_via_dual(&p, 1e-12).unwrap();
        assert_relative_eq!(direct[(0, 0)], dual[(0, 0)], max_relative = 1e-9);
    }

    #[test]
    fn eps_sensitivity_is_mild() {
        let p = scalar_problem();
        let x10 = solve_max(&p, 1e-10).unwrap()[(0, 0)];
        let x12 = solve_max(&p, 1e-12).unwrap()[(0, 0)];
        assert!(((x10 - x12) / x12).abs() <= 1e-4);
    }
}
