//! Solvers for standard algebraic Riccati equations and for the modified
//! and original generalized algebraic Riccati equations (GAREs) of
//! port-Hamiltonian descriptor systems, with stabilizing-solution
//! certification.
//!
//! The control GARE
//! `A^T Pc + Pc^T A - Pc^T B B^T Pc + C^T C = 0`, `E^T Pc = Pc^T E`
//! is solved through the stable deflating subspace of an even matrix
//! pencil, reduced to a standard ARE on the algebraic part. The modified
//! filter GARE
//! `A Pf^T + Pf A^T - Pf C^T C Pf^T + B B^T + 2R = 0`, `E Pf^T = Pf E^T`
//! has the closed-form stabilizing solution `Q^{-T}`; a deflating-subspace
//! route is provided as well (and serves the original GAREs, which drop
//! the `2R` term).

use crate::linalg;
use crate::model::{self, DescriptorSystem, PortHamiltonianDAE};
use crate::{tol, Error, Mat, Result};

/// Which pair of generalized Riccati equations is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GareVariant {
    /// Filter equation carries the extra `2R` constant term.
    Modified,
    /// Plain LQG equations without the `2R` term.
    Original,
}

/// Which of the two dual equations a solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GareSide {
    Control,
    Filter,
}

/// Stabilizing solutions of a GARE pair together with their certificates.
#[derive(Debug, Clone)]
pub struct GareSolutionPair {
    pub p_c: Mat,
    pub p_f: Mat,
    pub residual_c: f64,
    pub residual_f: f64,
    pub stabilizing_c: bool,
    pub stabilizing_f: bool,
    pub variant: GareVariant,
}

/// Frobenius residuals of the four defining equations of a GARE pair.
#[derive(Debug, Clone, Copy)]
pub struct GareResiduals {
    /// Residual of the control Riccati equation.
    pub residual_c: f64,
    /// Residual of the filter Riccati equation.
    pub residual_f: f64,
    /// Symmetry defect `||E^T Pc - Pc^T E||`.
    pub sym_c: f64,
    /// Symmetry defect `||E Pf^T - Pf E^T||`.
    pub sym_f: f64,
}

/// Even matrix pencil whose stable deflating subspace encodes GARE
/// solutions: `script_e` is skew-symmetric, `script_a` symmetric.
#[derive(Debug, Clone)]
pub struct EvenPencil {
    pub script_e: Mat,
    pub script_a: Mat,
}

impl EvenPencil {
    fn new(script_e: Mat, script_a: Mat) -> Self {
        debug_assert!((&script_e + script_e.transpose()).norm() <= 1e-12 * (1.0 + script_e.norm()));
        debug_assert!(linalg::sym_defect(&script_a) <= 1e-12 * (1.0 + script_a.norm()));
        Self { script_e, script_a }
    }

    /// Even pencil for the control GARE of `(E, A, B, C)`:
    /// `([[0, -E], [E^T, 0]], [[-B B^T, -A], [-A^T, C^T C]])`.
    pub fn control(sys: &DescriptorSystem) -> Self {
        let n = sys.n();
        let mut se = Mat::zeros(2 * n, 2 * n);
        se.view_mut((0, n), (n, n)).copy_from(&(-&sys.e));
        se.view_mut((n, 0), (n, n)).copy_from(&sys.e.transpose());
        let mut sa = Mat::zeros(2 * n, 2 * n);
        sa.view_mut((0, 0), (n, n))
            .copy_from(&(-(&sys.b * sys.b.transpose())));
        sa.view_mut((0, n), (n, n)).copy_from(&(-&sys.a));
        sa.view_mut((n, 0), (n, n)).copy_from(&(-sys.a.transpose()));
        sa.view_mut((n, n), (n, n))
            .copy_from(&(sys.c.transpose() * &sys.c));
        Self::new(se, sa)
    }

    /// Even pencil for the filter GARE of `(E, A, B, C)` with constant term
    /// `B B^T + 2R`:
    /// `([[0, -E^T], [E, 0]], [[-C^T C, -A^T], [-A, B B^T + 2R]])`.
    pub fn filter(sys: &DescriptorSystem, r_mat: Option<&Mat>) -> Self {
        let n = sys.n();
        let mut se = Mat::zeros(2 * n, 2 * n);
        se.view_mut((0, n), (n, n)).copy_from(&(-sys.e.transpose()));
        se.view_mut((n, 0), (n, n)).copy_from(&sys.e);
        let mut constant = &sys.b * sys.b.transpose();
        if let Some(r) = r_mat {
            constant += r * 2.0;
        }
        let mut sa = Mat::zeros(2 * n, 2 * n);
        sa.view_mut((0, 0), (n, n))
            .copy_from(&(-(sys.c.transpose() * &sys.c)));
        sa.view_mut((0, n), (n, n)).copy_from(&(-sys.a.transpose()));
        sa.view_mut((n, 0), (n, n)).copy_from(&(-&sys.a));
        sa.view_mut((n, n), (n, n)).copy_from(&constant);
        Self::new(se, sa)
    }
}

/// Residual scale for a quadratic matrix equation built from these terms.
fn residual_scale(terms: &[&Mat]) -> f64 {
    tol::scale(terms.iter().map(|t| t.norm()).sum())
}

/// Solves `A^T X + X A - X G X + H = 0` for the symmetric stabilizing
/// solution via the stable invariant subspace of the Hamiltonian matrix
/// `[[A, -G], [-H, -A^T]]`. `A - G X` has its spectrum in the open left
/// half-plane.
pub fn solve_care(a: &Mat, g: &Mat, h: &Mat) -> Result<Mat> {
    solve_quadratic(a, g, h, QuadraticSign::Minus, false)
}

/// Sign of the quadratic term in `A^T X + X A (+/-) X G X + H = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QuadraticSign {
    Minus,
    Plus,
}

/// Shared Hamiltonian-subspace solver.
///
/// - `Minus`: `A^T X + X A - X G X + H = 0`, Hamiltonian
///   `[[A, -G], [-H, -A^T]]`, closed loop `A - G X`.
/// - `Plus`: `A^T X + X A + X G X + H = 0`, Hamiltonian
///   `[[A, G], [-H, -A^T]]`, closed loop `A + G X`.
///
/// With `anti_stable = false` the stable invariant subspace is selected
/// (closed loop stable); with `true` the anti-stable one (closed loop
/// anti-stable), which yields the maximal root used by the KYP solver.
pub(crate) fn solve_quadratic(
    a: &Mat,
    g: &Mat,
    h: &Mat,
    sign: QuadraticSign,
    anti_stable: bool,
) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || g.nrows() != n || g.ncols() != n || h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch(
            "Riccati solver expects square A, G, H of equal size".into(),
        ));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let mut ham = Mat::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    match sign {
        QuadraticSign::Minus => ham.view_mut((0, n), (n, n)).copy_from(&(-g)),
        QuadraticSign::Plus => ham.view_mut((0, n), (n, n)).copy_from(g),
    }
    ham.view_mut((n, 0), (n, n)).copy_from(&(-h));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let eigs = linalg::eigenvalues(&ham)?;
    let ham_scale = tol::scale(ham.norm());
    if let Some(l) = eigs
        .iter()
        .find(|l| l.re.abs() < tol::IMAG_AXIS_MARGIN * ham_scale.min(1.0).max(1e-6))
    {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian matrix has eigenvalue {l} inside the imaginary-axis margin"
        )));
    }
    let selector = move |l: crate::C64| if anti_stable { l.re > 0.0 } else { l.re < 0.0 };
    let (basis, k) = linalg::ordered_invariant_subspace(&ham, &selector)?;
    if k != n {
        return Err(Error::NoStabilizingSolution(format!(
            "invariant subspace has dimension {k}, expected {n}"
        )));
    }
    let u1 = basis.view((0, 0), (n, n)).into_owned();
    let u2 = basis.view((n, 0), (n, n)).into_owned();
    let cond_u1 = linalg::cond(&u1);
    if !cond_u1.is_finite() || cond_u1 > tol::COND_LIMIT {
        return Err(Error::IllConditioned {
            cond: cond_u1,
            limit: tol::COND_LIMIT,
        });
    }
    let u1_inv = linalg::inv_checked(&u1, tol::COND_LIMIT, "subspace leading block")?;
    let x = linalg::sym_part(&(u2 * u1_inv));

    let gx = g * &x;
    let quad = match sign {
        QuadraticSign::Minus => -(&x * &gx),
        QuadraticSign::Plus => &x * &gx,
    };
    let resid = (a.transpose() * &x + &x * a + quad + h).norm();
    let scale = residual_scale(&[a, g, h, &x]);
    if resid > tol::RESIDUAL * scale {
        return Err(Error::ResidualTooLarge {
            residual: resid,
            tol: tol::RESIDUAL * scale,
            context: "algebraic Riccati equation".into(),
        });
    }
    Ok(x)
}

/// Closed-form stabilizing solution `Q^{-T}` of the modified filter GARE,
/// with residual and semidefiniteness certification.
pub fn solve_filter_gare(ph: &PortHamiltonianDAE) -> Result<Mat> {
    let cond_q = linalg::cond(&ph.q);
    if !cond_q.is_finite() || cond_q > tol::COND_LIMIT {
        return Err(Error::IllConditionedQ {
            cond: cond_q,
            limit: tol::COND_LIMIT,
        });
    }
    let q_inv = linalg::inv_checked(&ph.q, tol::COND_LIMIT, "Q")?;
    let p_f = q_inv.transpose();

    let sys = ph.descriptor();
    let res = gare_residuals(&sys, Some(&ph.r), None, Some(&p_f), GareVariant::Modified);
    let scale = residual_scale(&[&sys.a, &sys.b, &sys.c, &p_f, &ph.r]);
    if res.residual_f > tol::RESIDUAL * scale || res.sym_f > tol::RESIDUAL * scale {
        return Err(Error::ResidualTooLarge {
            residual: res.residual_f.max(res.sym_f),
            tol: tol::RESIDUAL * scale,
            context: "modified filter GARE residual for Q^{-T}".into(),
        });
    }
    let epf = &sys.e * p_f.transpose();
    let lmin = linalg::min_sym_eig(&epf);
    if lmin < -tol::STRUCTURE * tol::scale(epf.norm()) {
        return Err(Error::NotStabilizing(format!(
            "E Pf^T has negative eigenvalue {lmin:e}"
        )));
    }
    Ok(p_f)
}

/// Blocks of the stable deflating subspace of an even pencil, oriented so
/// that the GARE assembly formulas of the reduction lemma apply directly.
struct DeflatingBlocks {
    v11: Mat,
    v12: Mat,
    v21: Mat,
    v22: Mat,
}

fn deflating_blocks(pencil: &EvenPencil, r: usize, n: usize) -> Result<DeflatingBlocks> {
    let v = linalg::stable_deflating_subspace(&pencil.script_e, &pencil.script_a, r)?;
    // The assembly formulas assume the orientation [P; I]; the subspace of
    // the pencil as written carries [P; -I], so flip the lower half.
    let v11 = v.view((0, 0), (r, r)).into_owned();
    let v12 = v.view((r, 0), (n - r, r)).into_owned();
    let v21 = -v.view((n, 0), (r, r)).into_owned();
    let v22 = -v.view((n + r, 0), (n - r, r)).into_owned();
    let sv = v21.clone().singular_values();
    let smin = sv.min();
    let smax = sv.max();
    if smin <= smax * 1e10 * f64::EPSILON || smin == 0.0 {
        return Err(Error::SingularV21 { sigma_min: smin });
    }
    Ok(DeflatingBlocks { v11, v12, v21, v22 })
}

/// Preconditioning transformation `S = diag(I_r, -A22^T)` that makes the
/// trailing block of `A` symmetric negative semidefinite, applied whenever
/// `A22` is invertible. Returns the preconditioned system and the factor
/// `S22` needed to map the solution back (`Pc = S^T Pc~ T`, `T = I`).
fn precondition_semi_explicit(
    sys: &DescriptorSystem,
    r: usize,
) -> Result<(DescriptorSystem, Option<Mat>)> {
    let n = sys.n();
    if r == n {
        return Ok((sys.clone(), None));
    }
    let a22 = sys.a.view((r, r), (n - r, n - r)).into_owned();
    let c = linalg::cond(&a22);
    if !c.is_finite() || c > 1e10 {
        return Ok((sys.clone(), None));
    }
    let mut s = Mat::identity(n, n);
    s.view_mut((r, r), (n - r, n - r))
        .copy_from(&(-a22.transpose()));
    let a2 = &s * &sys.a;
    let b2 = &s * &sys.b;
    let sys2 = DescriptorSystem::new(sys.e.clone(), a2, b2, sys.c.clone())?;
    Ok((sys2, Some(s)))
}

/// Stabilizing solution of the control GARE for a semi-explicit system via
/// the stable deflating subspace of the control even pencil and a helper
/// ARE on the algebraic part.
pub fn solve_control_gare(sys: &DescriptorSystem) -> Result<Mat> {
    let r = sys
        .semi_explicit_rank()
        .ok_or_else(|| Error::InvalidArgument("solve_control_gare expects a semi-explicit system".into()))?;
    let n = sys.n();
    let rep = model::structural_report(sys)?;
    if !rep.strongly_stabilizable || !rep.strongly_detectable {
        return Err(Error::NoStabilizingSolution(format!(
            "system is not strongly stabilizable/detectable: {rep:?}"
        )));
    }

    let (work, s_pre) = precondition_semi_explicit(sys, r)?;

    let pencil = EvenPencil::control(&work);
    let blocks = deflating_blocks(&pencil, r, n)?;
    let v21_inv = linalg::inv_checked(&blocks.v21, tol::COND_LIMIT, "V21")?;

    let a22 = work.a.view((r, r), (n - r, n - r)).into_owned();
    let b2 = work.b.view((r, 0), (n - r, work.m())).into_owned();
    let c2 = work.c.view((0, r), (work.p(), n - r)).into_owned();
    let p0c = solve_care(&a22, &(&b2 * b2.transpose()), &(c2.transpose() * &c2))?;

    let p11 = linalg::sym_part(&(&blocks.v11 * &v21_inv));
    let p21 = (&blocks.v12 - &p0c * &blocks.v22) * &v21_inv;
    let mut p_tilde = Mat::zeros(n, n);
    p_tilde.view_mut((0, 0), (r, r)).copy_from(&p11);
    p_tilde.view_mut((r, 0), (n - r, r)).copy_from(&p21);
    p_tilde.view_mut((r, r), (n - r, n - r)).copy_from(&p0c);

    let p_c = match &s_pre {
        Some(s) => s.transpose() * &p_tilde,
        None => p_tilde,
    };

    certify_control(sys, &p_c)?;
    Ok(p_c)
}

fn certify_control(sys: &DescriptorSystem, p_c: &Mat) -> Result<()> {
    let res = gare_residuals(sys, None, Some(p_c), None, GareVariant::Modified);
    let scale = residual_scale(&[&sys.a, &sys.b, &sys.c, p_c]);
    if res.residual_c > tol::RESIDUAL * scale || res.sym_c > tol::RESIDUAL * scale {
        return Err(Error::ResidualTooLarge {
            residual: res.residual_c.max(res.sym_c),
            tol: tol::RESIDUAL * scale,
            context: "control GARE residual".into(),
        });
    }
    if !is_stabilizing(sys, p_c, GareSide::Control)? {
        return Err(Error::NotStabilizing(
            "computed control solution fails the semidefiniteness test".into(),
        ));
    }
    Ok(())
}

/// Stabilizing solution of the filter GARE (with optional `2R` term) via
/// duality with the control GARE of `(E^T, A^T, C^T, B_hat^T)`.
pub fn solve_filter_gare_pencil(
    sys: &DescriptorSystem,
    r_mat: Option<&Mat>,
    variant: GareVariant,
) -> Result<Mat> {
    let b_hat = match (variant, r_mat) {
        (GareVariant::Modified, Some(r)) => {
            let l = linalg::psd_factor(r, tol::STRUCTURE)?;
            let mut b = Mat::zeros(sys.n(), sys.m() + l.ncols());
            b.view_mut((0, 0), (sys.n(), sys.m())).copy_from(&sys.b);
            b.view_mut((0, sys.m()), (sys.n(), l.ncols()))
                .copy_from(&(l * std::f64::consts::SQRT_2));
            b
        }
        (GareVariant::Modified, None) => {
            return Err(Error::InvalidArgument(
                "modified filter GARE needs the dissipation matrix R".into(),
            ))
        }
        (GareVariant::Original, _) => sys.b.clone(),
    };
    let dual = DescriptorSystem::new(
        sys.e.transpose(),
        sys.a.transpose(),
        sys.c.transpose(),
        b_hat.transpose(),
    )?;
    let x = solve_control_gare(&dual)?;
    let p_f = x.transpose();

    let res = gare_residuals(sys, r_mat, None, Some(&p_f), variant);
    let scale = residual_scale(&[&sys.a, &sys.b, &sys.c, &p_f]);
    if res.residual_f > tol::RESIDUAL * scale || res.sym_f > tol::RESIDUAL * scale {
        return Err(Error::ResidualTooLarge {
            residual: res.residual_f.max(res.sym_f),
            tol: tol::RESIDUAL * scale,
            context: "filter GARE residual".into(),
        });
    }
    Ok(p_f)
}

/// Solves both original (unmodified) GAREs on a semi-explicit descriptor
/// system by the deflating-subspace route.
pub fn solve_original_gares(sys: &DescriptorSystem) -> Result<GareSolutionPair> {
    let p_c = solve_control_gare(sys)?;
    let p_f = solve_filter_gare_pencil(sys, None, GareVariant::Original)?;
    let res = gare_residuals(sys, None, Some(&p_c), Some(&p_f), GareVariant::Original);
    let stabilizing_c = is_stabilizing(sys, &p_c, GareSide::Control)?;
    let stabilizing_f = is_stabilizing(sys, &p_f, GareSide::Filter)?;
    Ok(GareSolutionPair {
        p_c,
        p_f,
        residual_c: res.residual_c,
        residual_f: res.residual_f,
        stabilizing_c,
        stabilizing_f,
        variant: GareVariant::Original,
    })
}

/// Frobenius norms of the four defining equations. Missing solutions yield
/// zero entries for their side.
pub fn gare_residuals(
    sys: &DescriptorSystem,
    r_mat: Option<&Mat>,
    p_c: Option<&Mat>,
    p_f: Option<&Mat>,
    variant: GareVariant,
) -> GareResiduals {
    let mut out = GareResiduals {
        residual_c: 0.0,
        residual_f: 0.0,
        sym_c: 0.0,
        sym_f: 0.0,
    };
    if let Some(p) = p_c {
        let bbt = &sys.b * sys.b.transpose();
        out.residual_c = (sys.a.transpose() * p + p.transpose() * &sys.a
            - p.transpose() * &bbt * p
            + sys.c.transpose() * &sys.c)
            .norm();
        out.sym_c = (sys.e.transpose() * p - p.transpose() * &sys.e).norm();
    }
    if let Some(p) = p_f {
        let ctc = sys.c.transpose() * &sys.c;
        let mut constant = &sys.b * sys.b.transpose();
        if variant == GareVariant::Modified {
            if let Some(r) = r_mat {
                constant += r * 2.0;
            }
        }
        out.residual_f = (&sys.a * p.transpose() + p * sys.a.transpose()
            - p * &ctc * p.transpose()
            + constant)
            .norm();
        out.sym_f = (&sys.e * p.transpose() - p * sys.e.transpose()).norm();
    }
    out
}

/// Semidefiniteness test for a stabilizing GARE solution:
/// `E^T P >= 0` (control) or `E P^T >= 0` (filter). When the test passes,
/// the closed-loop pencil is cross-checked to be regular, impulse-free and
/// stable; disagreement is reported as an error.
pub fn is_stabilizing(sys: &DescriptorSystem, p: &Mat, side: GareSide) -> Result<bool> {
    let product = match side {
        GareSide::Control => sys.e.transpose() * p,
        GareSide::Filter => &sys.e * p.transpose(),
    };
    let scale = tol::scale(product.norm());
    let psd_ok = linalg::sym_defect(&product) <= tol::STRUCTURE * scale
        && linalg::min_sym_eig(&product) >= -tol::STRUCTURE * scale;
    if !psd_ok {
        return Ok(false);
    }
    let closed = match side {
        GareSide::Control => &sys.a - &sys.b * sys.b.transpose() * p,
        GareSide::Filter => &sys.a - p * sys.c.transpose() * &sys.c,
    };
    let info = linalg::pencil_spectrum(&sys.e, &closed, tol::RANK)?;
    if !info.is_admissible() {
        return Err(Error::InconsistentCertificates(format!(
            "E-weighted product is PSD but the closed-loop pencil is not admissible \
             (regular {}, impulse-free {}, stable {})",
            info.regular,
            info.impulse_free,
            info.finite_spectrum_stable()
        )));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn scalar_system() -> DescriptorSystem {
        DescriptorSystem::new(
            Mat::identity(1, 1),
            -Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn care_scalar_quadratic_root() {
        // x^2 + 2x - 1 = 0, stabilizing root sqrt(2) - 1.
        let x = solve_care(&(-Mat::identity(1, 1)), &Mat::identity(1, 1), &Mat::identity(1, 1))
            .unwrap();
        assert_relative_eq!(x[(0, 0)], SQRT2 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn care_zero_cost_zero_solution() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let x = solve_care(&a, &Mat::identity(2, 2), &Mat::zeros(2, 2)).unwrap();
        assert!(x.norm() < 1e-12);
    }

    #[test]
    fn care_scalar_integer_root() {
        // x^2 + 2x - 3 = 0, stabilizing root 1.
        let h = Mat::identity(1, 1) * 3.0;
        let x = solve_care(&(-Mat::identity(1, 1)), &Mat::identity(1, 1), &h).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn control_gare_scalar() {
        let sys = scalar_system();
        let p = solve_control_gare(&sys).unwrap();
        assert_relative_eq!(p[(0, 0)], SQRT2 - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn control_gare_zero_c() {
        // C = 0 with stable A: E^T Pc = 0.
        let sys = DescriptorSystem::new(
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]),
            Mat::identity(2, 2),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let p = solve_control_gare(&sys).unwrap();
        assert!((sys.e.transpose() * &p).norm() < 1e-10);
    }

    #[test]
    fn filter_gare_identity_q() {
        let ph = model::assemble(
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            tol::STRUCTURE,
        )
        .unwrap();
        // Pf = 1 solves A Pf + Pf A - Pf C C Pf + BB + 2R = -2 - 1 + 1 + 2 = 0.
        let p_f = solve_filter_gare(&ph).unwrap();
        assert_relative_eq!(p_f[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn original_gares_scalar_coincide() {
        let sys = scalar_system();
        let pair = solve_original_gares(&sys).unwrap();
        assert_relative_eq!(pair.p_c[(0, 0)], SQRT2 - 1.0, epsilon = 1e-10);
        assert_relative_eq!(pair.p_f[(0, 0)], SQRT2 - 1.0, epsilon = 1e-10);
        assert!(pair.stabilizing_c && pair.stabilizing_f);
        assert!(pair.residual_c < 1e-10 && pair.residual_f < 1e-10);
    }

    #[test]
    fn duality_on_symmetric_system() {
        // B = C^T with symmetric stable A: Pc = Pf^T.
        let a = Mat::from_row_slice(3, 3, &[-2.0, 0.4, 0.1, 0.4, -1.5, 0.2, 0.1, 0.2, -3.0]);
        let b = Mat::from_column_slice(3, 1, &[1.0, 0.5, -0.25]);
        let sys = DescriptorSystem::new(Mat::identity(3, 3), a, b.clone(), b.transpose()).unwrap();
        let pair = solve_original_gares(&sys).unwrap();
        assert!((&pair.p_c - pair.p_f.transpose()).norm() < 1e-7 * pair.p_c.norm());
    }

    #[test]
    fn stabilizing_flags() {
        let sys = scalar_system();
        let good = Mat::from_element(1, 1, SQRT2 - 1.0);
        let anti = Mat::from_element(1, 1, -(SQRT2 + 1.0));
        assert!(is_stabilizing(&sys, &good, GareSide::Control).unwrap());
        assert!(!is_stabilizing(&sys, &anti, GareSide::Control).unwrap());
        let neg = -good.clone();
        assert!(!is_stabilizing(&sys, &neg, GareSide::Control).unwrap());
    }

    #[test]
    fn residuals_detect_perturbation() {
        let sys = scalar_system();
        let p = Mat::from_element(1, 1, SQRT2 - 1.0);
        let res = gare_residuals(&sys, None, Some(&p), None, GareVariant::Original);
        assert!(res.residual_c < 1e-14);
        let p_bad = Mat::from_element(1, 1, SQRT2 - 1.0 + 1e-3);
        let res_bad = gare_residuals(&sys, None, Some(&p_bad), None, GareVariant::Original);
        assert!(res_bad.residual_c > 1e-6);
    }

    #[test]
    fn variant_mismatch_shows_2r() {
        // Using the original filter equation on a modified solution of a
        // nonzero-R system leaves a residual of ||2R||.
        let ph = model::assemble(
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            tol::STRUCTURE,
        )
        .unwrap();
        let p_f = solve_filter_gare(&ph).unwrap();
        let sys = ph.descriptor();
        let res = gare_residuals(&sys, Some(&ph.r), None, Some(&p_f), GareVariant::Original);
        assert_relative_eq!(res.residual_f, (2.0 * &ph.r).norm(), epsilon = 1e-12);
    }
}
