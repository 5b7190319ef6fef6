//! LQG characteristic values and balancing-free structure-preserving
//! truncation: the balanced realization is never formed explicitly, the
//! projection matrices are assembled from semidefinite factors of the two
//! Gramians and an SVD of their coupled product.

use crate::linalg;
use crate::model::{self, DescriptorSystem, PortHamiltonianDAE};
use crate::riccati::{self};
use crate::{tol, Error, Mat, Result};

/// Reduced-order model produced by a truncation.
#[derive(Debug, Clone)]
pub enum Rom {
    PortHamiltonian(PortHamiltonianDAE),
    Descriptor(DescriptorSystem),
}

impl Rom {
    pub fn descriptor(&self) -> DescriptorSystem {
        match self {
            Rom::PortHamiltonian(ph) => ph.descriptor(),
            Rom::Descriptor(d) => d.clone(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Rom::PortHamiltonian(ph) => ph.n(),
            Rom::Descriptor(d) => d.n(),
        }
    }
}

/// Result of a balanced-truncation run: characteristic values, projection
/// matrices, the reduced model, and the Gramians needed downstream for the
/// coprime-factor error.
#[derive(Debug, Clone)]
pub struct BalancedTruncationResult {
    /// Characteristic values, descending, strictly positive.
    pub sigma: Vec<f64>,
    pub s_l: Mat,
    pub t_l: Mat,
    pub w_l: Mat,
    pub rom: Rom,
    pub ell: usize,
    pub rom_regular: bool,
    /// Control Gramian of the full-order model in its original coordinates.
    pub p_c_fom: Mat,
    /// Truncated balanced control Gramian `W_l^T Pc T_l`, which is the
    /// stabilizing control solution of the reduced model.
    pub p_c_rom: Mat,
}

/// Uniform relative cutoff below which characteristic values are treated
/// as zero. The semidefinite factors entering the coupled product carry
/// content only above the Gramian rank tolerance, so singular values
/// below `1e-8 * max` are noise.
fn sigma_cutoff(sigma_max: f64) -> f64 {
    1e-8 * sigma_max
}

/// Characteristic values of a semi-explicit system: square roots of the
/// nonzero eigenvalues of `[I_r 0] Pf E^T Pc^T E [I_r; 0]`, descending.
///
/// Computed through the same semidefinite factorization and SVD as the
/// balancing algorithm, so the returned list is consistent with the
/// truncation machinery (eigenvalues at the Gramian noise floor are
/// clipped identically in both places).
pub fn characteristic_values(sys: &DescriptorSystem, p_c: &Mat, p_f: &Mat) -> Result<Vec<f64>> {
    sys.semi_explicit_rank().ok_or_else(|| {
        Error::InvalidArgument("characteristic_values expects a semi-explicit system".into())
    })?;
    let map_psd_error = |e: Error| match e {
        Error::NotPsd { lambda_min, .. } => Error::NegativeEigenvalue { value: lambda_min },
        other => other,
    };
    let l_c = linalg::psd_factor(&linalg::sym_part(&(sys.e.transpose() * p_c)), tol::STRUCTURE)
        .map_err(map_psd_error)?;
    let l_f = linalg::psd_factor(&linalg::sym_part(&(&sys.e * p_f.transpose())), tol::STRUCTURE)
        .map_err(map_psd_error)?;
    if l_c.ncols() == 0 || l_f.ncols() == 0 {
        return Ok(Vec::new());
    }
    let core = l_c.transpose() * linalg::pinv(&sys.e, tol::RANK) * &l_f;
    let sv = core.svd(false, false).singular_values;
    let smax = sv.max();
    let sigma: Vec<f64> = sv
        .iter()
        .copied()
        .filter(|&s| s > sigma_cutoff(smax))
        .collect();
    Ok(sigma)
}

/// Shared projection machinery of the balancing algorithm, operating in
/// the original coordinates of the system.
struct Projections {
    sigma: Vec<f64>,
    s_l: Mat,
    t_l: Mat,
    w_l: Mat,
}

fn build_projections(e: &Mat, p_c: &Mat, p_f: &Mat, ell: usize) -> Result<Projections> {
    let n = e.nrows();
    let r = linalg::rank(e, tol::RANK);

    let l_pc = linalg::psd_factor(&linalg::sym_part(&(e.transpose() * p_c)), tol::STRUCTURE)?;
    let l_pf = linalg::psd_factor(&linalg::sym_part(&(e * p_f.transpose())), tol::STRUCTURE)?;
    let e_pinv = linalg::pinv(e, tol::RANK);

    let core = l_pc.transpose() * &e_pinv * &l_pf;
    let svd = core.svd(true, true);
    let u_t = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max();
    let k = svd
        .singular_values
        .iter()
        .filter(|&&s| s > sigma_cutoff(smax))
        .count();
    let sigma: Vec<f64> = svd.singular_values.iter().take(k).copied().collect();

    if ell == 0 || ell > k {
        return Err(Error::InvalidArgument(format!(
            "truncation order ell = {ell} outside 1..={k}"
        )));
    }
    if ell < k {
        let gap = sigma[ell - 1] - sigma[ell];
        if gap < tol::SIGMA_GAP * sigma[ell - 1] {
            return Err(Error::GapTooSmall {
                ell,
                sigma_ell: sigma[ell - 1],
                sigma_next: sigma[ell],
            });
        }
    }

    // Trailing singular vectors of E spanning ker(E^T) and ker(E).
    let e_svd = e.clone().svd(true, true);
    let u2 = e_svd
        .u
        .as_ref()
        .expect("svd with u")
        .columns(r, n - r)
        .into_owned();
    let v2 = e_svd
        .v_t
        .as_ref()
        .expect("svd with v_t")
        .rows(r, n - r)
        .transpose();

    let mut sig_scale = Mat::zeros(ell, ell);
    for i in 0..ell {
        sig_scale[(i, i)] = 1.0 / sigma[i].sqrt();
    }
    let u_ell = u_t.columns(0, ell).into_owned();
    let v_ell = v_t.rows(0, ell).transpose();

    let lead_s = e_pinv.transpose() * &l_pc * &u_ell * &sig_scale;
    let lead_t = &e_pinv * &l_pf * &v_ell * &sig_scale;
    let lead_w = e * &e_pinv * &l_pf * &v_ell * &sig_scale;

    let dim = ell + n - r;
    let mut s_l = Mat::zeros(n, dim);
    s_l.view_mut((0, 0), (n, ell)).copy_from(&lead_s);
    s_l.view_mut((0, ell), (n, n - r)).copy_from(&u2);
    let mut t_l = Mat::zeros(n, dim);
    t_l.view_mut((0, 0), (n, ell)).copy_from(&lead_t);
    t_l.view_mut((0, ell), (n, n - r)).copy_from(&v2);
    let mut w_l = Mat::zeros(n, dim);
    w_l.view_mut((0, 0), (n, ell)).copy_from(&lead_w);
    w_l.view_mut((0, ell), (n, n - r)).copy_from(&u2);

    Ok(Projections { sigma, s_l, t_l, w_l })
}

/// Verifies that `S_l^T E T_l` matches `diag(I_ell, 0)` and returns the
/// exact matrix (structural zeros written).
fn snap_reduced_e(e_r: &Mat, ell: usize) -> Result<Mat> {
    let dim = e_r.nrows();
    let mut exact = Mat::zeros(dim, dim);
    for i in 0..ell {
        exact[(i, i)] = 1.0;
    }
    let drift = (e_r - &exact).norm();
    if drift > 1e-8 * (dim as f64).sqrt() {
        return Err(Error::ResidualTooLarge {
            residual: drift,
            tol: 1e-8,
            context: "reduced E drift from diag(I_ell, 0)".into(),
        });
    }
    Ok(exact)
}

/// Structure-preserving LQG balanced truncation of a port-Hamiltonian
/// descriptor system at order `ell`: projections from semidefinite factors
/// of `E^T Pc` and `E Pf^T` (with `Pf = Q^{-T}`), reduced matrices
/// `E_r = S^T E T`, `J_r = S^T J S`, `R_r = S^T R S`, `Q_r = W^T Q T`,
/// `B_r = S^T B`.
pub fn balance_truncate(ph: &PortHamiltonianDAE, ell: usize) -> Result<BalancedTruncationResult> {
    let (p_c, p_f) = solve_gramians(ph)?;
    balance_truncate_given(ph, ell, &p_c, &p_f)
}

/// Stabilizing solutions of the modified GAREs in the original coordinates
/// of the system: `Pf = Q^{-T}` and the control solution mapped back from
/// the semi-explicit transform.
pub fn solve_gramians(ph: &PortHamiltonianDAE) -> Result<(Mat, Mat)> {
    let p_f = riccati::solve_filter_gare(ph)?;
    let (se, s1, t1) = model::to_semi_explicit(ph)?;
    let p_c_se = riccati::solve_control_gare(&se.descriptor())?;
    let p_c = s1.transpose() * &p_c_se * &t1;
    Ok((p_c, p_f))
}

/// Balanced truncation with Gramians the caller already solved (a sweep
/// over `ell` needs them only once).
pub fn balance_truncate_given(
    ph: &PortHamiltonianDAE,
    ell: usize,
    p_c: &Mat,
    p_f: &Mat,
) -> Result<BalancedTruncationResult> {
    let proj = build_projections(&ph.e, p_c, p_f, ell)?;
    let e_r = snap_reduced_e(
        &(proj.s_l.transpose() * &ph.e * &proj.t_l),
        ell,
    )?;
    // The theory makes J_r exactly skew, R_r semidefinite, and the
    // upper-right block of Q_r zero; write those structures exactly so
    // rounding drift of the projections cannot leak into the reduced
    // model's certificates.
    let j_r = {
        let raw = proj.s_l.transpose() * &ph.j * &proj.s_l;
        0.5 * (&raw - raw.transpose())
    };
    let r_r = linalg::psd_clip(&(proj.s_l.transpose() * &ph.r * &proj.s_l));
    let q_r = {
        let mut q = proj.w_l.transpose() * &ph.q * &proj.t_l;
        let dim = q.nrows();
        let na = dim - ell;
        let off = q.view((0, ell), (ell, na)).norm();
        if off <= 1e-6 * tol::scale(q.norm()) {
            q.view_mut((0, ell), (ell, na)).fill(0.0);
            let q11 = linalg::sym_part(&q.view((0, 0), (ell, ell)).into_owned());
            q.view_mut((0, 0), (ell, ell)).copy_from(&q11);
        }
        q
    };
    let b_r = proj.s_l.transpose() * &ph.b;
    let rom_ph = model::assemble(e_r, j_r, r_r, q_r, b_r, tol::STRUCTURE)?;

    match linalg::pencil_spectrum(&rom_ph.e, rom_ph.a(), tol::RANK) {
        Ok(info) if info.regular => {}
        Ok(_) | Err(Error::SingularPencil { .. }) => {
            return Err(Error::SingularReducedPencil { ell })
        }
        Err(e) => return Err(e),
    }
    let p_c_rom = proj.w_l.transpose() * p_c * &proj.t_l;
    Ok(BalancedTruncationResult {
        sigma: proj.sigma,
        s_l: proj.s_l,
        t_l: proj.t_l,
        w_l: proj.w_l,
        rom: Rom::PortHamiltonian(rom_ph),
        ell,
        rom_regular: true,
        p_c_fom: p_c.clone(),
        p_c_rom,
    })
}

/// Classical (unstructured) LQG balanced truncation with both Gramians
/// from the original GAREs; the reduced model carries no port-Hamiltonian
/// claim.
pub fn classical_lqg_bt(sys: &DescriptorSystem, ell: usize) -> Result<BalancedTruncationResult> {
    let (p_c, p_f) = classical_gramians(sys)?;
    classical_lqg_bt_given(sys, ell, &p_c, &p_f)
}

/// Stabilizing solutions of the original GAREs in the original coordinates
/// of the system.
pub fn classical_gramians(sys: &DescriptorSystem) -> Result<(Mat, Mat)> {
    // Solve the GAREs in semi-explicit coordinates, then map back.
    let (work, s1, t1) = if sys.semi_explicit_rank().is_some() {
        (sys.clone(), Mat::identity(sys.n(), sys.n()), Mat::identity(sys.n(), sys.n()))
    } else {
        let n = sys.n();
        let r = linalg::rank(&sys.e, tol::RANK);
        let svd = sys.e.clone().svd(true, true);
        let u = svd.u.as_ref().expect("svd with u");
        let vt = svd.v_t.as_ref().expect("svd with v_t");
        let mut s_left = Mat::identity(n, n);
        let mut t_left = Mat::identity(n, n);
        for i in 0..r {
            s_left[(i, i)] = 1.0 / svd.singular_values[i].sqrt();
            t_left[(i, i)] = svd.singular_values[i].sqrt();
        }
        let s = s_left * u.transpose();
        let t = t_left * vt;
        let t_inv = linalg::inv_checked(&t, tol::COND_LIMIT, "T")?;
        let mut e2 = &s * &sys.e * &t_inv;
        let mut exact = Mat::zeros(n, n);
        for i in 0..r {
            exact[(i, i)] = 1.0;
        }
        if (&e2 - &exact).norm() > 1e-8 * (n as f64).sqrt() {
            return Err(Error::SingularTransformation(
                "could not reach semi-explicit form".into(),
            ));
        }
        e2 = exact;
        let sys2 = DescriptorSystem::new(e2, &s * &sys.a * &t_inv, &s * &sys.b, &sys.c * &t_inv)?;
        (sys2, s, t)
    };
    let pair = riccati::solve_original_gares(&work)?;
    let s1_t = s1.transpose();
    let p_c = &s1_t * &pair.p_c * &t1;
    let s1_inv = linalg::inv_checked(&s1, tol::COND_LIMIT, "S")?;
    let t1_inv_t = linalg::inv_checked(&t1.transpose(), tol::COND_LIMIT, "T^T")?;
    let p_f = &s1_inv * &pair.p_f * &t1_inv_t;
    Ok((p_c, p_f))
}

/// Classical truncation with already-solved original-GARE Gramians.
pub fn classical_lqg_bt_given(
    sys: &DescriptorSystem,
    ell: usize,
    p_c: &Mat,
    p_f: &Mat,
) -> Result<BalancedTruncationResult> {
    let proj = build_projections(&sys.e, p_c, p_f, ell)?;
    let e_r = snap_reduced_e(&(proj.s_l.transpose() * &sys.e * &proj.t_l), ell)?;
    let a_r = proj.s_l.transpose() * &sys.a * &proj.t_l;
    let b_r = proj.s_l.transpose() * &sys.b;
    let c_r = &sys.c * &proj.t_l;
    let rom = DescriptorSystem::new(e_r, a_r, b_r, c_r)?;

    match rom.pencil() {
        Ok(info) if info.regular => {}
        Ok(_) | Err(Error::SingularPencil { .. }) => {
            return Err(Error::SingularReducedPencil { ell })
        }
        Err(e) => return Err(e),
    }
    let p_c_rom = proj.w_l.transpose() * p_c * &proj.t_l;
    Ok(BalancedTruncationResult {
        sigma: proj.sigma,
        s_l: proj.s_l,
        t_l: proj.t_l,
        w_l: proj.w_l,
        rom: Rom::Descriptor(rom),
        ell,
        rom_regular: true,
        p_c_fom: p_c.clone(),
        p_c_rom,
    })
}

/// Margins of the port-Hamiltonian structure certificates of a reduced
/// model (report-only).
#[derive(Debug, Clone, Copy)]
pub struct RomStructureReport {
    /// `||J_r + J_r^T||`.
    pub skew_defect: f64,
    /// Smallest eigenvalue of `R_r`.
    pub r_min_eig: f64,
    /// `||E_r^T Q_r - Q_r^T E_r||`.
    pub etq_sym_defect: f64,
    /// Smallest eigenvalue of `sym(E_r^T Q_r)`.
    pub etq_min_eig: f64,
    /// `||C_r - B_r^T Q_r||`.
    pub output_defect: f64,
    /// Conjunction of all four checks at their stated gates.
    pub all_pass: bool,
}

/// Evaluates the port-Hamiltonian structure certificates on a truncation
/// result: `J_r` skew to `1e-12 * scale`, `R_r >= -1e-10`,
/// `E_r^T Q_r` symmetric PSD to `1e-10`, `C_r = B_r^T Q_r` to
/// `1e-10 * scale`.
pub fn check_rom_structure(result: &BalancedTruncationResult) -> Result<RomStructureReport> {
    let ph = match &result.rom {
        Rom::PortHamiltonian(ph) => ph,
        Rom::Descriptor(_) => {
            return Err(Error::InvalidArgument(
                "check_rom_structure expects a port-Hamiltonian reduced model".into(),
            ))
        }
    };
    let skew_defect = (&ph.j + ph.j.transpose()).norm();
    let r_min_eig = linalg::min_sym_eig(&ph.r);
    let etq = ph.e.transpose() * &ph.q;
    let etq_sym_defect = linalg::sym_defect(&etq);
    let etq_min_eig = linalg::min_sym_eig(&etq);
    let output_defect = (ph.c() - ph.b.transpose() * &ph.q).norm();
    let all_pass = skew_defect <= 1e-12 * tol::scale(ph.j.norm())
        && r_min_eig >= -1e-10 * tol::scale(ph.r.norm())
        && etq_sym_defect <= 1e-10 * tol::scale(etq.norm())
        && etq_min_eig >= -1e-10 * tol::scale(etq.norm())
        && output_defect <= 1e-10 * tol::scale(ph.c().norm());
    Ok(RomStructureReport {
        skew_defect,
        r_min_eig,
        etq_sym_defect,
        etq_min_eig,
        output_defect,
        all_pass,
    })
}

/// Smallest order whose a-priori bound is at or below `tol_bound`, subject
/// to the gap requirement; `None` when no order qualifies.
pub fn select_order(sigma: &[f64], tol_bound: f64) -> Option<usize> {
    let k = sigma.len();
    for ell in 1..=k {
        let bound = crate::analysis::error_bound(sigma, ell);
        let gap_ok = ell == k || sigma[ell - 1] - sigma[ell] >= tol::SIGMA_GAP * sigma[ell - 1];
        if bound <= tol_bound && gap_ok {
            return Some(ell);
        }
    }
    None
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
    fn scalar_characteristic_value() {
        let sys = scalar_system();
        let p_c = Mat::from_element(1, 1, SQRT2 - 1.0);
        let p_f = Mat::identity(1, 1);
        let sigma = characteristic_values(&sys, &p_c, &p_f).unwrap();
        assert_eq!(sigma.len(), 1);
        assert_relative_eq!(sigma[0], (SQRT2 - 1.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(sigma[0], 0.6435943, epsilon = 1e-7);
    }

    #[test]
    fn sigma_matches_printed_counterexample_values() {
        // The printed balanced realization has sigma = {1/a, 1/b}.
        let fixture =
            crate::benchmarks::counterexample(crate::benchmarks::CounterexampleId::PhdaeMor);
        let sys = fixture.system.descriptor();
        let sigma = characteristic_values(&sys, &fixture.p_c, &fixture.p_f).unwrap();
        let a = (1.0 + SQRT2).sqrt();
        let b = (2.0 + 5.0f64.sqrt()).sqrt();
        assert_eq!(sigma.len(), 2);
        assert_relative_eq!(sigma[0], 1.0 / a, epsilon = 1e-12);
        assert_relative_eq!(sigma[1], 1.0 / b, epsilon = 1e-12);
        assert_relative_eq!(sigma[0], 0.6435943, epsilon = 1e-7);
        assert_relative_eq!(sigma[1], 0.4858683, epsilon = 1e-7);
        // Consistency with the eigenvalue formula on the leading values.
        let r = 2;
        let pf11 = linalg::sym_part(
            &(&fixture.p_f * sys.e.transpose())
                .view((0, 0), (r, r))
                .into_owned(),
        );
        let pc11 = linalg::sym_part(
            &(sys.e.transpose() * &fixture.p_c)
                .view((0, 0), (r, r))
                .into_owned(),
        );
        let sqrt_pc = linalg::psd_sqrt(&pc11);
        let mut eigs: Vec<f64> = (&sqrt_pc * pf11 * &sqrt_pc)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (s, e) in sigma.iter().zip(eigs.iter()) {
            assert_relative_eq!(s, e, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_c_gives_empty_sigma() {
        let sys = DescriptorSystem::new(
            Mat::identity(2, 2),
            -Mat::identity(2, 2),
            Mat::identity(2, 2),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let p_c = Mat::zeros(2, 2);
        let p_f = Mat::identity(2, 2);
        let sigma = characteristic_values(&sys, &p_c, &p_f).unwrap();
        assert!(sigma.is_empty());
    }

    #[test]
    fn scalar_full_order_truncation_is_exact() {
        let ph = model::assemble(
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            tol::STRUCTURE,
        )
        .unwrap();
        let result = balance_truncate(&ph, 1).unwrap();
        assert_eq!(result.sigma.len(), 1);
        assert_relative_eq!(result.sigma[0], (SQRT2 - 1.0).sqrt(), epsilon = 1e-9);
        assert!(result.rom_regular);
        let report = check_rom_structure(&result).unwrap();
        assert!(report.all_pass, "report: {report:?}");
        // The reduced control Gramian is the balanced one: Sigma~_ell.
        assert_relative_eq!(result.p_c_rom[(0, 0)], result.sigma[0], epsilon = 1e-9);
    }
}
