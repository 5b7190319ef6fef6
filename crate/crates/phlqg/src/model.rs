//! Data model for descriptor and port-Hamiltonian DAE systems: validation,
//! equivalence transformations, semi-explicit reduction, feedthrough
//! embedding, output feedback, and structural rank tests.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::linalg::{self, PencilInfo};
use crate::{tol, C64, Error, Mat, Result};

/// General linear descriptor system `E x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct DescriptorSystem {
    pub e: Mat,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pencil_cache: OnceLock<std::result::Result<PencilInfo, Error>>,
}

impl DescriptorSystem {
    pub fn new(e: Mat, a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let n = e.nrows();
        if e.ncols() != n || a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch(
                "E and A must be square of equal size".into(),
            ));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C must have {n} columns, got {}",
                c.ncols()
            )));
        }
        for (m, what) in [(&e, "E"), (&a, "A"), (&b, "B"), (&c, "C")] {
            linalg::check_finite(m, what)?;
        }
        Ok(Self {
            e,
            a,
            b,
            c,
            pencil_cache: OnceLock::new(),
        })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Spectral summary of `(E, A)`, computed once and cached.
    pub fn pencil(&self) -> Result<PencilInfo> {
        self.pencil_cache
            .get_or_init(|| linalg::pencil_spectrum(&self.e, &self.a, tol::RANK))
            .clone()
    }

    /// Dual system `(E^T, A^T, C^T, B^T)`.
    pub fn dual(&self) -> Self {
        Self::new(
            self.e.transpose(),
            self.a.transpose(),
            self.c.transpose(),
            self.b.transpose(),
        )
        .expect("dual of a valid system is valid")
    }

    /// Whether `E` equals `diag(I_r, 0)` exactly for some `r`.
    pub fn semi_explicit_rank(&self) -> Option<usize> {
        semi_explicit_rank(&self.e)
    }
}

/// Returns `Some(r)` when the matrix is exactly `diag(I_r, 0)`.
pub(crate) fn semi_explicit_rank(e: &Mat) -> Option<usize> {
    let n = e.nrows();
    let mut r = n;
    for i in 0..n {
        if e[(i, i)] == 0.0 {
            r = i;
            break;
        }
    }
    let mut expected = Mat::zeros(n, n);
    for i in 0..r {
        expected[(i, i)] = 1.0;
    }
    if e == &expected {
        Some(r)
    } else {
        None
    }
}

/// Port-Hamiltonian descriptor system `E x' = (J - R) Q x + B u`,
/// `y = B^T Q x`, with Hamiltonian `H(x) = x^T E^T Q x / 2`.
#[derive(Debug, Clone)]
pub struct PortHamiltonianDAE {
    pub e: Mat,
    pub j: Mat,
    pub r: Mat,
    pub q: Mat,
    pub b: Mat,
    a: Mat,
    c: Mat,
    rank_e: usize,
}

/// Validates the structural invariants of `(E, J, R, Q, B)` and assembles
/// the derived realization `A = (J - R) Q`, `C = B^T Q`.
pub fn assemble(
    e: Mat,
    j: Mat,
    r: Mat,
    q: Mat,
    b: Mat,
    tol_structure: f64,
) -> Result<PortHamiltonianDAE> {
    let n = e.nrows();
    for (m, what) in [(&e, "E"), (&j, "J"), (&r, "R"), (&q, "Q")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{what} must be {n}x{n}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        linalg::check_finite(m, what)?;
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    linalg::check_finite(&b, "B")?;

    let skew_defect = (&j + j.transpose()).norm();
    if skew_defect > tol_structure * tol::scale(j.norm()) {
        return Err(Error::StructureViolation(format!(
            "J is not skew-symmetric: ||J + J^T|| = {skew_defect:e}"
        )));
    }
    let r_defect = linalg::sym_defect(&r);
    if r_defect > tol_structure * tol::scale(r.norm()) {
        return Err(Error::StructureViolation(format!(
            "R is not symmetric: ||R - R^T|| = {r_defect:e}"
        )));
    }
    let r_min = linalg::min_sym_eig(&r);
    if r_min < -tol_structure * tol::scale(r.norm()) {
        return Err(Error::StructureViolation(format!(
            "R is not positive semidefinite: lambda_min = {r_min:e}"
        )));
    }
    let etq = e.transpose() * &q;
    let etq_defect = linalg::sym_defect(&etq);
    if etq_defect > tol_structure * tol::scale(etq.norm()) {
        return Err(Error::StructureViolation(format!(
            "E^T Q is not symmetric: ||E^T Q - Q^T E|| = {etq_defect:e}"
        )));
    }
    let etq_min = linalg::min_sym_eig(&etq);
    if etq_min < -tol_structure * tol::scale(etq.norm()) {
        return Err(Error::StructureViolation(format!(
            "E^T Q is not positive semidefinite: lambda_min = {etq_min:e}"
        )));
    }

    let a = (&j - &r) * &q;
    let c = b.transpose() * &q;
    let rank_e = linalg::rank(&e, tol::RANK);
    Ok(PortHamiltonianDAE {
        e,
        j,
        r,
        q,
        b,
        a,
        c,
        rank_e,
    })
}

impl PortHamiltonianDAE {
    /// State dimension.
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Input (and output) dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Derived system matrix `A = (J - R) Q`.
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// Derived output matrix `C = B^T Q`.
    pub fn c(&self) -> &Mat {
        &self.c
    }

    /// Numerical rank of `E`, fixed at assembly; all block splits reuse it.
    pub fn rank_e(&self) -> usize {
        self.rank_e
    }

    /// Hamiltonian `H(x) = x^T E^T Q x / 2`.
    pub fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * self.e.transpose() * &self.q * x)[(0, 0)]
    }

    /// View as a plain descriptor system `(E, A, B, C)`.
    pub fn descriptor(&self) -> DescriptorSystem {
        DescriptorSystem::new(
            self.e.clone(),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
        )
        .expect("assembled system is dimensionally consistent")
    }

    /// Whether `E` equals `diag(I_r, 0)` exactly.
    pub fn is_semi_explicit(&self) -> bool {
        semi_explicit_rank(&self.e).is_some()
    }

    /// Carries an externally validated realization `(A, C)` over verbatim.
    /// Used where the theory guarantees the derived matrices are equal to
    /// known ones, so that no rounding drift is introduced.
    pub(crate) fn override_realization(&mut self, a: Mat, c: Mat) {
        self.a = a;
        self.c = c;
    }
}

/// Equivalence transformation `x~ = T x`, premultiplied by `S`:
/// `(SET^{-1}, SJS^T, SRS^T, S^{-T}QT^{-1}, SB)`. The transformed structure
/// is re-validated and the derived `A` is checked against `S A T^{-1}`.
pub fn transform(ph: &PortHamiltonianDAE, s: &Mat, t: &Mat) -> Result<PortHamiltonianDAE> {
    let n = ph.n();
    if s.nrows() != n || s.ncols() != n || t.nrows() != n || t.ncols() != n {
        return Err(Error::DimensionMismatch(
            "transformation matrices must match the state dimension".into(),
        ));
    }
    let t_inv = linalg::inv_checked(t, tol::COND_LIMIT, "T")?;
    let s_inv_t = linalg::inv_checked(&s.transpose(), tol::COND_LIMIT, "S^T")?;
    let e2 = s * &ph.e * &t_inv;
    let j2 = s * &ph.j * s.transpose();
    let r2 = s * &ph.r * s.transpose();
    let q2 = &s_inv_t * &ph.q * &t_inv;
    let b2 = s * &ph.b;
    let out = assemble(e2, j2, r2, q2, b2, tol::STRUCTURE)?;
    let expect_a = s * ph.a() * &t_inv;
    let defect = (out.a() - &expect_a).norm();
    if defect > 1e-9 * tol::scale(expect_a.norm()) {
        return Err(Error::ResidualTooLarge {
            residual: defect,
            tol: 1e-9 * tol::scale(expect_a.norm()),
            context: "transformed A mismatch".into(),
        });
    }
    Ok(out)
}

/// Transformation to semi-explicit form built from the SVD of `E` with
/// identity trailing blocks. Returns `(ph~, S, T)` where `ph~.e` is written
/// as exact `diag(I_r, 0)`.
pub fn to_semi_explicit(ph: &PortHamiltonianDAE) -> Result<(PortHamiltonianDAE, Mat, Mat)> {
    let n = ph.n();
    let r = ph.rank_e();
    let svd = ph.e.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");

    let mut s_left = Mat::identity(n, n);
    let mut t_left = Mat::identity(n, n);
    for i in 0..r {
        let sig = svd.singular_values[i];
        s_left[(i, i)] = 1.0 / sig.sqrt();
        t_left[(i, i)] = sig.sqrt();
    }
    let s = s_left * u.transpose();
    let t = t_left * vt;

    let mut out = transform(ph, &s, &t)?;
    // The theory forces E~ = diag(I_r, 0); write the exact zeros and ones.
    let mut e_exact = Mat::zeros(n, n);
    for i in 0..r {
        e_exact[(i, i)] = 1.0;
    }
    let drift = (&out.e - &e_exact).norm();
    if drift > 1e-8 * (n as f64).sqrt() {
        return Err(Error::ResidualTooLarge {
            residual: drift,
            tol: 1e-8,
            context: "semi-explicit E drift".into(),
        });
    }
    out.e = e_exact;
    out.rank_e = r;
    Ok((out, s, t))
}

/// Embeds a port-Hamiltonian ODE system with feedthrough,
/// `x' = (J_h - R_h) Q_h x + (B_h - P_h) u`,
/// `y = (B_h + P_h)^T Q_h x + (S_h + N_h) u`,
/// into an equivalent descriptor system of dimension `n + 2m` without
/// feedthrough.
pub fn embed_feedthrough(
    j_h: &Mat,
    r_h: &Mat,
    q_h: &Mat,
    b_h: &Mat,
    p_h: &Mat,
    s_h: &Mat,
    n_h: &Mat,
) -> Result<PortHamiltonianDAE> {
    let n = j_h.nrows();
    let m = b_h.ncols();
    for (mat, rows, cols, what) in [
        (j_h, n, n, "J_h"),
        (r_h, n, n, "R_h"),
        (q_h, n, n, "Q_h"),
        (b_h, n, m, "B_h"),
        (p_h, n, m, "P_h"),
        (s_h, m, m, "S_h"),
        (n_h, m, m, "N_h"),
    ] {
        if mat.nrows() != rows || mat.ncols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{what} must be {rows}x{cols}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }

    // Structure conditions: [[J, B], [-B^T, N]] skew, [[R, P], [P^T, S]] PSD,
    // Q_h symmetric positive definite.
    let mut skew = Mat::zeros(n + m, n + m);
    skew.view_mut((0, 0), (n, n)).copy_from(j_h);
    skew.view_mut((0, n), (n, m)).copy_from(b_h);
    skew.view_mut((n, 0), (m, n)).copy_from(&(-b_h.transpose()));
    skew.view_mut((n, n), (m, m)).copy_from(n_h);
    let skew_defect = (&skew + skew.transpose()).norm();
    if skew_defect > tol::STRUCTURE * tol::scale(skew.norm()) {
        return Err(Error::StructureViolation(format!(
            "[[J_h, B_h], [-B_h^T, N_h]] is not skew-symmetric (defect {skew_defect:e})"
        )));
    }
    let mut diss = Mat::zeros(n + m, n + m);
    diss.view_mut((0, 0), (n, n)).copy_from(r_h);
    diss.view_mut((0, n), (n, m)).copy_from(p_h);
    diss.view_mut((n, 0), (m, n)).copy_from(&p_h.transpose());
    diss.view_mut((n, n), (m, m)).copy_from(s_h);
    let diss_defect = linalg::sym_defect(&diss);
    if diss_defect > tol::STRUCTURE * tol::scale(diss.norm()) {
        return Err(Error::StructureViolation(
            "[[R_h, P_h], [P_h^T, S_h]] is not symmetric".into(),
        ));
    }
    let diss_min = linalg::min_sym_eig(&diss);
    if diss_min < -tol::STRUCTURE * tol::scale(diss.norm()) {
        return Err(Error::StructureViolation(format!(
            "[[R_h, P_h], [P_h^T, S_h]] is not positive semidefinite (lambda_min {diss_min:e})"
        )));
    }
    let q_defect = linalg::sym_defect(q_h);
    if q_defect > tol::STRUCTURE * tol::scale(q_h.norm()) {
        return Err(Error::StructureViolation("Q_h is not symmetric".into()));
    }
    if linalg::min_sym_eig(q_h) <= tol::STRUCTURE {
        return Err(Error::StructureViolation(
            "Q_h is not positive definite".into(),
        ));
    }

    let dim = n + 2 * m;
    let mut e = Mat::zeros(dim, dim);
    for i in 0..n {
        e[(i, i)] = 1.0;
    }
    let mut j = Mat::zeros(dim, dim);
    j.view_mut((0, 0), (n, n)).copy_from(j_h);
    j.view_mut((0, n), (n, m)).copy_from(b_h);
    j.view_mut((n, 0), (m, n)).copy_from(&(-b_h.transpose()));
    j.view_mut((n, n), (m, m)).copy_from(&(-n_h));
    j.view_mut((n, n + m), (m, m)).copy_from(&Mat::identity(m, m));
    j.view_mut((n + m, n), (m, m))
        .copy_from(&(-Mat::identity(m, m)));
    let mut r = Mat::zeros(dim, dim);
    r.view_mut((0, 0), (n, n)).copy_from(r_h);
    r.view_mut((0, n), (n, m)).copy_from(p_h);
    r.view_mut((n, 0), (m, n)).copy_from(&p_h.transpose());
    r.view_mut((n, n), (m, m)).copy_from(s_h);
    let mut q = Mat::zeros(dim, dim);
    q.view_mut((0, 0), (n, n)).copy_from(q_h);
    q.view_mut((n, n + m), (m, m)).copy_from(&Mat::identity(m, m));
    q.view_mut((n + m, n), (m, m)).copy_from(&Mat::identity(m, m));
    let mut b = Mat::zeros(dim, m);
    b.view_mut((n + m, 0), (m, m)).copy_from(&Mat::identity(m, m));

    assemble(e, j, r, q, b, tol::STRUCTURE)
}

/// Output feedback `u_F = sign * y`. With `sign = -1` the dissipation
/// matrix becomes `R + B B^T`; `sign = +1` undoes it, which must leave `R`
/// positive semidefinite.
pub fn output_feedback(ph: &PortHamiltonianDAE, sign: i32) -> Result<PortHamiltonianDAE> {
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidArgument(
            "feedback sign must be +1 or -1".into(),
        ));
    }
    let bbt = &ph.b * ph.b.transpose();
    let r_new = if sign == -1 { &ph.r + &bbt } else { &ph.r - &bbt };
    assemble(
        ph.e.clone(),
        ph.j.clone(),
        r_new,
        ph.q.clone(),
        ph.b.clone(),
        tol::STRUCTURE,
    )
}

/// Controllability, stabilizability, observability and detectability flags
/// of a descriptor system per the rank characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralReport {
    pub impulse_controllable: bool,
    pub strongly_stabilizable: bool,
    pub strongly_anti_stabilizable: bool,
    pub strongly_controllable: bool,
    pub impulse_observable: bool,
    pub strongly_detectable: bool,
}

/// Rank tolerance for stabilizability tests at pencil eigenvalues, which
/// carry roughly square-root-of-epsilon error.
const EIG_RANK_TOL: f64 = 1e-8;

fn impulse_controllable(e: &Mat, a: &Mat, b: &Mat) -> bool {
    let n = e.nrows();
    let s_ker = linalg::kernel_basis(e, tol::RANK);
    let as_ker = a * &s_ker;
    let mut stacked = Mat::zeros(n, n + s_ker.ncols() + b.ncols());
    stacked.view_mut((0, 0), (n, n)).copy_from(e);
    stacked
        .view_mut((0, n), (n, as_ker.ncols()))
        .copy_from(&as_ker);
    stacked
        .view_mut((0, n + as_ker.ncols()), (n, b.ncols()))
        .copy_from(b);
    linalg::rank(&stacked, EIG_RANK_TOL) == n
}

/// Rank of `[lambda E - A, B]` equals `n` at the given eigenvalue.
fn rank_full_at(e: &Mat, a: &Mat, b: &Mat, lambda: C64) -> bool {
    let n = e.nrows();
    let le = linalg::to_complex(e) * lambda - linalg::to_complex(a);
    let mut stacked = crate::CMat::zeros(n, n + b.ncols());
    stacked.view_mut((0, 0), (n, n)).copy_from(&le);
    stacked
        .view_mut((0, n), (n, b.ncols()))
        .copy_from(&linalg::to_complex(b));
    linalg::rank_complex(&stacked, EIG_RANK_TOL) == n
}

/// Evaluates the controllability-side flags for `(E, A, B)`. The rank of
/// `[lambda E - A, B]` can only drop at finite eigenvalues of the pencil,
/// so the half-plane conditions are tested there.
fn control_flags(e: &Mat, a: &Mat, b: &Mat, finite: &[C64]) -> (bool, bool, bool) {
    let ic = impulse_controllable(e, a, b);
    let margin = tol::STRUCTURE;
    let mut stab = ic;
    let mut anti = ic;
    for &l in finite {
        if l.re >= -margin && !rank_full_at(e, a, b, l) {
            stab = false;
        }
        if l.re <= margin && !rank_full_at(e, a, b, l) {
            anti = false;
        }
    }
    (ic, stab, anti)
}

/// Structural rank tests of the controllability and observability notions
/// for descriptor systems. Requires a regular pencil.
pub fn structural_report(sys: &DescriptorSystem) -> Result<StructuralReport> {
    let info = sys.pencil()?;
    if !info.regular {
        return Err(Error::SingularPencil { probes: 0 });
    }
    let finite = &info.finite_eigenvalues;
    let (ic, stab, anti) = control_flags(&sys.e, &sys.a, &sys.b, finite);
    // Dual tests: (E^T, A^T, C^T) shares the finite spectrum.
    let et = sys.e.transpose();
    let at = sys.a.transpose();
    let ct = sys.c.transpose();
    let (io, det, _) = control_flags(&et, &at, &ct, finite);
    Ok(StructuralReport {
        impulse_controllable: ic,
        strongly_stabilizable: stab,
        strongly_anti_stabilizable: anti,
        strongly_controllable: stab && anti,
        impulse_observable: io,
        strongly_detectable: det,
    })
}
