//! Frequency-domain analysis: normalized right coprime factorizations,
//! DAE-to-ODE reduction, H-infinity norms via Hamiltonian bisection, the
//! a-priori coprime-factor error bound, Lyapunov-inequality certificates,
//! and the passive LQG controller.

use crate::linalg;
use crate::model::{DescriptorSystem, PortHamiltonianDAE};
use crate::riccati::{self, GareSide};
use crate::{tol, C64, CMat, Error, Mat, Result};

/// Ordinary state-space realization `(A, B, C, D)`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    /// Transfer function `G(s) = C (sI - A)^{-1} B + D`.
    pub fn eval(&self, s: C64) -> Result<CMat> {
        let n = self.a.nrows();
        if n == 0 {
            return Ok(linalg::to_complex(&self.d));
        }
        let m = CMat::identity(n, n) * s - linalg::to_complex(&self.a);
        let rhs = linalg::to_complex(&self.b);
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("singular sI - A at probe point".into()))?;
        Ok(linalg::to_complex(&self.c) * x + linalg::to_complex(&self.d))
    }

    /// Largest singular value of `G(i w)`.
    pub fn gain_at(&self, omega: f64) -> Result<f64> {
        let g = self.eval(C64::new(0.0, omega))?;
        if g.is_empty() {
            return Ok(0.0);
        }
        Ok(g.singular_values().max())
    }
}

/// State-space realization of the stacked normalized right coprime factors
/// `[M; N]` of a descriptor system: `(E, A - B B^T Pc, B)` with outputs
/// `[-B^T Pc; C]` and feedthrough `[I; 0]`.
#[derive(Debug, Clone)]
pub struct CoprimeRealization {
    pub e: Mat,
    pub a_pc: Mat,
    pub b: Mat,
    pub c_stack: Mat,
    pub d_stack: Mat,
}

impl CoprimeRealization {
    /// Evaluates `[M(s); N(s)]`.
    pub fn eval(&self, s: C64) -> Result<CMat> {
        let n = self.e.nrows();
        if n == 0 {
            return Ok(linalg::to_complex(&self.d_stack));
        }
        let m = linalg::to_complex(&self.e) * s - linalg::to_complex(&self.a_pc);
        let x = m
            .lu()
            .solve(&linalg::to_complex(&self.b))
            .ok_or_else(|| Error::InvalidArgument("singular sE - A_Pc at probe point".into()))?;
        Ok(linalg::to_complex(&self.c_stack) * x + linalg::to_complex(&self.d_stack))
    }

    /// Normalization defect `||M* M + N* N - I||` at `s = i w`.
    pub fn normalization_defect(&self, omega: f64) -> Result<f64> {
        let g = self.eval(C64::new(0.0, omega))?;
        let m = self.b.ncols();
        let gram = g.adjoint() * &g;
        Ok((gram - CMat::identity(m, m)).norm())
    }
}

/// Builds the coprime realization from a stabilizing control solution.
/// The closed-loop pencil `(E, A - B B^T Pc)` must be regular,
/// impulse-free, and stable.
pub fn coprime_realization(sys: &DescriptorSystem, p_c: &Mat) -> Result<CoprimeRealization> {
    let n = sys.n();
    let m = sys.m();
    if n > 0 && !riccati::is_stabilizing(sys, p_c, GareSide::Control)? {
        return Err(Error::NotStabilizing(
            "control solution fails the semidefiniteness test".into(),
        ));
    }
    let a_pc = &sys.a - &sys.b * sys.b.transpose() * p_c;
    if n > 0 {
        let info = linalg::pencil_spectrum(&sys.e, &a_pc, tol::RANK)?;
        if !info.is_admissible() {
            return Err(Error::NotStabilizing(format!(
                "closed-loop pencil is not admissible (regular {}, impulse-free {}, stable {})",
                info.regular,
                info.impulse_free,
                info.finite_spectrum_stable()
            )));
        }
    }
    let p = sys.p();
    let mut c_stack = Mat::zeros(m + p, n);
    c_stack
        .view_mut((0, 0), (m, n))
        .copy_from(&(-(sys.b.transpose() * p_c)));
    c_stack.view_mut((m, 0), (p, n)).copy_from(&sys.c);
    let mut d_stack = Mat::zeros(m + p, m);
    d_stack.view_mut((0, 0), (m, m)).copy_from(&Mat::identity(m, m));
    Ok(CoprimeRealization {
        e: sys.e.clone(),
        a_pc,
        b: sys.b.clone(),
        c_stack,
        d_stack,
    })
}

/// Reduces a semi-explicit impulse-free descriptor system to an ODE
/// realization via the Schur complement of the algebraic block:
/// `A_ode = A11 - A12 A22^{-1} A21`, `D = -C2 A22^{-1} B2`.
pub fn dae_to_ode(sys: &DescriptorSystem) -> Result<StateSpace> {
    let r = sys.semi_explicit_rank().ok_or_else(|| {
        Error::InvalidArgument("dae_to_ode expects an exactly semi-explicit system".into())
    })?;
    let n = sys.n();
    let m = sys.m();
    let p = sys.p();
    if r == n {
        return Ok(StateSpace {
            a: sys.a.clone(),
            b: sys.b.clone(),
            c: sys.c.clone(),
            d: Mat::zeros(p, m),
        });
    }
    let a22 = sys.a.view((r, r), (n - r, n - r)).into_owned();
    let sv = a22.clone().singular_values();
    let smin = sv.min();
    if smin <= tol::RANK * sv.max().max(1.0) {
        return Err(Error::SingularA22 { sigma_min: smin });
    }
    let a22_inv = linalg::inv_checked(&a22, 1.0 / f64::EPSILON, "A22")?;
    let a11 = sys.a.view((0, 0), (r, r));
    let a12 = sys.a.view((0, r), (r, n - r));
    let a21 = sys.a.view((r, 0), (n - r, r));
    let b1 = sys.b.view((0, 0), (r, m));
    let b2 = sys.b.view((r, 0), (n - r, m));
    let c1 = sys.c.view((0, 0), (p, r));
    let c2 = sys.c.view((0, r), (p, n - r));
    Ok(StateSpace {
        a: a11 - a12 * &a22_inv * a21,
        b: b1 - a12 * &a22_inv * b2,
        c: c1 - c2 * &a22_inv * a21,
        d: -(c2 * &a22_inv * b2),
    })
}

/// Logarithmically spaced probe frequencies in `[1e-3, 1e3]`, used by the
/// normalization certificates and for seeding the H-infinity bisection.
pub fn probe_frequencies(count: usize) -> Vec<f64> {
    let (lo, hi) = (1e-3f64, 1e3f64);
    (0..count)
        .map(|i| {
            let t = i as f64 / (count.saturating_sub(1)).max(1) as f64;
            lo * (hi / lo).powf(t)
        })
        .collect()
}

/// Whether the Hamiltonian matrix associated with level `gamma` has an
/// eigenvalue on the imaginary axis (then `gamma <= ||G||_inf`).
fn gamma_level_crossed(ss: &StateSpace, gamma: f64) -> Result<bool> {
    let n = ss.a.nrows();
    let m = ss.b.ncols();
    let r = Mat::identity(m, m) * (gamma * gamma) - ss.d.transpose() * &ss.d;
    let eig = r.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        // gamma below the feedthrough gain: certainly crossed.
        return Ok(true);
    }
    let r_inv = linalg::inv_checked(&r, 1.0 / f64::EPSILON, "gamma^2 I - D^T D")?;
    let a_shift = &ss.a + &ss.b * &r_inv * ss.d.transpose() * &ss.c;
    let mut ham = Mat::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&a_shift);
    ham.view_mut((0, n), (n, n))
        .copy_from(&(&ss.b * &r_inv * ss.b.transpose()));
    let middle = Mat::identity(ss.d.nrows(), ss.d.nrows()) + &ss.d * &r_inv * ss.d.transpose();
    ham.view_mut((n, 0), (n, n))
        .copy_from(&(-(ss.c.transpose() * middle * &ss.c)));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a_shift.transpose()));
    let eigs = linalg::eigenvalues(&ham)?;
    Ok(eigs.iter().any(|l| l.re.abs() <= 1e-7 * (1.0 + l.im.abs())))
}

/// H-infinity norm of a stable ODE realization by bisection on the
/// imaginary-axis eigenvalues of the associated Hamiltonian matrix, seeded
/// by a coarse frequency grid. Relative accuracy `tol_rel`.
pub fn hinf_norm(ss: &StateSpace, tol_rel: f64) -> Result<f64> {
    let n = ss.a.nrows();
    let d_gain = if ss.d.is_empty() {
        0.0
    } else {
        ss.d.clone().singular_values().max()
    };
    if n == 0 {
        return Ok(d_gain);
    }
    let eigs = linalg::eigenvalues(&ss.a)?;
    let max_re = eigs.iter().fold(f64::NEG_INFINITY, |a, l| a.max(l.re));
    if max_re >= -tol::IMAG_AXIS_MARGIN {
        return Err(Error::UnstableSystem { max_re });
    }

    // Seed from a coarse grid plus the eigenfrequencies.
    let mut lo: f64 = d_gain.max(ss.gain_at(0.0)?);
    for w in probe_frequencies(40) {
        lo = lo.max(ss.gain_at(w)?);
    }
    for l in &eigs {
        if l.im.abs() > 0.0 {
            lo = lo.max(ss.gain_at(l.im.abs())?);
        }
    }
    if lo == 0.0 {
        return Ok(0.0);
    }

    let mut hi = lo * (1.0 + 1e-3);
    let mut guard = 0;
    while gamma_level_crossed(ss, hi)? {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidArgument(
                "H-infinity bisection failed to bracket the norm".into(),
            ));
        }
    }
    let mut lo_b = lo;
    while hi - lo_b > tol_rel * lo_b {
        let mid = 0.5 * (hi + lo_b);
        if gamma_level_crossed(ss, mid)? {
            lo_b = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (hi + lo_b))
}

/// A-priori coprime-factor bound `2 sum_{i > ell} sigma_i / sqrt(1 + sigma_i^2)`.
pub fn error_bound(sigma: &[f64], ell: usize) -> f64 {
    sigma
        .iter()
        .skip(ell)
        .map(|&s| 2.0 * s / (1.0 + s * s).sqrt())
        .sum()
}

/// Constant orthogonal right factor aligning the reduced coprime pair
/// with the full-order one. Normalized factorizations are unique only up
/// to such a factor (different stabilizing control solutions flip it), so
/// the error is measured over the aligned representative: the Procrustes
/// solution of `min || G_f - G_r Theta ||` over sampled frequencies.
fn alignment_gauge(fom: &CoprimeRealization, rom: &CoprimeRealization) -> Result<Mat> {
    let m = fom.b.ncols();
    let mut k = Mat::zeros(m, m);
    let mut freqs = vec![0.0];
    freqs.extend(probe_frequencies(12));
    for w in freqs {
        let gf = fom.eval(C64::new(0.0, w))?;
        let gr = rom.eval(C64::new(0.0, w))?;
        let prod = gr.adjoint() * gf;
        for i in 0..m {
            for j in 0..m {
                k[(i, j)] += prod[(i, j)].re;
            }
        }
    }
    let svd = k.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    Ok(u * vt)
}

/// Permutation assembling the difference of two semi-explicit coprime
/// systems into one semi-explicit system (differential coordinates first),
/// with the reduced factors right-multiplied by the alignment gauge. The
/// feedthrough difference `[I; 0] (I - Theta)` is kept.
fn difference_system(
    fom: &CoprimeRealization,
    rom: &CoprimeRealization,
) -> Result<(DescriptorSystem, Mat)> {
    let (nf, nr) = (fom.e.nrows(), rom.e.nrows());
    let rf = crate::model::semi_explicit_rank(&fom.e)
        .ok_or_else(|| Error::InvalidArgument("FOM coprime system is not semi-explicit".into()))?;
    let rr = crate::model::semi_explicit_rank(&rom.e)
        .ok_or_else(|| Error::InvalidArgument("ROM coprime system is not semi-explicit".into()))?;
    let m = fom.b.ncols();
    if rom.b.ncols() != m || rom.c_stack.nrows() != fom.c_stack.nrows() {
        return Err(Error::DimensionMismatch(
            "coprime systems must share input and output dimensions".into(),
        ));
    }
    let gauge = alignment_gauge(fom, rom)?;
    let rom_b = &rom.b * &gauge;
    let d_diff = &fom.d_stack - &rom.d_stack * &gauge;

    let n = nf + nr;
    // Index map: [diff_f, diff_r, alg_f, alg_r].
    let mut order = Vec::with_capacity(n);
    order.extend(0..rf);
    order.extend(nf..nf + rr);
    order.extend(rf..nf);
    order.extend(nf + rr..n);

    let pick = |i: usize| -> (bool, usize) {
        if i < nf {
            (true, i)
        } else {
            (false, i - nf)
        }
    };
    let mut e = Mat::zeros(n, n);
    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, m);
    let mut c = Mat::zeros(fom.c_stack.nrows(), n);
    for (inew, &iold) in order.iter().enumerate() {
        let (fi, io) = pick(iold);
        for (jnew, &jold) in order.iter().enumerate() {
            let (fj, jo) = pick(jold);
            if fi == fj {
                let (esrc, asrc) = if fi { (&fom.e, &fom.a_pc) } else { (&rom.e, &rom.a_pc) };
                e[(inew, jnew)] = esrc[(io, jo)];
                a[(inew, jnew)] = asrc[(io, jo)];
            }
        }
        let bsrc = if fi { &fom.b } else { &rom_b };
        for j in 0..m {
            b[(inew, j)] = bsrc[(io, j)];
        }
        let (csrc, sign) = if fi { (&fom.c_stack, 1.0) } else { (&rom.c_stack, -1.0) };
        for i in 0..c.nrows() {
            c[(i, inew)] = sign * csrc[(i, io)];
        }
    }
    Ok((DescriptorSystem::new(e, a, b, c)?, d_diff))
}

/// H-infinity error between the normalized coprime factors of a full-order
/// and a reduced-order system, after aligning the constant orthogonal
/// gauge of the reduced factors. The realization feedthroughs cancel up
/// to the gauge; the difference is reduced to an ODE before the norm
/// computation.
pub fn coprime_error(
    fom: &DescriptorSystem,
    rom: &DescriptorSystem,
    p_c_fom: &Mat,
    p_c_rom: &Mat,
) -> Result<f64> {
    let cf = coprime_realization(fom, p_c_fom)?;
    let cr = coprime_realization(rom, p_c_rom)?;
    let (diff, d_diff) = difference_system(&cf, &cr)?;
    let mut ode = dae_to_ode(&diff)?;
    ode.d += d_diff;
    hinf_norm(&ode, tol::HINF)
}

/// Certificates of the generalized Lyapunov (in)equalities satisfied by
/// `L = (I + Pf Pc^T)^{-1} Pf` and `Pc` for the coprime realization.
#[derive(Debug, Clone, Copy)]
pub struct CoprimeLyapReport {
    /// Largest eigenvalue of `A_Pc L^T + L A_Pc^T + B B^T` (must be <= 0).
    pub ineq_max_eig: f64,
    /// `||E L^T - L E^T||`.
    pub sym_defect: f64,
    /// Residual of the exact output equation
    /// `A_Pc^T Pc + Pc^T A_Pc + Pc^T B B^T Pc + C^T C = 0`.
    pub eq_residual: f64,
    pub all_pass: bool,
}

pub fn verify_coprime_lyap(
    sys: &DescriptorSystem,
    p_c: &Mat,
    p_f: &Mat,
) -> Result<CoprimeLyapReport> {
    let n = sys.n();
    let ipfpc = Mat::identity(n, n) + p_f * p_c.transpose();
    let sv = ipfpc.clone().singular_values();
    if sv.min() <= tol::RANK * sv.max().max(1.0) {
        return Err(Error::SingularIPlusPfPc { sigma_min: sv.min() });
    }
    let l = linalg::inv_checked(&ipfpc, tol::COND_LIMIT, "I + Pf Pc^T")? * p_f;
    let a_pc = &sys.a - &sys.b * sys.b.transpose() * p_c;
    let ineq = &a_pc * l.transpose() + &l * a_pc.transpose() + &sys.b * sys.b.transpose();
    let ineq_max_eig = linalg::max_sym_eig(&ineq);
    let sym_defect = (&sys.e * l.transpose() - &l * sys.e.transpose()).norm();
    let eq = a_pc.transpose() * p_c
        + p_c.transpose() * &a_pc
        + p_c.transpose() * &sys.b * sys.b.transpose() * p_c
        + sys.c.transpose() * &sys.c;
    let eq_residual = eq.norm();
    let scale = tol::scale(sys.a.norm() + sys.b.norm().powi(2) + p_c.norm() + p_f.norm());
    let all_pass = ineq_max_eig <= tol::RESIDUAL * scale
        && sym_defect <= tol::RESIDUAL * scale
        && eq_residual <= tol::RESIDUAL * scale;
    Ok(CoprimeLyapReport {
        ineq_max_eig,
        sym_defect,
        eq_residual,
        all_pass,
    })
}

/// Certificates of the LQG controller and its closed loop.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoopReport {
    pub regular: bool,
    pub impulse_free: bool,
    pub stable: bool,
    /// Smallest eigenvalue of the controller passivity KYP block `W(Pc)`.
    pub passivity_min_eig: f64,
    /// Smallest eigenvalue of `sym(E_c^T Pc)`.
    pub storage_min_eig: f64,
    pub all_pass: bool,
}

/// Passive LQG controller `(E, A - B B^T Pc - Q^{-T} C^T C, Q^{-T} C^T,
/// B^T Pc)` with closed-loop and passivity certificates.
pub fn lqg_controller(
    ph: &PortHamiltonianDAE,
    p_c: &Mat,
) -> Result<(DescriptorSystem, ClosedLoopReport)> {
    let n = ph.n();
    let q_inv = linalg::inv_checked(&ph.q, tol::COND_LIMIT, "Q")?;
    let q_inv_t = q_inv.transpose();
    let a = ph.a();
    let c = ph.c();
    let bbt_pc = &ph.b * ph.b.transpose() * p_c;
    let obs = &q_inv_t * c.transpose() * c;
    let a_c = a - &bbt_pc - &obs;
    let b_c = &q_inv_t * c.transpose();
    let c_c = ph.b.transpose() * p_c;
    let controller = DescriptorSystem::new(ph.e.clone(), a_c.clone(), b_c.clone(), c_c.clone())?;

    // Closed loop under u = -y_c, u_c = y.
    let mut script_e = Mat::zeros(2 * n, 2 * n);
    script_e.view_mut((0, 0), (n, n)).copy_from(&ph.e);
    script_e.view_mut((n, n), (n, n)).copy_from(&ph.e);
    let mut script_a = Mat::zeros(2 * n, 2 * n);
    script_a.view_mut((0, 0), (n, n)).copy_from(a);
    script_a.view_mut((0, n), (n, n)).copy_from(&(-&bbt_pc));
    script_a.view_mut((n, 0), (n, n)).copy_from(&obs);
    script_a.view_mut((n, n), (n, n)).copy_from(&a_c);
    let info = linalg::pencil_spectrum(&script_e, &script_a, tol::RANK)?;

    // Controller passivity: Pc solves the KYP LMI of the controller system.
    let mm = ph.m();
    let mut w = Mat::zeros(n + mm, n + mm);
    w.view_mut((0, 0), (n, n))
        .copy_from(&(-(a_c.transpose() * p_c) - p_c.transpose() * &a_c));
    let off = c_c.transpose() - p_c.transpose() * &b_c;
    w.view_mut((0, n), (n, mm)).copy_from(&off);
    w.view_mut((n, 0), (mm, n)).copy_from(&off.transpose());
    let passivity_min_eig = linalg::min_sym_eig(&w);
    let storage = ph.e.transpose() * p_c;
    let storage_min_eig = linalg::min_sym_eig(&storage);

    let pass_gate = tol::RESIDUAL * tol::scale(w.norm());
    let storage_gate = tol::RESIDUAL * tol::scale(storage.norm());
    let report = ClosedLoopReport {
        regular: info.regular,
        impulse_free: info.impulse_free,
        stable: info.finite_spectrum_stable(),
        passivity_min_eig,
        storage_min_eig,
        all_pass: info.is_admissible()
            && passivity_min_eig >= -pass_gate
            && storage_min_eig >= -storage_gate,
    };
    Ok((controller, report))
}
