//! Matrix-pencil spectral analysis: regularity probing, finite spectrum via
//! shift-and-invert, Weierstrass index via rank chains, and stable deflating
//! subspaces via a Cayley transformation.

use super::schur;
use crate::{linalg, tol, C64, Error, Mat, Result};

/// Spectral summary of a regular matrix pencil `(E, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilInfo {
    /// Whether `det(sE - A)` is not identically zero.
    pub regular: bool,
    /// Whether the nilpotency index is at most one.
    pub impulse_free: bool,
    /// Weierstrass nilpotency index; zero when `E` is invertible.
    pub index: usize,
    /// Finite eigenvalues, conjugate pairs adjacent.
    pub finite_eigenvalues: Vec<C64>,
}

impl PencilInfo {
    /// Whether all finite eigenvalues lie in the open left half-plane.
    pub fn finite_spectrum_stable(&self) -> bool {
        self.finite_eigenvalues.iter().all(|l| l.re < 0.0)
    }

    /// Regular, impulse-free, and all finite eigenvalues in the open left
    /// half-plane.
    pub fn is_admissible(&self) -> bool {
        self.regular && self.impulse_free && self.finite_spectrum_stable()
    }
}

/// Deterministic probe shifts for the regularity test, covering
/// `[-10, 10]` on the real axis and `i[-10, 10]` on the imaginary axis.
const REAL_PROBES: [f64; 4] = [3.719, -6.283, 9.163, -1.414];
const IMAG_PROBES: [f64; 4] = [2.236, -7.071, 5.196, -8.602];

fn probe_sigma_min(e: &Mat, a: &Mat, s: C64) -> f64 {
    let m = linalg::to_complex(e) * s - linalg::to_complex(a);
    linalg::smallest_singular_complex(&m)
}

/// Decides regularity of `(E, A)` and, when regular, computes the finite
/// eigenvalues and the Weierstrass index.
///
/// Regularity is probed at eight deterministic shifts; a regular pencil can
/// be rank-deficient at only finitely many points, so the pencil is declared
/// singular only if every probe fails. The finite spectrum is obtained by
/// shift-and-invert with a real shift `s0`: the nonzero eigenvalues `mu` of
/// `F = (s0 E - A)^{-1} E` map to `lambda = s0 - 1/mu`. The index is the
/// length of the rank chain of `F` on its generalized kernel.
pub fn pencil_spectrum(e: &Mat, a: &Mat, tol_rank: f64) -> Result<PencilInfo> {
    let n = e.nrows();
    if e.ncols() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil_spectrum expects square E, A of equal size, got E {}x{}, A {}x{}",
            e.nrows(),
            e.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    linalg::check_finite(e, "pencil E")?;
    linalg::check_finite(a, "pencil A")?;
    if n == 0 {
        return Ok(PencilInfo {
            regular: true,
            impulse_free: true,
            index: 0,
            finite_eigenvalues: Vec::new(),
        });
    }

    let scale = e.norm().max(a.norm()).max(1.0);
    let mut best_real: Option<(f64, f64)> = None; // (shift, sigma_min)
    let mut any_regular = false;
    for &s in REAL_PROBES.iter() {
        let sig = probe_sigma_min(e, a, C64::new(s, 0.0));
        if sig > tol_rank * scale {
            any_regular = true;
        }
        if best_real.map_or(true, |(_, b)| sig > b) {
            best_real = Some((s, sig));
        }
    }
    for &s in IMAG_PROBES.iter() {
        let sig = probe_sigma_min(e, a, C64::new(0.0, s));
        if sig > tol_rank * scale {
            any_regular = true;
        }
    }
    if !any_regular {
        return Err(Error::SingularPencil {
            probes: REAL_PROBES.len() + IMAG_PROBES.len(),
        });
    }

    let (s0, _) = best_real.expect("at least one real probe");
    let shifted = e * s0 - a;
    let f = linalg::inv_checked(&shifted, 1.0 / f64::EPSILON, "shift-and-invert s0*E - A")? * e;

    // Rank chain of F: r_k = rank(F^k) stabilizes at n minus the algebraic
    // multiplicity of the zero eigenvalue; the index is the first k where
    // the chain stops decreasing.
    let mut ranks = vec![n];
    let mut power = Mat::identity(n, n);
    let mut index = 0;
    for k in 1..=n + 1 {
        power = &power * &f;
        let r = linalg::rank(&power, tol_rank);
        ranks.push(r);
        if r == ranks[k - 1] {
            index = k - 1;
            break;
        }
        index = k;
    }
    let finite_count = *ranks.last().expect("nonempty chain");

    // Largest-magnitude eigenvalues of F are the finite eigenvalues of the
    // pencil.
    let mut mus = schur::eigenvalues(&f)?;
    mus.sort_by(|x, y| y.norm().partial_cmp(&x.norm()).expect("finite norms"));
    let mut finite: Vec<C64> = mus
        .into_iter()
        .take(finite_count)
        .map(|mu| C64::new(s0, 0.0) - mu.inv())
        .collect();
    // Keep conjugate pairs exactly conjugate.
    for l in finite.iter_mut() {
        if l.im.abs() < 1e-12 * l.norm().max(1.0) {
            l.im = 0.0;
        }
    }

    Ok(PencilInfo {
        regular: true,
        impulse_free: index <= 1,
        index,
        finite_eigenvalues: finite,
    })
}

/// Deterministic shift sequence for the Cayley transformation, scaled by the
/// pencil norms; retried in order on near-singularity.
const CAYLEY_SHIFTS: [f64; 8] = [1.0, 2.0, 0.5, 3.0, 0.25, 5.0, 8.0, 0.125];

/// Orthonormal basis of the stable deflating subspace of the pencil
/// `(script_e, script_a)`, of prescribed dimension `dim`.
///
/// Uses a Cayley transformation `F = (A - s0 E)^{-1} (A + s0 E)` with a real
/// shift `s0 > 0`, which maps finite stable eigenvalues inside the unit
/// circle and infinite eigenvalues to one. The `dim` eigenvalues of `F`
/// smallest in modulus are selected via an ordered invariant subspace, and
/// the deflating property `script_a V = script_e V J` is certified.
pub fn stable_deflating_subspace(script_e: &Mat, script_a: &Mat, dim: usize) -> Result<Mat> {
    let n = script_e.nrows();
    if script_a.nrows() != n || script_a.ncols() != n || script_e.ncols() != n {
        return Err(Error::DimensionMismatch(
            "stable_deflating_subspace expects square pencil matrices of equal size".into(),
        ));
    }
    let norm_e = script_e.norm();
    let norm_a = script_a.norm();
    let gamma = if norm_e > 0.0 { (norm_a / norm_e).max(1e-3) } else { 1.0 };
    let scale = norm_e.max(norm_a).max(1.0);

    let mut last_err: Option<Error> = None;
    for &base in CAYLEY_SHIFTS.iter() {
        let s0 = base * gamma;
        let shifted = script_a - script_e * s0;
        if linalg::cond(&shifted) > 1e14 {
            last_err = Some(Error::SingularTransformation(format!(
                "Cayley shift {s0:e} is near an eigenvalue"
            )));
            continue;
        }
        let inv = match linalg::inv_checked(&shifted, 1.0 / f64::EPSILON, "Cayley shift") {
            Ok(m) => m,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let f = inv * (script_a + script_e * s0);

        let mut mods: Vec<f64> = match schur::eigenvalues(&f) {
            Ok(ev) => ev.iter().map(|l| l.norm()).collect(),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        mods.sort_by(|x, y| x.partial_cmp(y).expect("finite moduli"));
        if dim == 0 {
            return Ok(Mat::zeros(n, 0));
        }
        if dim > n {
            return Err(Error::InvalidArgument(format!(
                "requested deflating dimension {dim} exceeds pencil size {n}"
            )));
        }
        if dim == n {
            return Ok(Mat::identity(n, n));
        }
        let lo = mods[dim - 1];
        let hi = mods[dim];
        if hi - lo <= 1e-12 * hi.max(1.0) {
            last_err = Some(Error::NoStabilizingSolution(format!(
                "cannot separate {dim} stable eigenvalues: |mu|_{dim} = {lo:e}, next = {hi:e}"
            )));
            continue;
        }
        let threshold = 0.5 * (lo + hi);
        if lo >= 1.0 {
            last_err = Some(Error::NoStabilizingSolution(format!(
                "selected eigenvalue modulus {lo:e} is not inside the unit circle"
            )));
            continue;
        }
        let sel = move |l: C64| l.norm() < threshold;
        let (basis, k) = match schur::ordered_invariant_subspace(&f, &sel) {
            Ok(bk) => bk,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if k != dim {
            last_err = Some(Error::NoStabilizingSolution(format!(
                "stable deflating subspace has dimension {k}, expected {dim}"
            )));
            continue;
        }
        // Certify the deflating property script_a V = script_e V J.
        let ev = script_e * &basis;
        let av = script_a * &basis;
        let j_small = linalg::pinv(&ev, tol::RANK) * &av;
        let resid = (&av - ev * &j_small).norm();
        if resid > tol::RESIDUAL * scale {
            last_err = Some(Error::ResidualTooLarge {
                residual: resid,
                tol: tol::RESIDUAL * scale,
                context: "deflating subspace reconstruction".into(),
            });
            continue;
        }
        // Margin check: selected eigenvalues must map to Re(lambda) < 0
        // away from the imaginary axis.
        let j_eigs = schur::eigenvalues(&j_small)?;
        if let Some(l) = j_eigs.iter().find(|l| l.re > -tol::IMAG_AXIS_MARGIN) {
            last_err = Some(Error::NoStabilizingSolution(format!(
                "deflating subspace eigenvalue {l} is not strictly stable"
            )));
            continue;
        }
        return Ok(basis);
    }
    Err(last_err.unwrap_or_else(|| Error::NoStabilizingSolution("no usable Cayley shift".into())))
}
