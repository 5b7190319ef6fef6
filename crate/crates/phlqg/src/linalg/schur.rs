//! Real Schur decomposition with eigenvalue reordering, used to extract
//! ordered invariant subspaces for Riccati and KYP solvers.

use crate::{tol, C64, Error, Mat, Result};

pub(crate) struct RealSchur {
    /// Orthogonal factor of the Schur form of the balanced matrix.
    pub q: Mat,
    pub t: Mat,
    /// Diagonal balancing scales (exact powers of two):
    /// `M = D (Q T Q^T) D^{-1}` with `D = diag(scales)`.
    pub scales: Vec<f64>,
}

/// Parlett-Reinsch diagonal balancing with powers of two: returns the
/// balanced matrix `D^{-1} M D` and the scales. Graded matrices (entries
/// spanning many orders of magnitude) lose eigenvalue accuracy in the QR
/// iteration without this.
fn balance(m: &Mat) -> (Mat, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut scales = vec![1.0f64; n];
    // Only strongly graded matrices benefit; mildly scaled ones are left
    // untouched to keep the plain iteration's accuracy.
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        let s: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| a[(i, j)].abs() + a[(j, i)].abs())
            .sum();
        if s > 0.0 {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if !(hi > 1e6 * lo) {
        return (a, scales);
    }
    let radix: f64 = 2.0;
    let mut converged = false;
    let mut guard = 0;
    while !converged && guard < 100 {
        converged = true;
        guard += 1;
        for i in 0..n {
            let mut c: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let mut r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0f64;
            let s = c + r;
            while c < r / radix {
                c *= radix * radix;
                r /= radix * radix;
                f *= radix;
            }
            while c >= r * radix {
                c /= radix * radix;
                r *= radix * radix;
                f /= radix;
            }
            if (c + r) < 0.95 * s && f != 1.0 {
                converged = false;
                scales[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (a, scales)
}

/// Real Schur decomposition of the balanced matrix, with a deterministic
/// sweep cap: `M = D Q T Q^T D^{-1}`. 2x2 diagonal blocks with real
/// eigenvalues are split, so `T` has 2x2 blocks only for complex pairs.
pub(crate) fn real_schur(m: &Mat) -> Result<RealSchur> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    if n == 0 {
        return Ok(RealSchur {
            q: Mat::zeros(0, 0),
            t: Mat::zeros(0, 0),
            scales: Vec::new(),
        });
    }
    let (balanced, scales) = balance(m);
    let max_sweeps = tol::SCHUR_SWEEPS_PER_DIM * n;
    let schur = balanced
        .try_schur(f64::EPSILON, max_sweeps)
        .ok_or(Error::SchurFailure { max_sweeps })?;
    let (q, t) = schur.unpack();
    let mut rs = RealSchur { q, t, scales };
    clean_subdiagonal(&mut rs.t);
    split_real_blocks(&mut rs);
    Ok(rs)
}

/// Zeroes subdiagonal entries that are negligible relative to the matrix
/// scale, leaving only genuine 2x2 block couplings.
fn clean_subdiagonal(t: &mut Mat) {
    let n = t.nrows();
    let scale = tol::scale(t.norm());
    let tiny = 16.0 * f64::EPSILON * scale;
    for i in 1..n {
        for j in 0..i.min(n) {
            if i > j + 1 || t[(i, j)].abs() <= tiny {
                t[(i, j)] = 0.0;
            }
        }
    }
}

/// Splits 2x2 diagonal blocks whose eigenvalues are real into two 1x1
/// blocks via a Givens rotation aligned with an eigenvector.
fn split_real_blocks(rs: &mut RealSchur) {
    let n = rs.t.nrows();
    let mut i = 0;
    while i + 1 < n {
        if rs.t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let (a, b) = (rs.t[(i, i)], rs.t[(i, i + 1)]);
        let (c, d) = (rs.t[(i + 1, i)], rs.t[(i + 1, i + 1)]);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc < 0.0 {
            i += 2;
            continue;
        }
        // Real pair: rotate so the eigenvector of one eigenvalue leads.
        let mid = 0.5 * (a + d);
        let s = disc.sqrt();
        let lambda = if mid >= 0.0 { mid + s } else { mid - s };
        // Eigenvector of [[a, b], [c, d]] for lambda.
        let v = if b.abs() + (lambda - a).abs() >= c.abs() + (lambda - d).abs() {
            [b, lambda - a]
        } else {
            [lambda - d, c]
        };
        let nrm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if nrm == 0.0 {
            // Already diagonal to working precision.
            rs.t[(i + 1, i)] = 0.0;
            i += 2;
            continue;
        }
        let (cs, sn) = (v[0] / nrm, v[1] / nrm);
        apply_rotation(rs, i, cs, sn);
        rs.t[(i + 1, i)] = 0.0;
        i += 2;
    }
}

/// Applies the 2x2 rotation G = [[cs, -sn], [sn, cs]] as a similarity on
/// rows/columns (i, i+1) of T and accumulates it into Q.
fn apply_rotation(rs: &mut RealSchur, i: usize, cs: f64, sn: f64) {
    let n = rs.t.nrows();
    for j in 0..n {
        let (x, y) = (rs.t[(i, j)], rs.t[(i + 1, j)]);
        rs.t[(i, j)] = cs * x + sn * y;
        rs.t[(i + 1, j)] = -sn * x + cs * y;
    }
    for j in 0..n {
        let (x, y) = (rs.t[(j, i)], rs.t[(j, i + 1)]);
        rs.t[(j, i)] = cs * x + sn * y;
        rs.t[(j, i + 1)] = -sn * x + cs * y;
    }
    for j in 0..rs.q.nrows() {
        let (x, y) = (rs.q[(j, i)], rs.q[(j, i + 1)]);
        rs.q[(j, i)] = cs * x + sn * y;
        rs.q[(j, i + 1)] = -sn * x + cs * y;
    }
}

#[derive(Clone, Copy, Debug)]
struct Block {
    start: usize,
    size: usize,
    selected: bool,
}

fn block_eigenvalue(t: &Mat, start: usize, size: usize) -> C64 {
    if size == 1 {
        C64::new(t[(start, start)], 0.0)
    } else {
        let (a, b) = (t[(start, start)], t[(start, start + 1)]);
        let (c, d) = (t[(start + 1, start)], t[(start + 1, start + 1)]);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        let mid = 0.5 * (a + d);
        if disc < 0.0 {
            C64::new(mid, (-disc).sqrt())
        } else {
            C64::new(mid + disc.sqrt(), 0.0)
        }
    }
}

fn scan_blocks(t: &Mat, selector: &dyn Fn(C64) -> bool) -> Vec<Block> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let size = if i + 1 < n && t[(i + 1, i)] != 0.0 { 2 } else { 1 };
        let lambda = block_eigenvalue(t, i, size);
        blocks.push(Block {
            start: i,
            size,
            selected: selector(lambda),
        });
        i += size;
    }
    blocks
}

/// Swaps two adjacent diagonal blocks of sizes `p` (at `i`) and `q_sz`
/// (at `i + p`) by the direct-solve method: solve the small Sylvester
/// equation, orthonormalize, and apply the resulting similarity.
fn swap_adjacent(rs: &mut RealSchur, i: usize, p: usize, q_sz: usize) -> Result<()> {
    let t11 = rs.t.view((i, i), (p, p)).into_owned();
    let t22 = rs.t.view((i + p, i + p), (q_sz, q_sz)).into_owned();
    let t12 = rs.t.view((i, i + p), (p, q_sz)).into_owned();

    // Solve T11 X - X T22 = -T12 via the Kronecker system.
    let mut k = Mat::zeros(p * q_sz, p * q_sz);
    for col in 0..q_sz {
        for row in 0..p {
            let eq = col * p + row;
            for r2 in 0..p {
                k[(eq, col * p + r2)] += t11[(row, r2)];
            }
            for c2 in 0..q_sz {
                k[(eq, c2 * p + row)] -= t22[(c2, col)];
            }
        }
    }
    let mut rhs = Mat::zeros(p * q_sz, 1);
    for col in 0..q_sz {
        for row in 0..p {
            rhs[(col * p + row, 0)] = -t12[(row, col)];
        }
    }
    let lu = k.lu();
    let x = lu.solve(&rhs).ok_or(Error::SchurFailure {
        max_sweeps: 0,
    })?;

    // W = [X; I] spans the invariant subspace of the trailing block.
    let s = p + q_sz;
    let mut w = Mat::zeros(s, q_sz);
    for col in 0..q_sz {
        for row in 0..p {
            w[(row, col)] = x[(col * p + row, 0)];
        }
        w[(p + col, col)] = 1.0;
    }
    let g = orthonormal_square(&w)?;

    // Similarity update on rows/columns i..i+s.
    let n = rs.t.nrows();
    let rows = rs.t.view((i, 0), (s, n)).into_owned();
    rs.t.view_mut((i, 0), (s, n)).copy_from(&(g.transpose() * rows));
    let cols = rs.t.view((0, i), (n, s)).into_owned();
    rs.t.view_mut((0, i), (n, s)).copy_from(&(cols * &g));
    let qcols = rs.q.view((0, i), (rs.q.nrows(), s)).into_owned();
    rs.q.view_mut((0, i), (rs.q.nrows(), s)).copy_from(&(qcols * &g));

    // The new (2,1) coupling must vanish; measure then zero it.
    let resid = rs.t.view((i + q_sz, i), (p, q_sz)).norm();
    let scale = tol::scale(rs.t.norm());
    if resid > 1e-6 * scale {
        return Err(Error::ResidualTooLarge {
            residual: resid,
            tol: 1e-6 * scale,
            context: "schur block swap".into(),
        });
    }
    for r in 0..p {
        for c in 0..q_sz {
            rs.t[(i + q_sz + r, i + c)] = 0.0;
        }
    }
    Ok(())
}

/// Completes the columns of a tall matrix `w` (s x q, full column rank) to
/// an orthogonal s x s matrix whose leading q columns span `im(w)`.
fn orthonormal_square(w: &Mat) -> Result<Mat> {
    use nalgebra::DVector;
    let s = w.nrows();
    let q = w.ncols();
    let mut g = Mat::zeros(s, s);
    let mut filled = 0usize;

    fn push(g: &mut Mat, filled: &mut usize, cand: nalgebra::DVector<f64>) -> bool {
        let mut v = cand;
        for _ in 0..2 {
            for j in 0..*filled {
                let proj = g.column(j).dot(&v);
                let gj = g.column(j).into_owned();
                v -= gj * proj;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-10 {
            v /= nrm;
            g.set_column(*filled, &v);
            *filled += 1;
            true
        } else {
            false
        }
    }

    for col in 0..q {
        if !push(&mut g, &mut filled, w.column(col).into_owned()) {
            return Err(Error::SchurFailure { max_sweeps: 0 });
        }
    }
    for col in 0..s {
        if filled == s {
            break;
        }
        let mut e = DVector::zeros(s);
        e[col] = 1.0;
        push(&mut g, &mut filled, e);
    }
    if filled != s {
        return Err(Error::SchurFailure { max_sweeps: 0 });
    }
    Ok(g)
}

/// Eigenvalues of a real square matrix, computed from its real Schur form
/// (deterministic sweep cap, complex pairs kept adjacent).
pub fn eigenvalues(m: &Mat) -> Result<Vec<C64>> {
    let rs = real_schur(m)?;
    let n = m.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let size = if i + 1 < n && rs.t[(i + 1, i)] != 0.0 { 2 } else { 1 };
        let lambda = block_eigenvalue(&rs.t, i, size);
        if size == 2 {
            out.push(lambda);
            out.push(lambda.conj());
        } else {
            out.push(lambda);
        }
        i += size;
    }
    Ok(out)
}

/// Orthonormal basis of the invariant subspace of `m` spanned by the
/// eigenvalues chosen by `selector`, together with its dimension.
///
/// The selector must be closed under conjugation; it is evaluated once per
/// Schur block on the representative eigenvalue with nonnegative imaginary
/// part. The basis satisfies `M B = B (B^T M B)` up to `1e-9 * max(1,||M||)`.
pub fn ordered_invariant_subspace(
    m: &Mat,
    selector: &dyn Fn(C64) -> bool,
) -> Result<(Mat, usize)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "ordered_invariant_subspace expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    super::check_finite(m, "ordered_invariant_subspace input")?;
    let mut rs = real_schur(m)?;
    let mut blocks = scan_blocks(&rs.t, selector);

    // Bubble every selected block above all unselected ones.
    loop {
        let mut swapped = false;
        for j in 0..blocks.len().saturating_sub(1) {
            if !blocks[j].selected && blocks[j + 1].selected {
                let (p, q_sz) = (blocks[j].size, blocks[j + 1].size);
                swap_adjacent(&mut rs, blocks[j].start, p, q_sz)?;
                let start = blocks[j].start;
                blocks[j] = Block {
                    start,
                    size: q_sz,
                    selected: true,
                };
                blocks[j + 1] = Block {
                    start: start + q_sz,
                    size: p,
                    selected: false,
                };
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    let k: usize = blocks.iter().filter(|b| b.selected).map(|b| b.size).sum();
    // Undo the balancing similarity and restore orthonormal columns.
    let mut basis = rs.q.columns(0, k).into_owned();
    for i in 0..n {
        let s = rs.scales[i];
        if s != 1.0 {
            for j in 0..k {
                basis[(i, j)] *= s;
            }
        }
    }
    if k > 0 {
        basis = basis.qr().q();
        let small = basis.transpose() * m * &basis;
        let resid = (m * &basis - &basis * small).norm();
        let limit = 1e-9 * tol::scale(m.norm());
        if resid > limit {
            return Err(Error::ResidualTooLarge {
                residual: resid,
                tol: limit,
                context: "invariant subspace".into(),
            });
        }
    }
    Ok((basis, k))
}
