//! Benchmark model generators: a transport network of damped-wave pipes
//! with algebraic flow constraints, a constrained mass-spring-damper
//! chain, the two printed three-state counterexamples, and a
//! minimal-realization utility.

use nalgebra::DVector;

use crate::io::SystemFile;
use crate::linalg;
use crate::model::{self, DescriptorSystem, PortHamiltonianDAE};
use crate::{tol, Error, Mat, Result};

/// Configuration of the pipe-network generator.
///
/// Each pipe carries a 1D damped wave equation discretized with
/// piecewise-linear pressures (lumped mass) and piecewise-constant flows.
/// Pressures live on graph nodes and pipe-inner nodes; one designated
/// node is grounded (pressure eliminated). Constraints force the flow of
/// the last element of selected pipes to zero via Lagrange multipliers,
/// which makes the assembled system an index-2 pH-DAE; inputs act on the
/// first element of selected pipes.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub nodes: usize,
    /// Pipes as (from, to) node pairs.
    pub pipes: Vec<(usize, usize)>,
    /// Inner discretization nodes per pipe.
    pub inner_nodes: usize,
    /// Uniform friction coefficient d0.
    pub damping: f64,
    /// Mass density of the pressure variable.
    pub density_pressure: f64,
    /// Mass density of the flow variable.
    pub density_flow: f64,
    /// Pipes whose last element flow is constrained to zero.
    pub constrained_pipes: Vec<usize>,
    /// Pipes whose first element receives an input.
    pub actuated_pipes: Vec<usize>,
}

impl NetworkConfig {
    /// Triangle network: three nodes on a cycle, one constraint, one
    /// input. Small enough for exhaustive testing.
    pub fn small(inner_nodes: usize) -> Self {
        Self {
            nodes: 3,
            pipes: vec![(0, 1), (1, 2), (2, 0)],
            inner_nodes,
            damping: 25.0,
            density_pressure: 1.0,
            density_flow: 1.0,
            constrained_pipes: vec![2],
            actuated_pipes: vec![0],
        }
    }

    /// Five-node network with cycle rank four, four constraints, and two
    /// inputs, mirroring the scale pattern of the published experiment
    /// (50 inner nodes per pipe).
    pub fn paper_scale() -> Self {
        Self {
            nodes: 5,
            pipes: vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 0),
                (0, 2),
                (1, 3),
                (2, 4),
            ],
            inner_nodes: 50,
            damping: 25.0,
            density_pressure: 1.0,
            density_flow: 1.0,
            constrained_pipes: vec![2, 5, 6, 7],
            actuated_pipes: vec![0, 3],
        }
    }
}

/// Index-2 network model and its index-1 semi-explicit reduction.
#[derive(Debug, Clone)]
pub struct NetworkModels {
    /// The assembled index-2 pH-DAE (not impulse-controllable).
    pub index2: PortHamiltonianDAE,
    /// The index-1 reduction in semi-explicit coordinates, with the
    /// constraint kernel rotated out.
    pub index1_semi_explicit: PortHamiltonianDAE,
}

/// Builds the transport-network benchmark family.
pub fn transport_network(cfg: &NetworkConfig) -> Result<NetworkModels> {
    if cfg.nodes == 0 || cfg.pipes.is_empty() {
        return Err(Error::InvalidArgument("network needs nodes and pipes".into()));
    }
    for &(a, b) in &cfg.pipes {
        if a >= cfg.nodes || b >= cfg.nodes || a == b {
            return Err(Error::InvalidArgument(format!(
                "invalid pipe ({a}, {b}) for {} nodes",
                cfg.nodes
            )));
        }
    }
    let k = cfg.inner_nodes;
    let elems_per_pipe = k + 1;
    let np_graph = cfg.nodes - 1; // node 0 grounded
    let n_p = np_graph + cfg.pipes.len() * k;
    let n_q = cfg.pipes.len() * elems_per_pipe;
    let h = 1.0 / elems_per_pipe as f64;

    // Pressure DOF index: graph node i>0 -> i-1; inner node j of pipe p
    // -> np_graph + p*k + j. Ground (node 0) -> None.
    let node_dof = |node: usize| -> Option<usize> {
        if node == 0 {
            None
        } else {
            Some(node - 1)
        }
    };
    let inner_dof = |pipe: usize, j: usize| np_graph + pipe * k + j;
    let elem_idx = |pipe: usize, e: usize| pipe * elems_per_pipe + e;

    let mut m1 = Mat::zeros(n_p, n_p);
    let mut m2 = Mat::zeros(n_q, n_q);
    let mut g = Mat::zeros(n_p, n_q);
    for (p, &(from, to)) in cfg.pipes.iter().enumerate() {
        // Chain of pressure DOFs along the pipe: from, inner 0..k, to.
        let mut chain: Vec<Option<usize>> = Vec::with_capacity(k + 2);
        chain.push(node_dof(from));
        for j in 0..k {
            chain.push(Some(inner_dof(p, j)));
        }
        chain.push(node_dof(to));
        for e in 0..elems_per_pipe {
            let q_idx = elem_idx(p, e);
            m2[(q_idx, q_idx)] = cfg.density_flow * h;
            let left = chain[e];
            let right = chain[e + 1];
            if let Some(i) = left {
                g[(i, q_idx)] += 1.0;
                m1[(i, i)] += 0.5 * cfg.density_pressure * h;
            }
            if let Some(i) = right {
                g[(i, q_idx)] -= 1.0;
                m1[(i, i)] += 0.5 * cfg.density_pressure * h;
            }
        }
    }
    let d = &m2 * cfg.damping;

    let n_c = cfg.constrained_pipes.len();
    let mut n_mat = Mat::zeros(n_c, n_q);
    for (row, &p) in cfg.constrained_pipes.iter().enumerate() {
        if p >= cfg.pipes.len() {
            return Err(Error::InvalidArgument(format!("constrained pipe {p} out of range")));
        }
        n_mat[(row, elem_idx(p, elems_per_pipe - 1))] = 1.0;
    }
    if linalg::rank(&n_mat, tol::RANK) != n_c {
        return Err(Error::RankDeficientN {
            rank: linalg::rank(&n_mat, tol::RANK),
            rows: n_c,
        });
    }
    let m_in = cfg.actuated_pipes.len();
    let mut b2 = Mat::zeros(n_q, m_in);
    for (col, &p) in cfg.actuated_pipes.iter().enumerate() {
        if p >= cfg.pipes.len() {
            return Err(Error::InvalidArgument(format!("actuated pipe {p} out of range")));
        }
        b2[(elem_idx(p, 0), col)] = 1.0;
    }

    // Index-2 assembly: E = diag(M1, M2, 0), J = [[0, -G, 0], [G^T, 0, N^T],
    // [0, -N, 0]], R = diag(0, D, 0), Q = I, B = [0; B2; 0].
    let n = n_p + n_q + n_c;
    let mut e = Mat::zeros(n, n);
    e.view_mut((0, 0), (n_p, n_p)).copy_from(&m1);
    e.view_mut((n_p, n_p), (n_q, n_q)).copy_from(&m2);
    let mut j = Mat::zeros(n, n);
    j.view_mut((0, n_p), (n_p, n_q)).copy_from(&(-&g));
    j.view_mut((n_p, 0), (n_q, n_p)).copy_from(&g.transpose());
    j.view_mut((n_p, n_p + n_q), (n_q, n_c))
        .copy_from(&n_mat.transpose());
    j.view_mut((n_p + n_q, n_p), (n_c, n_q)).copy_from(&(-&n_mat));
    let mut r = Mat::zeros(n, n);
    r.view_mut((n_p, n_p), (n_q, n_q)).copy_from(&d);
    let mut b = Mat::zeros(n, m_in);
    b.view_mut((n_p, 0), (n_q, m_in)).copy_from(&b2);
    let index2 = model::assemble(e, j, r, Mat::identity(n, n), b, tol::STRUCTURE)?;

    // Index reduction: restrict flows to ker(N) via an orthonormal kernel
    // basis V; the multipliers become dummy algebraic variables.
    let v = linalg::kernel_basis(&n_mat, tol::RANK);
    let n_qr = v.ncols();
    let gv = &g * &v;
    let m2r = v.transpose() * &m2 * &v;
    let dr = v.transpose() * &d * &v;
    let b2r = v.transpose() * &b2;

    let n1 = n_p + n_qr + n_c;
    let mut e1 = Mat::zeros(n1, n1);
    e1.view_mut((0, 0), (n_p, n_p)).copy_from(&m1);
    e1.view_mut((n_p, n_p), (n_qr, n_qr)).copy_from(&m2r);
    let mut j1 = Mat::zeros(n1, n1);
    j1.view_mut((0, n_p), (n_p, n_qr)).copy_from(&(-&gv));
    j1.view_mut((n_p, 0), (n_qr, n_p)).copy_from(&gv.transpose());
    let mut r1 = Mat::zeros(n1, n1);
    r1.view_mut((n_p, n_p), (n_qr, n_qr)).copy_from(&dr);
    r1.view_mut((n_p + n_qr, n_p + n_qr), (n_c, n_c))
        .copy_from(&Mat::identity(n_c, n_c));
    let mut b1 = Mat::zeros(n1, m_in);
    b1.view_mut((n_p, 0), (n_qr, m_in)).copy_from(&b2r);
    let index1 = model::assemble(e1, j1, r1, Mat::identity(n1, n1), b1, tol::STRUCTURE)?;

    // Semi-explicit scaling through the Cholesky factors of the two mass
    // blocks; Q = I is preserved.
    let l1 = m1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("M1 is not positive definite".into()))?
        .l();
    let l2 = m2r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("V^T M2 V is not positive definite".into()))?
        .l();
    let mut s = Mat::identity(n1, n1);
    s.view_mut((0, 0), (n_p, n_p))
        .copy_from(&linalg::inv_checked(&l1, tol::COND_LIMIT, "L1")?);
    s.view_mut((n_p, n_p), (n_qr, n_qr))
        .copy_from(&linalg::inv_checked(&l2, tol::COND_LIMIT, "L2")?);
    let s_inv_t = {
        let mut t = Mat::identity(n1, n1);
        t.view_mut((0, 0), (n_p, n_p)).copy_from(&l1.transpose());
        t.view_mut((n_p, n_p), (n_qr, n_qr)).copy_from(&l2.transpose());
        t
    };
    let mut semi = model::transform(&index1, &s, &s_inv_t)?;
    let mut e_exact = Mat::zeros(n1, n1);
    for i in 0..n_p + n_qr {
        e_exact[(i, i)] = 1.0;
    }
    if (&semi.e - &e_exact).norm() > 1e-8 * (n1 as f64).sqrt() {
        return Err(Error::SingularTransformation(
            "network semi-explicit scaling drifted".into(),
        ));
    }
    semi.e = e_exact;

    Ok(NetworkModels {
        index2,
        index1_semi_explicit: semi,
    })
}

/// Configuration of the constrained mass-spring-damper chain.
#[derive(Debug, Clone)]
pub struct MsdConfig {
    pub masses: usize,
    /// Uniform mass c (M = c I).
    pub mass: f64,
    /// Interior spring stiffness.
    pub bulk_spring: f64,
    /// Wall spring stiffness at both ends.
    pub boundary_spring: f64,
    /// Interior damper coefficient.
    pub bulk_damping: f64,
    /// Wall damper coefficient at both ends.
    pub boundary_damping: f64,
}

impl MsdConfig {
    pub fn new(masses: usize) -> Self {
        Self {
            masses,
            mass: 1.0,
            bulk_spring: 2.0,
            boundary_spring: 4.0,
            bulk_damping: 2.0,
            boundary_damping: 4.0,
        }
    }
}

/// The three realizations of the constrained chain: first-order, its
/// semi-explicit scaling, and the decoupled form after the regularizing
/// output feedback.
#[derive(Debug, Clone)]
pub struct MsdModels {
    pub first_order: PortHamiltonianDAE,
    pub semi_explicit: PortHamiltonianDAE,
    /// Fed-back system in decoupled quasi-Weierstrass coordinates.
    pub decoupled: PortHamiltonianDAE,
}

fn chain_matrix(k: usize, bulk: f64, boundary: f64) -> Mat {
    let mut m = Mat::zeros(k, k);
    // Wall connections at both ends plus nearest-neighbour couplings.
    for i in 0..k {
        let left = if i == 0 { boundary } else { bulk };
        let right = if i + 1 == k { boundary } else { bulk };
        m[(i, i)] = left + right;
        if i + 1 < k {
            m[(i, i + 1)] = -bulk;
            m[(i + 1, i)] = -bulk;
        }
    }
    m
}

/// Builds the constrained mass-spring-damper chain: `n = 2 * masses + 1`
/// with a single algebraic constraint on the relative velocity of the
/// first and last mass, whose Lagrange multiplier is the measured output.
pub fn msd_chain(cfg: &MsdConfig) -> Result<MsdModels> {
    let k = cfg.masses;
    if k < 2 {
        return Err(Error::InvalidArgument("chain needs at least two masses".into()));
    }
    if cfg.mass <= 0.0 {
        return Err(Error::InvalidArgument("mass must be positive".into()));
    }
    let big_k = chain_matrix(k, cfg.bulk_spring, cfg.boundary_spring);
    let big_d = chain_matrix(k, cfg.bulk_damping, cfg.boundary_damping);
    let mut n_row = Mat::zeros(1, k);
    n_row[(0, 0)] = -1.0;
    n_row[(0, k - 1)] = 1.0;

    let n = 2 * k + 1;
    let mut e = Mat::zeros(n, n);
    e.view_mut((0, 0), (k, k)).copy_from(&big_k);
    e.view_mut((k, k), (k, k))
        .copy_from(&(Mat::identity(k, k) * cfg.mass));
    let mut j = Mat::zeros(n, n);
    j.view_mut((0, k), (k, k)).copy_from(&big_k);
    j.view_mut((k, 0), (k, k)).copy_from(&(-&big_k));
    j.view_mut((k, 2 * k), (k, 1)).copy_from(&n_row.transpose());
    j.view_mut((2 * k, k), (1, k)).copy_from(&(-&n_row));
    let mut r = Mat::zeros(n, n);
    r.view_mut((k, k), (k, k)).copy_from(&big_d);
    let mut b = Mat::zeros(n, 1);
    b[(2 * k, 0)] = 1.0;
    let first_order = model::assemble(e, j, r, Mat::identity(n, n), b, tol::STRUCTURE)?;

    // Semi-explicit scaling: positions by the Cholesky factor of K,
    // velocities by sqrt(c).
    let l = big_k
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("K is not positive definite".into()))?
        .l();
    let mut s = Mat::identity(n, n);
    s.view_mut((0, 0), (k, k))
        .copy_from(&linalg::inv_checked(&l, tol::COND_LIMIT, "Cholesky factor of K")?);
    s.view_mut((k, k), (k, k))
        .copy_from(&(Mat::identity(k, k) / cfg.mass.sqrt()));
    let mut t = Mat::identity(n, n);
    t.view_mut((0, 0), (k, k)).copy_from(&l.transpose());
    t.view_mut((k, k), (k, k))
        .copy_from(&(Mat::identity(k, k) * cfg.mass.sqrt()));
    let mut semi_explicit = model::transform(&first_order, &s, &t)?;
    let mut e_exact = Mat::zeros(n, n);
    for i in 0..2 * k {
        e_exact[(i, i)] = 1.0;
    }
    if (&semi_explicit.e - &e_exact).norm() > 1e-8 * (n as f64).sqrt() {
        return Err(Error::SingularTransformation(
            "MSD semi-explicit scaling drifted".into(),
        ));
    }
    semi_explicit.e = e_exact;

    // Regularizing output feedback, then decoupling of the algebraic part.
    let fb = model::output_feedback(&semi_explicit, -1)?;
    let rr = 2 * k;
    let a = fb.a();
    let a12 = a.view((0, rr), (rr, 1)).into_owned();
    let a21 = a.view((rr, 0), (1, rr)).into_owned();
    let a22 = a.view((rr, rr), (1, 1)).into_owned();
    let a22_inv = linalg::inv_checked(&a22, tol::COND_LIMIT, "A22")?;
    let mut s2 = Mat::identity(n, n);
    s2.view_mut((0, rr), (rr, 1)).copy_from(&(-(&a12 * &a22_inv)));
    let mut t2 = Mat::identity(n, n);
    t2.view_mut((rr, 0), (1, rr)).copy_from(&(&a22_inv * &a21));
    let ph2 = model::transform(&fb, &s2, &t2)?;
    let a22_new = ph2.a().view((rr, rr), (1, 1)).into_owned();
    let mut s3 = Mat::identity(n, n);
    s3.view_mut((rr, rr), (1, 1))
        .copy_from(&linalg::inv_checked(&a22_new, tol::COND_LIMIT, "A22")?);
    let mut decoupled = model::transform(&ph2, &s3, &Mat::identity(n, n))?;
    decoupled.e = semi_explicit.e.clone();

    Ok(MsdModels {
        first_order,
        semi_explicit,
        decoupled,
    })
}

/// Which printed counterexample to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexampleId {
    /// Port-Hamiltonian three-state system balanced w.r.t. the modified
    /// GAREs; truncation at order one yields a singular pencil.
    PhdaeMor,
    /// Unstructured three-state system balanced w.r.t. the original GAREs
    /// with the same truncation failure.
    Classical,
}

/// A counterexample system together with its printed stabilizing GARE
/// solutions as expected-value fixtures.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub system: SystemFile,
    pub p_c: Mat,
    pub p_f: Mat,
}

/// Exact printed matrices of the counterexamples, with the symbolic
/// constants `a = sqrt(1 + sqrt(2))` and `b = sqrt(2 + sqrt(5))` evaluated
/// in double precision.
pub fn counterexample(id: CounterexampleId) -> Counterexample {
    match id {
        CounterexampleId::PhdaeMor => {
            let a = (1.0 + std::f64::consts::SQRT_2).sqrt();
            let b = (2.0 + 5.0f64.sqrt()).sqrt();
            let (a2, b2) = (a * a, b * b);
            let e = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
            let coupling = (a2 + b2) / (b2 - a2);
            let j = Mat::from_row_slice(
                3,
                3,
                &[
                    0.0, coupling, 0.0, //
                    -coupling, 0.0, 1.0, //
                    0.0, -1.0, 0.0,
                ],
            );
            let r = Mat::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
            let q = Mat::from_row_slice(
                3,
                3,
                &[a, 0.0, 0.0, 0.0, b, 0.0, 0.0, b - 1.0 / b, 1.0],
            );
            let bmat = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
            let ph = model::assemble(e, j, r, q, bmat, tol::STRUCTURE)
                .expect("printed counterexample is a valid pH system");
            let p_c = Mat::from_diagonal(&DVector::from_vec(vec![1.0 / a, 1.0 / b, 1.0]));
            let p_f = Mat::from_row_slice(
                3,
                3,
                &[
                    1.0 / a,
                    0.0,
                    0.0,
                    0.0,
                    1.0 / b,
                    1.0 / b2 - 1.0,
                    0.0,
                    0.0,
                    1.0,
                ],
            );
            Counterexample {
                system: SystemFile::PortHamiltonian(ph),
                p_c,
                p_f,
            }
        }
        CounterexampleId::Classical => {
            let e = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
            let a = Mat::from_row_slice(
                3,
                3,
                &[-1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 1.0, 0.0],
            );
            let s3 = 3.0f64.sqrt();
            let b = Mat::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, 0.0, s3 / 2.0, 0.0, 0.0, -4.0 / s3, 1.0],
            );
            let c = b.transpose();
            let sys = DescriptorSystem::new(e, a, b, c).expect("printed system is consistent");
            let p = Mat::from_diagonal(&DVector::from_vec(vec![
                std::f64::consts::SQRT_2 - 1.0,
                1.0 / 3.0,
                1.0,
            ]));
            Counterexample {
                system: SystemFile::Descriptor(sys),
                p_c: p.clone(),
                p_f: p,
            }
        }
    }
}

/// Orthonormal basis of the smallest `A`-invariant subspace containing
/// `im(B)` (the controllable subspace), by the staircase method: each new
/// block is the coupling of `A` applied to the previous block, projected
/// out of the accumulated space and rank-tested against `||A||`.
fn reachable_subspace(a: &Mat, b: &Mat, tol_rank: f64) -> Mat {
    let n = a.nrows();
    let a_scale = tol::scale(a.norm());
    let orth_block = |m: &Mat, reference: f64| -> Mat {
        if m.ncols() == 0 {
            return Mat::zeros(m.nrows(), 0);
        }
        let svd = m.clone().svd(true, false);
        let k = svd
            .singular_values
            .iter()
            .filter(|&&s| s > tol_rank * reference)
            .count();
        svd.u
            .as_ref()
            .expect("svd with u")
            .columns(0, k)
            .into_owned()
    };

    let mut basis = orth_block(b, tol::scale(b.norm()));
    let mut last = basis.clone();
    while basis.ncols() > 0 && basis.ncols() < n && last.ncols() > 0 {
        let mut coupling = a * &last;
        // Re-orthogonalize twice against the accumulated basis.
        for _ in 0..2 {
            coupling -= &basis * (basis.transpose() * &coupling);
        }
        let fresh = orth_block(&coupling, a_scale);
        if fresh.ncols() == 0 {
            break;
        }
        let mut grown = Mat::zeros(n, basis.ncols() + fresh.ncols());
        grown
            .view_mut((0, 0), (n, basis.ncols()))
            .copy_from(&basis);
        grown
            .view_mut((0, basis.ncols()), (n, fresh.ncols()))
            .copy_from(&fresh);
        basis = grown;
        last = fresh;
    }
    basis
}

/// Reduction of a stable ODE part to the states with nonzero Hankel
/// singular values, by the square-root method: semidefinite factors of the
/// two Lyapunov Gramians, an SVD of their product, and oblique projection.
/// Values below `tol * sigma_max / (n + 1)` are treated as zero, which
/// keeps the transfer-function change below `2 tol sigma_max`.
fn hankel_minimal(ode: &crate::analysis::StateSpace, tol_rank: f64) -> Result<(Mat, Mat, Mat)> {
    let n = ode.a.nrows();
    let zeros = Mat::zeros(n, n);
    let wc = crate::riccati::solve_care(
        &ode.a.transpose(),
        &zeros,
        &(&ode.b * ode.b.transpose()),
    )?;
    let wo = crate::riccati::solve_care(&ode.a, &zeros, &(ode.c.transpose() * &ode.c))?;
    let lc = linalg::psd_factor(&linalg::sym_part(&wc), tol::STRUCTURE)?;
    let lo = linalg::psd_factor(&linalg::sym_part(&wo), tol::STRUCTURE)?;
    let svd = (lo.transpose() * &lc).svd(true, true);
    let smax = svd.singular_values.max();
    let cut = tol_rank * smax / (n as f64 + 1.0);
    let k = svd.singular_values.iter().filter(|&&s| s > cut).count();
    if k == 0 {
        return Ok((Mat::zeros(0, 0), Mat::zeros(0, ode.b.ncols()), Mat::zeros(ode.c.nrows(), 0)));
    }
    let mut scale = Mat::zeros(k, k);
    for i in 0..k {
        scale[(i, i)] = 1.0 / svd.singular_values[i].sqrt();
    }
    let u_k = svd.u.as_ref().expect("svd with u").columns(0, k).into_owned();
    let v_k = svd.v_t.as_ref().expect("svd with v_t").rows(0, k).transpose();
    let t = &lc * v_k * &scale;
    let s = &lo * u_k * &scale;
    Ok((
        s.transpose() * &ode.a * &t,
        s.transpose() * &ode.b,
        &ode.c * &t,
    ))
}

/// Minimal realization of a semi-explicit impulse-free descriptor system:
/// the differential part is reduced to the states carrying nonzero Hankel
/// singular values (for stable dynamics) or by a reachability staircase
/// (otherwise), and the algebraic part is reattached unchanged. The
/// transfer function is preserved to `1e-7` at the probe frequencies.
pub fn minimal_realization(sys: &DescriptorSystem, tol_rank: f64) -> Result<DescriptorSystem> {
    let r = sys.semi_explicit_rank().ok_or_else(|| {
        Error::InvalidArgument("minimal_realization expects a semi-explicit system".into())
    })?;
    let n = sys.n();
    let ode = crate::analysis::dae_to_ode(sys)?;

    let stable = linalg::eigenvalues(&ode.a)?
        .iter()
        .all(|l| l.re < -tol::IMAG_AXIS_MARGIN);
    let (a_m, b_m, c_m) = if stable {
        hankel_minimal(&ode, tol_rank)?
    } else {
        // Best-effort fallback: reachability and observability staircases.
        let kc = reachable_subspace(&ode.a, &ode.b, tol_rank);
        let a_c = kc.transpose() * &ode.a * &kc;
        let b_c = kc.transpose() * &ode.b;
        let c_c = &ode.c * &kc;
        let ko = reachable_subspace(&a_c.transpose(), &c_c.transpose(), tol_rank);
        (
            ko.transpose() * &a_c * &ko,
            ko.transpose() * &b_c,
            &c_c * &ko,
        )
    };
    let r_min = a_m.nrows();

    // Reattach the algebraic part (it carries the feedthrough).
    let na = n - r;
    let n_new = r_min + na;
    let mut e = Mat::zeros(n_new, n_new);
    for i in 0..r_min {
        e[(i, i)] = 1.0;
    }
    let mut a = Mat::zeros(n_new, n_new);
    a.view_mut((0, 0), (r_min, r_min)).copy_from(&a_m);
    a.view_mut((r_min, r_min), (na, na))
        .copy_from(&sys.a.view((r, r), (na, na)));
    let mut b = Mat::zeros(n_new, sys.m());
    b.view_mut((0, 0), (r_min, sys.m())).copy_from(&b_m);
    b.view_mut((r_min, 0), (na, sys.m()))
        .copy_from(&sys.b.view((r, 0), (na, sys.m())));
    let mut c = Mat::zeros(sys.p(), n_new);
    c.view_mut((0, 0), (sys.p(), r_min)).copy_from(&c_m);
    c.view_mut((0, r_min), (sys.p(), na))
        .copy_from(&sys.c.view((0, r), (sys.p(), na)));
    let out = DescriptorSystem::new(e, a, b, c)?;

    // Transfer-function preservation at probe frequencies.
    let ode_out = crate::analysis::dae_to_ode(&out)?;
    for w in crate::analysis::probe_frequencies(20) {
        let s = crate::C64::new(0.0, w);
        let g1 = ode.eval(s)?;
        let g2 = ode_out.eval(s)?;
        let defect = (g1.clone() - g2).norm();
        if defect > 1e-7 * tol::scale(g1.norm()) {
            return Err(Error::ResidualTooLarge {
                residual: defect,
                tol: 1e-7,
                context: format!("minimal realization transfer mismatch at w = {w}"),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn counterexample_matches_printed_realization() {
        let fixture = counterexample(CounterexampleId::PhdaeMor);
        let ph = match &fixture.system {
            SystemFile::PortHamiltonian(ph) => ph,
            _ => panic!("expected pH system"),
        };
        let a = (1.0 + std::f64::consts::SQRT_2).sqrt();
        let b = (2.0 + 5.0f64.sqrt()).sqrt();
        let (a2, b2) = (a * a, b * b);
        // Closed form of A = (J - R) Q; the printed Gramians solve the
        // GAREs for exactly this orientation of the off-diagonal entries.
        let expect_a = Mat::from_row_slice(
            3,
            3,
            &[
                -a,
                2.0 * b * a2 / (b2 - a2),
                0.0,
                2.0 * a * b2 / (a2 - b2),
                -(b + 1.0 / b),
                1.0,
                0.0,
                -b,
                0.0,
            ],
        );
        assert!((ph.a() - &expect_a).norm() < 1e-13, "A mismatch");
        let expect_c = Mat::from_row_slice(
            2,
            3,
            &[a, 0.0, 0.0, 0.0, b - 1.0 / b, 1.0],
        );
        assert!((ph.c() - &expect_c).norm() < 1e-13, "C mismatch");
        // Not impulse-free, strongly stabilizable and detectable.
        let sys = ph.descriptor();
        let info = sys.pencil().unwrap();
        assert!(info.regular && !info.impulse_free);
        let rep = model::structural_report(&sys).unwrap();
        assert!(rep.strongly_stabilizable && rep.strongly_detectable);
    }

    #[test]
    fn classical_counterexample_flags() {
        let fixture = counterexample(CounterexampleId::Classical);
        let sys = fixture.system.descriptor();
        let info = sys.pencil().unwrap();
        assert!(info.regular && !info.impulse_free);
        let rep = model::structural_report(&sys).unwrap();
        assert!(rep.strongly_stabilizable && rep.strongly_detectable);
    }

    #[test]
    fn network_dimensions_and_kernel() {
        let cfg = NetworkConfig::small(3);
        let models = transport_network(&cfg).unwrap();
        // pressures: 2 graph + 3 pipes * 3 inner; flows: 3 * 4; 1 constraint.
        let n_p = 2 + 9;
        let n_q = 12;
        assert_eq!(models.index2.n(), n_p + n_q + 1);
        // Kernel property: V^T N^T = 0 is implicit in the reduction; check
        // the index flags instead.
        let info2 = models.index2.descriptor().pencil().unwrap();
        assert!(info2.regular);
        assert_eq!(info2.index, 2);
        let rep2 = model::structural_report(&models.index2.descriptor()).unwrap();
        assert!(!rep2.impulse_controllable);
        let info1 = models.index1_semi_explicit.descriptor().pencil().unwrap();
        assert!(info1.regular);
        assert_eq!(info1.index, 1);
        let rep1 = model::structural_report(&models.index1_semi_explicit.descriptor()).unwrap();
        assert!(rep1.strongly_stabilizable && rep1.strongly_detectable, "{rep1:?}");
    }

    #[test]
    fn msd_dimensions() {
        let models = msd_chain(&MsdConfig::new(3)).unwrap();
        assert_eq!(models.first_order.n(), 7);
        let info = models.first_order.descriptor().pencil().unwrap();
        assert!(info.regular);
        assert_eq!(info.index, 2);
        let rep = model::structural_report(&models.first_order.descriptor()).unwrap();
        assert!(rep.strongly_stabilizable && rep.strongly_detectable, "{rep:?}");
    }

    #[test]
    fn msd_decoupled_matches_displayed_form() {
        let cfg = MsdConfig::new(3);
        let k = cfg.masses;
        let models = msd_chain(&cfg).unwrap();
        let dec = &models.decoupled;
        let n = dec.n();
        // Displayed closed form uses N = e_1^T - e_k^T.
        let mut n_row = Mat::zeros(1, k);
        n_row[(0, 0)] = 1.0;
        n_row[(0, k - 1)] = -1.0;
        let sqrt_c = cfg.mass.sqrt();
        // Algebraic block of A is +1 after feedback and decoupling.
        assert_relative_eq!(dec.a()[(n - 1, n - 1)], 1.0, epsilon = 1e-10);
        // Off-diagonal couplings vanish.
        assert!(dec.a().view((0, n - 1), (n - 1, 1)).norm() < 1e-10);
        assert!(dec.a().view((n - 1, 0), (1, n - 1)).norm() < 1e-10);
        // Q carries the -2N/sqrt(c) block and the -1 corner.
        let q_row = dec.q.view((n - 1, k), (1, k)).into_owned();
        assert!((q_row + 2.0 / sqrt_c * &n_row).norm() < 1e-12, "Q32 mismatch");
        assert_relative_eq!(dec.q[(n - 1, n - 1)], -1.0, epsilon = 1e-12);
        // B = [0; -N^T/sqrt(c); -1] and C = [0, N/sqrt(c), 1].
        assert_relative_eq!(dec.b[(n - 1, 0)], -1.0, epsilon = 1e-12);
        let b_mid = dec.b.view((k, 0), (k, 1)).into_owned();
        assert!((b_mid + n_row.transpose() / sqrt_c).norm() < 1e-12, "B mismatch");
        let c_mid = dec.c().view((0, k), (1, k)).into_owned();
        assert!((c_mid - &n_row / sqrt_c).norm() < 1e-12, "C mismatch");
        assert_relative_eq!(dec.c()[(0, n - 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minimal_realization_already_minimal() {
        let sys = DescriptorSystem::new(
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]),
            Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let min = minimal_realization(&sys, 1e-9).unwrap();
        assert_eq!(min.n(), 2);
    }

    #[test]
    fn minimal_realization_halves_duplicated_states() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let mut a2 = Mat::zeros(4, 4);
        a2.view_mut((0, 0), (2, 2)).copy_from(&a);
        a2.view_mut((2, 2), (2, 2)).copy_from(&a);
        let b = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let mut b2 = Mat::zeros(4, 1);
        b2.view_mut((0, 0), (2, 1)).copy_from(&b);
        b2.view_mut((2, 0), (2, 1)).copy_from(&b);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let mut c2 = Mat::zeros(1, 4);
        c2.view_mut((0, 0), (1, 2)).copy_from(&(0.5 * &c));
        c2.view_mut((0, 2), (1, 2)).copy_from(&(0.5 * &c));
        let sys = DescriptorSystem::new(Mat::identity(4, 4), a2, b2, c2).unwrap();
        let min = minimal_realization(&sys, 1e-9).unwrap();
        assert_eq!(min.n(), 2);
    }

    #[test]
    fn msd_minimal_dimension_pattern() {
        // Flip symmetry makes half the dynamic part unreachable, so the
        // minimal dimension is bounded by k + 1 at k masses. Modes near
        // the symmetric sector are controllable only below working
        // precision, so the staircase may truncate further; the transfer
        // function is preserved either way (checked inside the routine).
        // The staircase runs on the impulse-free decoupled realization;
        // the raw chain has index two.
        let models = msd_chain(&MsdConfig::new(20)).unwrap();
        let min = minimal_realization(&models.decoupled.descriptor(), 1e-8).unwrap();
        assert!(min.n() <= 21, "minimal dimension {} exceeds k + 1", min.n());
        assert!(min.n() >= 5, "implausibly small minimal dimension {}", min.n());
    }
}
