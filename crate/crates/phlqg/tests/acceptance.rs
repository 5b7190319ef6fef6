//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Tolerances are pinned in the assertions.

use std::time::Instant;

use phlqg::analysis::{self, StateSpace};
use phlqg::balancing::{self, Rom};
use phlqg::benchmarks::{self, CounterexampleId, MsdConfig, NetworkConfig};
use phlqg::hamiltonian;
use phlqg::io::SystemFile;
use phlqg::kyp::{self, KypVariant};
use phlqg::model::{self, PortHamiltonianDAE};
use phlqg::riccati::{self, GareSide, GareVariant};
use phlqg::{linalg, tol, C64, Error, Mat};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

fn msd_semi_explicit() -> PortHamiltonianDAE {
    let models = benchmarks::msd_chain(&MsdConfig::new(20)).expect("msd generator");
    let (se, _, _) = model::to_semi_explicit(&models.first_order).expect("semi-explicit");
    se
}

fn network_semi_explicit() -> PortHamiltonianDAE {
    let models =
        benchmarks::transport_network(&NetworkConfig::small(5)).expect("network generator");
    models.index1_semi_explicit
}

/// Criterion 1: printed Gramians of both counterexamples satisfy their
/// GAREs to 1e-12 scale, and truncation at order one raises
/// SingularReducedPencil. Runtime under one second.
#[test]
fn criterion_1_counterexample_fidelity() {
    let start = Instant::now();
    let fixture = benchmarks::counterexample(CounterexampleId::PhdaeMor);
    let ph = match &fixture.system {
        SystemFile::PortHamiltonian(ph) => ph.clone(),
        _ => panic!("expected pH counterexample"),
    };
    let sys = ph.descriptor();
    let res = riccati::gare_residuals(
        &sys,
        Some(&ph.r),
        Some(&fixture.p_c),
        Some(&fixture.p_f),
        GareVariant::Modified,
    );
    let scale = tol::scale(sys.a.norm() + sys.b.norm() + sys.c.norm());
    let residual_ok = res.residual_c <= 1e-12 * scale
        && res.residual_f <= 1e-12 * scale
        && res.sym_c <= 1e-12 * scale
        && res.sym_f <= 1e-12 * scale;
    let truncated = balancing::balance_truncate(&ph, 1);
    let ph_singular = matches!(truncated, Err(Error::SingularReducedPencil { ell: 1 }));

    let classical = benchmarks::counterexample(CounterexampleId::Classical);
    let csys = classical.system.descriptor();
    let cres = riccati::gare_residuals(
        &csys,
        None,
        Some(&classical.p_c),
        Some(&classical.p_f),
        GareVariant::Original,
    );
    let cscale = tol::scale(csys.a.norm() + csys.b.norm() + csys.c.norm());
    let classical_residual_ok = cres.residual_c <= 1e-12 * cscale && cres.residual_f <= 1e-12 * cscale;
    let ctrunc = balancing::classical_lqg_bt(&csys, 1);
    let classical_singular = matches!(ctrunc, Err(Error::SingularReducedPencil { ell: 1 }));

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 1 (counterexample fidelity)",
        residual_ok && ph_singular && classical_residual_ok && classical_singular && elapsed < 1.0,
        &format!(
            "residuals {:.1e}/{:.1e}, singular truncations {}/{}, {elapsed:.2}s",
            res.residual_c.max(res.residual_f),
            cres.residual_c.max(cres.residual_f),
            ph_singular,
            classical_singular
        ),
    );
}

fn gare_correctness(ph: &PortHamiltonianDAE, name: &str) -> (f64, f64, bool) {
    let sys = ph.descriptor();
    let p_f = riccati::solve_filter_gare(ph).expect("filter solution");
    let p_c = riccati::solve_control_gare(&sys).expect("control solution");
    let res = riccati::gare_residuals(&sys, Some(&ph.r), Some(&p_c), Some(&p_f), GareVariant::Modified);
    let scale = tol::scale(sys.a.norm() + sys.b.norm() + sys.c.norm() + p_c.norm() + p_f.norm());
    let resid_rel = res.residual_c.max(res.residual_f).max(res.sym_c).max(res.sym_f) / scale;

    // Filter solution from the deflating-subspace path agrees with Q^{-T}
    // in the product E Pf^T.
    let p_f_pencil = riccati::solve_filter_gare_pencil(&sys, Some(&ph.r), GareVariant::Modified)
        .expect("pencil filter solution");
    let prod_a = &sys.e * p_f.transpose();
    let prod_b = &sys.e * p_f_pencil.transpose();
    let agree_rel = (&prod_a - &prod_b).norm() / tol::scale(prod_a.norm());

    let stab_c = riccati::is_stabilizing(&sys, &p_c, GareSide::Control).expect("control cert");
    let stab_f = riccati::is_stabilizing(&sys, &p_f, GareSide::Filter).expect("filter cert");
    println!("  {name}: residual rel {resid_rel:.2e}, filter agreement {agree_rel:.2e}");
    (resid_rel, agree_rel, stab_c && stab_f)
}

/// Criterion 2: modified GARE residuals at 1e-8 scale on both benchmarks,
/// the two filter routes agree to 1e-7 on E Pf^T, and the closed loops
/// certify. Runtime under ten seconds each.
#[test]
fn criterion_2_gare_correctness() {
    let start = Instant::now();
    let msd = msd_semi_explicit();
    let (r1, a1, s1) = gare_correctness(&msd, "msd");
    let t1 = start.elapsed().as_secs_f64();

    let start2 = Instant::now();
    let net = network_semi_explicit();
    assert!(net.n() <= 60, "network benchmark exceeds 60 states");
    let (r2, a2, s2) = gare_correctness(&net, "network");
    let t2 = start2.elapsed().as_secs_f64();

    report(
        "criterion 2 (GARE correctness)",
        r1 <= 1e-8 && r2 <= 1e-8 && a1 <= 1e-7 && a2 <= 1e-7 && s1 && s2 && t1 < 10.0 && t2 < 10.0,
        &format!("msd {r1:.1e}/{a1:.1e} in {t1:.1}s, network {r2:.1e}/{a2:.1e} in {t2:.1}s"),
    );
}

/// Criterion 3: every successful truncation passes the structure
/// certificates with margins at 1e-10 scale.
#[test]
fn criterion_3_rom_structure() {
    let mut all_pass = true;
    let mut count = 0;
    for ph in [msd_semi_explicit(), network_semi_explicit()] {
        let (p_c, p_f) = balancing::solve_gramians(&ph).expect("gramians");
        let sigma = balancing::characteristic_values(&ph.descriptor(), &p_c, &p_f).expect("sigma");
        for ell in 1..=sigma.len() {
            match balancing::balance_truncate_given(&ph, ell, &p_c, &p_f) {
                Ok(result) => {
                    let rep = balancing::check_rom_structure(&result).expect("structure report");
                    if !rep.all_pass {
                        println!("  structure failure at ell {ell}: {rep:?}");
                        all_pass = false;
                    }
                    count += 1;
                }
                Err(Error::SingularReducedPencil { .. }) | Err(Error::GapTooSmall { .. }) => {}
                Err(Error::InvalidArgument(_)) => break,
                Err(e) => panic!("unexpected truncation error at ell {ell}: {e}"),
            }
        }
    }
    report(
        "criterion 3 (ROM structure)",
        all_pass && count > 0,
        &format!("{count} truncations certified"),
    );
}

struct SweepOutcome {
    sigma: Vec<f64>,
    bounds: Vec<f64>,
    errors: Vec<Option<f64>>,
}

fn run_sweep(ph: &PortHamiltonianDAE) -> SweepOutcome {
    let sys = ph.descriptor();
    let (p_c, p_f) = balancing::solve_gramians(ph).expect("gramians");
    let sigma = balancing::characteristic_values(&sys, &p_c, &p_f).expect("sigma");
    let mut bounds = Vec::new();
    let mut errors = Vec::new();
    for ell in 1..=sigma.len() {
        bounds.push(analysis::error_bound(&sigma, ell));
        match balancing::balance_truncate_given(ph, ell, &p_c, &p_f) {
            Ok(result) => {
                let err = analysis::coprime_error(
                    &sys,
                    &result.rom.descriptor(),
                    &p_c,
                    &result.p_c_rom,
                )
                .expect("coprime error");
                errors.push(Some(err));
            }
            Err(Error::SingularReducedPencil { .. }) | Err(Error::GapTooSmall { .. }) => {
                errors.push(None)
            }
            Err(Error::InvalidArgument(_)) => {
                errors.push(None);
            }
            Err(e) => panic!("unexpected truncation error: {e}"),
        }
    }
    SweepOutcome { sigma, bounds, errors }
}

/// Criterion 4: the coprime-factor error never exceeds the a-priori bound
/// (with 1e-6 slack) for any valid order on either benchmark, and the
/// bound column is strictly decreasing. Runtime under 60 seconds each.
#[test]
fn criterion_4_error_bound() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, ph) in [("msd", msd_semi_explicit()), ("network", network_semi_explicit())] {
        let start = Instant::now();
        let sweep = run_sweep(&ph);
        for (i, err) in sweep.errors.iter().enumerate() {
            if let Some(err) = err {
                if *err > sweep.bounds[i] * (1.0 + 1e-6) + 1e-8 {
                    println!("  {name}: bound violated at ell {}: {err} > {}", i + 1, sweep.bounds[i]);
                    pass = false;
                }
            }
        }
        for w in sweep.bounds.windows(2) {
            if !(w[1] < w[0]) {
                println!("  {name}: bound not strictly decreasing: {} -> {}", w[0], w[1]);
                pass = false;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 60.0 {
            println!("  {name}: sweep took {elapsed:.1}s");
            pass = false;
        }
        detail.push_str(&format!("{name} {}ells/{elapsed:.1}s ", sweep.errors.len()));
    }
    report("criterion 4 (error bound)", pass, detail.trim());
}

/// Criterion 5: the normalized-coprime property holds at 100 frequencies
/// for the full models and every regular reduced model.
#[test]
fn criterion_5_normalized_coprime() {
    let mut worst = 0.0f64;
    for ph in [msd_semi_explicit(), network_semi_explicit()] {
        let sys = ph.descriptor();
        let (p_c, p_f) = balancing::solve_gramians(&ph).expect("gramians");
        let fom = analysis::coprime_realization(&sys, &p_c).expect("fom coprime");
        for w in analysis::probe_frequencies(100) {
            worst = worst.max(fom.normalization_defect(w).expect("defect"));
        }
        let sigma = balancing::characteristic_values(&sys, &p_c, &p_f).expect("sigma");
        for ell in 1..=sigma.len() {
            if let Ok(result) = balancing::balance_truncate_given(&ph, ell, &p_c, &p_f) {
                let rom = result.rom.descriptor();
                let cr = analysis::coprime_realization(&rom, &result.p_c_rom).expect("rom coprime");
                for w in analysis::probe_frequencies(100) {
                    worst = worst.max(cr.normalization_defect(w).expect("defect"));
                }
            }
        }
    }
    report(
        "criterion 5 (normalized coprime property)",
        worst <= 1e-6,
        &format!("max defect {worst:.2e}"),
    );
}

/// Criterion 6: Hamiltonian optimization dominates the canonical choice:
/// the Hamiltonian grows in the E-weighted order, characteristic values
/// shrink elementwise, and both the bound and error curves of the
/// optimized variant lie at or below the canonical ones on both
/// benchmarks.
#[test]
fn criterion_6_hamiltonian_optimization() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, ph) in [("msd", msd_semi_explicit()), ("network", network_semi_explicit())] {
        let sys = ph.descriptor();
        let (p_c, p_f) = balancing::solve_gramians(&ph).expect("gramians");
        let sigma = balancing::characteristic_values(&sys, &p_c, &p_f).expect("sigma");

        let opt = hamiltonian::optimize_for_reduction(&ph, None).expect("optimization");
        // The optimized system is the intermediate-reduced one when the
        // full-order extremal solve is degenerate; its Hamiltonian
        // dominance is certified against its own source system inside the
        // construction. Here we check the observable outcomes.
        let base = match opt.intermediate_order {
            None => ph.clone(),
            Some(ell) => {
                let red = balancing::balance_truncate_given(&ph, ell, &p_c, &p_f).expect("reduce");
                match red.rom {
                    Rom::PortHamiltonian(rom) => rom,
                    _ => unreachable!(),
                }
            }
        };
        let gain = linalg::sym_part(&(base.e.transpose() * &opt.ph.q))
            - linalg::sym_part(&(base.e.transpose() * &base.q));
        let gain_scale = tol::scale((base.e.transpose() * &base.q).norm());
        let gain_min = linalg::min_sym_eig(&gain);
        if gain_min < -1e-8 * gain_scale {
            println!("  {name}: E^T Q_bar does not dominate (lambda_min {gain_min:.2e})");
            pass = false;
        }

        // sigma^_i <= sigma_i + 1e-8 elementwise on the shared prefix.
        let sigma_hat = &opt.optimization.sigma_hat;
        for (i, sh) in sigma_hat.iter().enumerate() {
            if i < sigma.len() && *sh > sigma[i] + 1e-8 {
                println!("  {name}: sigma_hat[{i}] = {sh} exceeds sigma[{i}] = {}", sigma[i]);
                pass = false;
            }
        }

        // Optimized bound and error curves at or below the canonical ones.
        let canonical = run_sweep(&ph);
        let (p_c_opt, p_f_opt) = balancing::solve_gramians(&opt.ph).expect("optimized gramians");
        let sigma_opt =
            balancing::characteristic_values(&opt.ph.descriptor(), &p_c_opt, &p_f_opt)
                .expect("optimized sigma");
        let mut compared = 0;
        for ell in 1..=sigma_opt.len().min(canonical.sigma.len()) {
            let bound_opt = analysis::error_bound(&sigma_opt, ell) + opt.tail_bound;
            if bound_opt > canonical.bounds[ell - 1] * (1.0 + 1e-9) {
                println!(
                    "  {name}: optimized bound {bound_opt} above canonical {} at ell {ell}",
                    canonical.bounds[ell - 1]
                );
                pass = false;
            }
            let reduced = match balancing::balance_truncate_given(&opt.ph, ell, &p_c_opt, &p_f_opt)
            {
                Ok(r) => r,
                Err(_) => continue,
            };
            let err_opt =
                analysis::coprime_error(&sys, &reduced.rom.descriptor(), &p_c, &reduced.p_c_rom)
                    .expect("optimized error");
            if err_opt > bound_opt * (1.0 + 1e-6) + 1e-8 {
                println!("  {name}: optimized error {err_opt} above its bound {bound_opt} at ell {ell}");
                pass = false;
            }
            if let Some(err_can) = canonical.errors[ell - 1] {
                if err_opt > err_can * (1.0 + 1e-9) + 1e-8 {
                    println!(
                        "  {name}: optimized error {err_opt} above canonical {err_can} at ell {ell}"
                    );
                    pass = false;
                }
                compared += 1;
            }
        }
        if compared == 0 {
            println!("  {name}: no comparable orders");
            pass = false;
        }
        detail.push_str(&format!(
            "{name} intermediate {:?}, {compared} orders compared ",
            opt.intermediate_order
        ));
    }
    report("criterion 6 (Hamiltonian optimization)", pass, detail.trim());
}

/// Criterion 7: the LQG controller passes the passivity certificate and
/// the closed loop is regular, impulse-free, and stable on both
/// benchmarks. Runtime under ten seconds.
#[test]
fn criterion_7_controller() {
    let start = Instant::now();
    let mut pass = true;
    for (name, ph) in [("msd", msd_semi_explicit()), ("network", network_semi_explicit())] {
        let p_c = riccati::solve_control_gare(&ph.descriptor()).expect("control solution");
        let (_, rep) = analysis::lqg_controller(&ph, &p_c).expect("controller");
        if !rep.all_pass {
            println!("  {name}: controller certificates failed: {rep:?}");
            pass = false;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 7 (passive controller)",
        pass && elapsed < 10.0,
        &format!("{elapsed:.1}s"),
    );
}

/// Diagonalizable random stable system with a known spectral form, so the
/// grid oracle can evaluate a million frequencies cheaply.
struct GridOracleSystem {
    ss: StateSpace,
    // Spectral data: G(iw) = C V inv(iw - D) V^{-1} B + D_ss with D built
    // from 1x1 and 2x2 rotation blocks.
    blocks: Vec<(f64, f64)>, // (re, im); im = 0 for a real eigenvalue
    cv: Mat,
    vib: Mat,
}

impl GridOracleSystem {
    fn random(rng: &mut impl rand::Rng, n: usize, m: usize) -> Self {
        let mut d = Mat::zeros(n, n);
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < n {
            let re = -rng.gen_range(0.05..2.0);
            if i + 1 < n && rng.gen_bool(0.6) {
                let im = rng.gen_range(0.1..3.0);
                d[(i, i)] = re;
                d[(i, i + 1)] = im;
                d[(i + 1, i)] = -im;
                d[(i + 1, i + 1)] = re;
                blocks.push((re, im));
                i += 2;
            } else {
                d[(i, i)] = re;
                blocks.push((re, 0.0));
                i += 1;
            }
        }
        let v = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)) + Mat::identity(n, n) * 2.0;
        let v_inv = v.clone().try_inverse().expect("well-conditioned V");
        let a = &v * &d * &v_inv;
        let b = Mat::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let c = Mat::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let cv = &c * &v;
        let vib = &v_inv * &b;
        Self {
            ss: StateSpace {
                a,
                b,
                c,
                d: Mat::zeros(m, m),
            },
            blocks,
            cv,
            vib,
        }
    }

    /// Largest singular value of `G(iw)` through the spectral form.
    fn gain_at(&self, w: f64) -> f64 {
        let n = self.ss.a.nrows();
        let m = self.vib.ncols();
        let mut resolvent_vib = nalgebra::DMatrix::<C64>::zeros(n, m);
        let mut i = 0;
        for &(re, im) in &self.blocks {
            if im == 0.0 {
                let inv = (C64::new(0.0, w) - C64::new(re, 0.0)).inv();
                for j in 0..m {
                    resolvent_vib[(i, j)] = inv * self.vib[(i, j)];
                }
                i += 1;
            } else {
                // Block inverse of [[s-re, -im], [im, s-re]].
                let s = C64::new(0.0, w);
                let alpha = s - C64::new(re, 0.0);
                let det = alpha * alpha + C64::new(im * im, 0.0);
                let inv = det.inv();
                for j in 0..m {
                    let x = self.vib[(i, j)];
                    let y = self.vib[(i + 1, j)];
                    resolvent_vib[(i, j)] = inv * (alpha * x + im * y);
                    resolvent_vib[(i + 1, j)] = inv * (-im * x + alpha * y);
                }
                i += 2;
            }
        }
        let g = linalg::to_complex(&self.cv) * resolvent_vib;
        g.singular_values().max()
    }
}

/// Criterion 8: oracle equivalences: scalar Riccati roots exact, the
/// H-infinity bisection against a million-point grid oracle, and
/// invariance of the characteristic values under random semi-explicit
/// preserving transformations.
#[test]
fn criterion_8_oracles() {
    use rand::SeedableRng;
    let mut pass = true;

    // Scalar Riccati roots against the quadratic formula.
    let x1 = riccati::solve_care(&(-Mat::identity(1, 1)), &Mat::identity(1, 1), &Mat::identity(1, 1))
        .expect("scalar care");
    let x2 = riccati::solve_care(
        &(-Mat::identity(1, 1)),
        &Mat::identity(1, 1),
        &(Mat::identity(1, 1) * 3.0),
    )
    .expect("scalar care 2");
    if (x1[(0, 0)] - (SQRT2 - 1.0)).abs() > 1e-12 || (x2[(0, 0)] - 1.0).abs() > 1e-12 {
        println!("  scalar Riccati roots off: {} {}", x1[(0, 0)], x2[(0, 0)]);
        pass = false;
    }

    // H-infinity bisection against a 1e6-point grid oracle.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let hinf_tol = 1e-6;
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        let sys = GridOracleSystem::random(&mut rng, 6, 2);
        let computed = analysis::hinf_norm(&sys.ss, hinf_tol).expect("hinf");
        let mut grid_max = sys.gain_at(0.0);
        let points = 1_000_000usize;
        let (lo, hi) = (1e-4f64, 1e4f64);
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            let w = lo * (hi / lo).powf(t);
            let g = sys.gain_at(w);
            if g > grid_max {
                grid_max = g;
            }
        }
        if computed < grid_max * (1.0 - 2.0 * hinf_tol) || computed > grid_max * (1.0 + 2.0 * hinf_tol)
        {
            println!("  hinf mismatch: computed {computed}, grid {grid_max}");
            pass = false;
        }
        worst_rel = worst_rel.max((computed - grid_max).abs() / grid_max);
    }

    // Invariance of characteristic values under random semi-explicit
    // preserving transformations.
    use rand::Rng as _;
    let ph = network_semi_explicit();
    let sys = ph.descriptor();
    let (p_c, p_f) = balancing::solve_gramians(&ph).expect("gramians");
    let sigma = balancing::characteristic_values(&sys, &p_c, &p_f).expect("sigma");
    let n = ph.n();
    let r = ph.rank_e();
    let mut worst_sigma_rel = 0.0f64;
    for _ in 0..2 {
        // S = [[S11, S12], [0, S22]], T^{-1} = [[S11^{-1}, 0], [T21, T22]].
        let s11 = Mat::from_fn(r, r, |_, _| rng.gen_range(-0.3..0.3)) + Mat::identity(r, r);
        let s12 = Mat::from_fn(r, n - r, |_, _| rng.gen_range(-0.3..0.3));
        let s22 = Mat::from_fn(n - r, n - r, |_, _| rng.gen_range(-0.3..0.3))
            + Mat::identity(n - r, n - r);
        let t21 = Mat::from_fn(n - r, r, |_, _| rng.gen_range(-0.3..0.3));
        let t22 = Mat::from_fn(n - r, n - r, |_, _| rng.gen_range(-0.3..0.3))
            + Mat::identity(n - r, n - r);
        let mut s = Mat::zeros(n, n);
        s.view_mut((0, 0), (r, r)).copy_from(&s11);
        s.view_mut((0, r), (r, n - r)).copy_from(&s12);
        s.view_mut((r, r), (n - r, n - r)).copy_from(&s22);
        let mut t_inv = Mat::zeros(n, n);
        t_inv
            .view_mut((0, 0), (r, r))
            .copy_from(&s11.clone().try_inverse().expect("S11 invertible"));
        t_inv.view_mut((r, 0), (n - r, r)).copy_from(&t21);
        t_inv.view_mut((r, r), (n - r, n - r)).copy_from(&t22);
        let t = t_inv.try_inverse().expect("T invertible");
        let transformed = model::transform(&ph, &s, &t).expect("transform");
        // The transformed system stays semi-explicit up to round-off.
        let mut tr = transformed.clone();
        let mut e_exact = Mat::zeros(n, n);
        for i in 0..r {
            e_exact[(i, i)] = 1.0;
        }
        assert!((&tr.e - &e_exact).norm() < 1e-8);
        tr.e = e_exact;
        let tr = model::assemble(tr.e, tr.j, tr.r, tr.q, tr.b, phlqg::tol::STRUCTURE)
            .expect("reassemble");
        let (p_c2, p_f2) = balancing::solve_gramians(&tr).expect("transformed gramians");
        let sigma2 =
            balancing::characteristic_values(&tr.descriptor(), &p_c2, &p_f2).expect("sigma2");
        // Invariance is asserted on the well-resolved values; entries at
        // the Gramian noise floor may enter or leave the list.
        let resolved = sigma.iter().filter(|&&s| s > 1e-5 * sigma[0]).count();
        assert!(sigma2.len() >= resolved, "resolved sigma count changed");
        for i in 0..resolved {
            worst_sigma_rel = worst_sigma_rel.max((sigma[i] - sigma2[i]).abs() / sigma[i]);
        }
    }
    if worst_sigma_rel > 1e-7 {
        println!("  characteristic values drift under transformation: {worst_sigma_rel:.2e}");
        pass = false;
    }

    report(
        "criterion 8 (oracle equivalences)",
        pass,
        &format!("hinf worst rel {worst_rel:.2e}, sigma invariance {worst_sigma_rel:.2e}"),
    );
}

/// Criterion 9: the scalar maximal KYP root, and agreement of the direct
/// anti-stable route with the dual-minimal-then-invert route on the
/// benchmark reduced problems.
#[test]
fn criterion_9_kyp_maximality() {
    let mut pass = true;
    let scalar = kyp::ReducedKypProblem {
        a11: -Mat::identity(1, 1),
        b1: Mat::identity(1, 1),
        c1: Mat::identity(1, 1),
        s_block: Mat::zeros(1, 1),
        cross_extra: Mat::zeros(1, 1),
        quad_extra: Mat::zeros(1, 1),
        variant: KypVariant::Index1,
        q11: Mat::identity(1, 1),
    };
    let x = kyp::solve_max(&scalar, 1e-12).expect("scalar max");
    if (x[(0, 0)] - 1.0).abs() > 2e-6 {
        println!("  scalar X_max = {} not within 2e-6 of 1", x[(0, 0)]);
        pass = false;
    }

    // Route agreement on the benchmark reduced problems. The dual route
    // inverts a minimal solution, which blows up where the maximal one is
    // severely ill-conditioned; the comparison runs at the largest
    // intermediate order where both routes produce a certified root.
    let mut detail = String::new();
    for (name, ph) in [("msd", msd_semi_explicit()), ("network", network_semi_explicit())] {
        let (p_c, p_f) = balancing::solve_gramians(&ph).expect("gramians");
        let sigma = balancing::characteristic_values(&ph.descriptor(), &p_c, &p_f).expect("sigma");
        let mut agreed = None;
        for ell in (1..=sigma.len()).rev() {
            let Ok(reduced) = balancing::balance_truncate_given(&ph, ell, &p_c, &p_f) else {
                continue;
            };
            let base = match reduced.rom {
                Rom::PortHamiltonian(rom) => rom,
                _ => unreachable!(),
            };
            let info = base.descriptor().pencil().expect("pencil");
            let built = if info.impulse_free {
                hamiltonian::to_decoupled_wcf(&base, false)
                    .and_then(|wcf| kyp::build_reduced_kyp(&wcf, KypVariant::Index1))
            } else {
                hamiltonian::to_decoupled_wcf(&base, true)
                    .and_then(|wcf| kyp::build_reduced_kyp(&wcf, KypVariant::General))
            };
            let Ok(problem) = built else { continue };
            // The dual route forms the explicitly inverted Schur data,
            // whose grading is 1/eps; compare at an eps both routes can
            // represent in double precision.
            let route_eps = 1e-8;
            let (Ok(direct), Ok(dual)) = (
                kyp::solve_max(&problem, route_eps),
                kyp::solve_max_via_dual(&problem, route_eps),
            ) else {
                continue;
            };
            let rel = (&direct - &dual).norm() / tol::scale(direct.norm());
            agreed = Some((ell, rel));
            break;
        }
        match agreed {
            Some((ell, rel)) => {
                detail.push_str(&format!("{name} routes {rel:.2e} at order {ell} "));
                if rel > 1e-6 {
                    println!("  {name}: route disagreement {rel:.2e}");
                    pass = false;
                }
            }
            None => {
                println!("  {name}: no order with both routes certified");
                pass = false;
            }
        }
    }
    report("criterion 9 (KYP maximality)", pass, detail.trim());
}
