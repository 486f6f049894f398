//! Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;

use leeyang::analysis::{
    c_n_bracket, cumulants_from_spectrum, cumulants_from_zeros, scaling_constants, tilt_spectrum, tilted_ly_check,
    LyStatus, WDensity,
};
use leeyang::herglotz::{m_direct, m_from_zeros, stieltjes_arc_mass, DEFAULT_RADII};
use leeyang::lattice::{build_lattice, Boundary, LatticeSpec};
use leeyang::limit::quartic_constants;
use leeyang::montecarlo::{mc_run, GammaMode, McConfig};
use leeyang::pipeline::{
    chain_precision_hint, limit_row, solve_family_member, solve_with_escalation, EscalationPolicy, LimitFamily,
    LimitRow, SolvedSystem,
};
use leeyang::special::gamma;
use leeyang::spectrum::{
    enumerate_spectrum, transfer_spectrum_1d, transfer_spectrum_2d, MagnetizationSpectrum,
};
use leeyang::zeros::{
    complete_power_sum, factorization_residual, find_angles, mgf_zeros, LeeYangSpectrum, MgfZeroList,
    DEFAULT_THETA_TOL, GRID_POINTS_PER_SITE,
};
use leeyang::Beta;

const BETAS: [&str; 3] = ["0.1", "0.3", "0.5"];
/// e^{2 beta} = 2.
const LN2_HALF: &str = "0.34657359027997265470861606072908828403775006718012762706034000";
const CHAIN_BETA: &str = "0.2";
const CHAIN_SIZES: [usize; 3] = [101, 401, 1601];

fn report(id: u32, pass: bool, elapsed: f64, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id}: {verdict} ({elapsed:.1} s) {detail}");
}

/// Every system of the engine cross-validation, in a fixed order.
#[derive(Debug, Clone)]
struct SystemId {
    label: String,
    lattice: LatticeSpec,
    beta: Beta,
}

fn exact_systems() -> Vec<SystemId> {
    let mut out = Vec::new();
    for b in BETAS {
        let beta = Beta::parse(b).unwrap();
        for n in 1..=20 {
            for bc in [Boundary::Free, Boundary::Periodic] {
                if bc == Boundary::Periodic && n < 3 {
                    continue;
                }
                out.push(SystemId {
                    label: format!("chain N={n} {bc} beta={b}"),
                    lattice: LatticeSpec::chain(n, bc).unwrap(),
                    beta: beta.clone(),
                });
            }
        }
        for (r, bc) in [(1, Boundary::Free), (2, Boundary::Free), (1, Boundary::Periodic)] {
            out.push(SystemId {
                label: format!("{0}x{0} {bc} beta={b}", 2 * r + 1),
                lattice: build_lattice(2, r, bc).unwrap(),
                beta: beta.clone(),
            });
        }
    }
    out
}

fn transfer(sys: &SystemId, bits: u32) -> leeyang::Result<MagnetizationSpectrum> {
    match sys.lattice.dimension() {
        1 => transfer_spectrum_1d(sys.lattice.site_count(), sys.lattice.boundary(), &sys.beta, bits),
        _ => transfer_spectrum_2d(sys.lattice.radius().unwrap(), sys.lattice.boundary(), &sys.beta, bits),
    }
}

/// Transfer-matrix spectra and zeros of every exact system.
fn solved_systems() -> &'static Vec<(SystemId, SolvedSystem)> {
    static CELL: OnceLock<Vec<(SystemId, SolvedSystem)>> = OnceLock::new();
    CELL.get_or_init(|| {
        exact_systems()
            .into_iter()
            .map(|sys| {
                let solved = solve_with_escalation(EscalationPolicy::default(), |bits| transfer(&sys, bits))
                    .unwrap_or_else(|e| panic!("{}: {e}", sys.label));
                (sys, solved)
            })
            .collect()
    })
}

/// The d=1 beta=0.2 free chains of the limit criteria.
fn chain_family() -> &'static Vec<(SolvedSystem, LimitRow)> {
    static CELL: OnceLock<Vec<(SolvedSystem, LimitRow)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let beta = Beta::parse(CHAIN_BETA).unwrap();
        CHAIN_SIZES
            .iter()
            .map(|&n| {
                let policy = EscalationPolicy::starting_at(chain_precision_hint(n, beta.to_f64()));
                let s = solve_family_member(LimitFamily::Chain, &beta, Boundary::Free, n, policy).unwrap();
                let row = limit_row(&s).unwrap();
                (s, row)
            })
            .collect()
    })
}

fn chain3() -> MagnetizationSpectrum {
    enumerate_spectrum(&build_lattice(1, 1, Boundary::Free).unwrap(), &Beta::parse(LN2_HALF).unwrap(), 106).unwrap()
}

fn single_spin() -> MagnetizationSpectrum {
    enumerate_spectrum(&build_lattice(1, 0, Boundary::Free).unwrap(), &Beta::zero(), 106).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn criterion_01_oracle_micro_systems() {
    let t = Instant::now();
    let mut fails = Vec::new();

    let s = single_spin();
    let cum = cumulants_from_spectrum(&s, &[2, 4]).unwrap();
    if !(close(cum.u2, 1.0, 1e-15) && close(cum.u4, -2.0, 1e-15)) {
        fails.push(format!("single spin cumulants {cum:?}"));
    }
    let z = find_angles(&s, 64, DEFAULT_THETA_TOL).unwrap();
    if z.angles().len() != 1 || z.angles()[0].theta != PI {
        fails.push(format!("single spin angles {:?}", z.angles()));
    }
    let list = mgf_zeros(&z, 10_000);
    let b_exact = cum.u2 - 2.0 * complete_power_sum(&z.expanded(), 2).unwrap();
    let b_trunc = cum.u2 - 2.0 * list.power_sum(2);
    if !(b_exact.abs() < 1e-15 && b_trunc.abs() <= 2.0 * list.tail_bound(2)) {
        fails.push(format!("b = {b_exact:e} (closed form), {b_trunc:e} (K=1e4)"));
    }
    let u4z = cumulants_from_zeros(&list, 4).unwrap();
    if !(close(u4z.value, -2.0, 1e-10) && u4z.bound <= 1e-10) {
        fails.push(format!("u4 from zeros {u4z:?}"));
    }

    let c3 = chain3();
    let a3 = c3.log_weight(3).unwrap().exp().to_f64();
    let a1 = c3.log_weight(1).unwrap().exp().to_f64();
    if !(close(a3, 2.0, 1e-13) && close(a1, 2.5, 1e-13)) {
        fails.push(format!("A = {{{a3}, {a1}}}"));
    }
    let cum3 = cumulants_from_spectrum(&c3, &[2, 4]).unwrap();
    if !(close(cum3.u2, 41.0 / 9.0, 1e-12) && close(cum3.u4, -694.0 / 27.0, 1e-12)) {
        fails.push(format!("N=3 cumulants {cum3:?}"));
    }
    let z3 = find_angles(&c3, 192, DEFAULT_THETA_TOL).unwrap().expanded();
    let t1 = (-0.125f64).acos();
    let expect = [t1, PI, TAU - t1];
    if z3.len() != 3 || z3.iter().zip(expect).any(|(a, b)| !close(*a, b, 1e-9)) {
        fails.push(format!("N=3 angles {z3:?}"));
    }

    let pass = fails.is_empty();
    let detail = if pass {
        format!("single spin u2=1 u4=-2 theta=pi b=0, u4(zeros,K=1e4)={:.12}; N=3 A={{2,2.5}} angles {:.9} {:.9}", u4z.value, z3[0], z3[2])
    } else {
        fails.join("; ")
    };
    report(1, pass, t.elapsed().as_secs_f64(), &detail);
    assert!(pass);
}

fn max_relative_gap(a: &MagnetizationSpectrum, b: &MagnetizationSpectrum) -> f64 {
    let p = a.precision_bits().max(b.precision_bits()) + 32;
    a.magnetizations()
        .map(|m| {
            let la = a.log_weight(m).unwrap();
            let lb = b.log_weight(m).unwrap();
            let d = Float::with_val(p, &la - &lb).exp_m1();
            d.abs().to_f64()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_engine_cross_validation() {
    let t = Instant::now();
    let mut worst = (0.0, String::new());
    for sys in exact_systems() {
        let brute = enumerate_spectrum(&sys.lattice, &sys.beta, 106).unwrap();
        let tm = transfer(&sys, 106).unwrap();
        let gap = max_relative_gap(&brute, &tm);
        if gap > worst.0 || worst.1.is_empty() {
            worst = (gap, sys.label.clone());
        }
    }
    let pass = worst.0 <= 1e-28;
    report(
        2,
        pass,
        t.elapsed().as_secs_f64(),
        &format!("{} systems, worst relative gap {:.2e} ({})", exact_systems().len(), worst.0, worst.1),
    );
    assert!(pass);
}

/// Points of the first-quadrant sector `|z| <= 1`, `arg z <= 3pi/8`; the MGF is even and real.
fn factorization_grid() -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=4 {
        for j in 0..=6 {
            g.push(Complex64::from_polar(i as f64 / 4.0, j as f64 * PI / 16.0));
        }
    }
    g
}

fn factorization_ok(spec: &MagnetizationSpectrum, zeros: &LeeYangSpectrum) -> Result<(f64, f64), String> {
    let depth = MgfZeroList::depth_for(zeros, 4, 1e-10);
    let list = mgf_zeros(zeros, depth);
    let r = factorization_residual(spec, &list, &factorization_grid()).map_err(|e| e.to_string())?;
    Ok((r.residual, r.tail_bound))
}

#[test]
fn criterion_03_factorization() {
    let t = Instant::now();
    let mut fails = Vec::new();
    let mut worst = 0f64;
    let mut count = 0;
    for (sys, s) in solved_systems() {
        match factorization_ok(&s.spectrum, &s.zeros) {
            Ok((res, bound)) => {
                worst = worst.max(res);
                if res > 1e-8 + bound {
                    fails.push(format!("{}: {res:e} > 1e-8 + {bound:e}", sys.label));
                }
            }
            Err(e) => fails.push(format!("{}: {e}", sys.label)),
        }
        count += 1;
    }
    for b in BETAS {
        let beta = Beta::parse(b).unwrap();
        for n in [101, 401] {
            let policy = EscalationPolicy::starting_at(chain_precision_hint(n, beta.to_f64()));
            let s = solve_with_escalation(policy, |bits| transfer_spectrum_1d(n, Boundary::Free, &beta, bits)).unwrap();
            match factorization_ok(&s.spectrum, &s.zeros) {
                Ok((res, bound)) => {
                    worst = worst.max(res);
                    if res > 1e-8 + bound {
                        fails.push(format!("chain N={n} beta={b}: {res:e}"));
                    }
                }
                Err(e) => fails.push(format!("chain N={n} beta={b}: {e}")),
            }
            count += 1;
        }
    }
    let pass = fails.is_empty();
    let detail = if pass {
        format!("{count} systems, worst residual {worst:.2e} on |z| <= 1")
    } else {
        fails.join("; ")
    };
    report(3, pass, t.elapsed().as_secs_f64(), &detail);
    assert!(pass);
}

#[test]
fn criterion_04_density_sandwich_and_c_n() {
    let t = Instant::now();
    let (lo, hi) = (0.34205, 0.55163);
    let exact_bracket = c_n_bracket();
    let mut fails = Vec::new();
    let mut specs: Vec<(String, MagnetizationSpectrum)> =
        vec![("single spin".into(), single_spin()), ("N=3 chain".into(), chain3())];
    specs.extend(solved_systems().iter().map(|(id, s)| (id.label.clone(), s.spectrum.clone())));
    let (mut cmin, mut cmax) = (f64::INFINITY, 0f64);
    for (label, spec) in &specs {
        let sc = scaling_constants(spec).unwrap();
        cmin = cmin.min(sc.c_n);
        cmax = cmax.max(sc.c_n);
        if !(lo <= sc.c_n && sc.c_n <= hi) {
            fails.push(format!("{label}: c_n = {}", sc.c_n));
        }
        let w = WDensity::new(spec).unwrap();
        for i in 0..=1000 {
            let x = -3.0 + 6.0 * i as f64 / 1000.0;
            let f = w.eval(x / sc.d_n) / sc.d_n;
            let x4 = x.powi(4);
            let (low, up) = (sc.c_n * (-x4).exp(), sc.c_n / (1.0 + x4 / 3.0));
            if f < low * (1.0 - 1e-12) || f > up * (1.0 + 1e-12) {
                fails.push(format!("{label}: sandwich broken at x={x}"));
                break;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ineq_fail = 0;
    for _ in 0..100_000 {
        let y: f64 = rng.gen_range(0.0..=50.0);
        let mid = (1.0 + y) * (-y).exp();
        if (-y * y / 2.0).exp() > mid * (1.0 + 1e-15) || mid > (1.0 + y * y / 6.0).recip() * (1.0 + 1e-15) {
            ineq_fail += 1;
        }
    }
    if ineq_fail > 0 {
        fails.push(format!("two-sided inequality failed at {ineq_fail} points"));
    }
    let pass = fails.is_empty();
    let detail = if pass {
        format!(
            "{} systems, c_n in [{cmin:.6}, {cmax:.6}] (exact bracket [{:.7}, {:.7}]); 1e5 inequality samples",
            specs.len(),
            exact_bracket.0,
            exact_bracket.1
        )
    } else {
        fails.join("; ")
    };
    report(4, pass, t.elapsed().as_secs_f64(), &detail);
    assert!(pass);
}

#[test]
fn criterion_05_critical_curie_weiss() {
    let t = Instant::now();
    let q = quartic_constants();
    let gamma_identity = (gamma(0.25) * gamma(0.75) - PI * 2f64.sqrt()).abs();
    let rows: Vec<LimitRow> = [100, 1_000, 10_000]
        .iter()
        .map(|&n| {
            let s = solve_family_member(LimitFamily::Cw, &Beta::zero(), Boundary::Free, n, EscalationPolicy::default())
                .unwrap();
            limit_row(&s).unwrap()
        })
        .collect();
    let k: Vec<f64> = rows.iter().map(|r| r.kurtosis).collect();
    let monotone = k.windows(2).all(|w| (w[1] - q.kurtosis).abs() < (w[0] - q.kurtosis).abs())
        && k.windows(2).all(|w| w[1] > w[0]);
    let last = rows.last().unwrap();
    let within = (last.kurtosis - 2.18845).abs() <= 0.01;
    let ks = last.kolmogorov <= 0.01;
    let gamma_ok = gamma_identity <= 1e-13;
    let pass = monotone && within && ks && gamma_ok;
    report(
        5,
        pass,
        t.elapsed().as_secs_f64(),
        &format!(
            "kurtosis {:.6} {:.6} {:.6} (monotone: {monotone}); |k - 2.18845| = {:.5} at N=1e4 (<= 0.01: {within}); \
             Kolmogorov {:.2e} (<= 0.01: {ks}); Gamma identity gap {gamma_identity:.1e}",
            k[0],
            k[1],
            k[2],
            (last.kurtosis - 2.18845).abs(),
            last.kolmogorov
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_chain_limit_trend() {
    let t = Instant::now();
    let q = quartic_constants();
    let rows: Vec<&LimitRow> = chain_family().iter().map(|(_, r)| r).collect();
    let alpha: Vec<f64> = rows.iter().map(|r| r.alpha_1_scaled).collect();
    let k: Vec<f64> = rows.iter().map(|r| r.kurtosis).collect();
    let alpha_up = alpha.windows(2).all(|w| w[1] > w[0]);
    let k_toward = k.windows(2).all(|w| (w[1] - q.kurtosis).abs() < (w[0] - q.kurtosis).abs());
    let within = (k[2] - 2.18845).abs() <= 0.05;
    let pass = alpha_up && k_toward && within;
    report(
        6,
        pass,
        t.elapsed().as_secs_f64(),
        &format!(
            "alpha_1 (-u4/4!)^(1/4) = {:.4} {:.4} {:.4}; kurtosis {:.5} {:.5} {:.5}; |k - 2.18845| = {:.4} at N=1601",
            alpha[0],
            alpha[1],
            alpha[2],
            k[0],
            k[1],
            k[2],
            (k[2] - 2.18845).abs()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_zero_free_arc() {
    let t = Instant::now();
    let edge = 2.0 * (-0.4f64).exp().asin();
    let theta_star = edge - 0.1;
    let fam = chain_family();
    let thetas: Vec<f64> = fam.iter().map(|(s, _)| s.zeros.smallest()).collect();
    let above = thetas.iter().all(|&x| x > 1.3);
    let converged = (thetas[2] - edge).abs() <= 0.05;
    let arc = stieltjes_arc_mass(&fam[2].0.zeros, -theta_star, theta_star, &DEFAULT_RADII);
    let (arc_ok, arc_detail) = match &arc {
        Ok(a) => (a.zero_free, format!("arc mass {:.2e} (radii {:?})", a.extrapolated, a.radii)),
        Err(e) => (false, e.to_string()),
    };
    let pass = above && converged && arc_ok;
    report(
        7,
        pass,
        t.elapsed().as_secs_f64(),
        &format!(
            "theta_1 = {:.6} {:.6} {:.6}, edge {edge:.6}; {arc_detail} on (-{theta_star:.6}, {theta_star:.6})",
            thetas[0], thetas[1], thetas[2]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_tilted_lee_yang() {
    let t = Instant::now();
    let l = build_lattice(2, 1, Boundary::Free).unwrap();
    let spec = transfer_spectrum_2d(1, Boundary::Free, &Beta::parse("0.3").unwrap(), 106).unwrap();
    assert_eq!(l.site_count(), spec.site_count());
    let mut parts = Vec::new();
    let mut pass = true;
    for b in [0.05, 0.1] {
        match tilted_ly_check(&spec, b, GRID_POINTS_PER_SITE * 9, DEFAULT_THETA_TOL) {
            Ok(rep) => {
                let roots = match &rep.status {
                    LyStatus::Certified(z) => z.count(),
                    LyStatus::PreAsymptotic => 0,
                };
                pass &= rep.gamma_hat >= 0.0 && roots == 9;
                parts.push(format!("b={b}: gamma_hat={:.6}, {roots} circle roots", rep.gamma_hat));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("b={b}: {e}"));
            }
        }
    }
    report(8, pass, t.elapsed().as_secs_f64(), &parts.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_herglotz_consistency() {
    let t = Instant::now();
    let mut worst_cross = 0f64;
    let mut worst_odd = 0f64;
    let mut origin_exact = true;
    let mut systems: Vec<(MagnetizationSpectrum, LeeYangSpectrum)> = vec![
        (single_spin(), find_angles(&single_spin(), 64, DEFAULT_THETA_TOL).unwrap()),
        (chain3(), find_angles(&chain3(), 192, DEFAULT_THETA_TOL).unwrap()),
    ];
    systems.extend(solved_systems().iter().map(|(_, s)| (s.spectrum.clone(), s.zeros.clone())));
    for (spec, zeros) in &systems {
        for h in [0.1f64, 0.5, 1.0, 2.0] {
            let a = m_from_zeros(zeros, Complex64::new((-2.0 * h).exp(), 0.0)).unwrap().m;
            let b = m_direct(spec, h).unwrap().m;
            worst_cross = worst_cross.max((a - b).norm());
        }
        origin_exact &= m_from_zeros(zeros, Complex64::new(0.0, 0.0)).unwrap().m == Complex64::new(1.0, 0.0);
        for x in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let inside = m_from_zeros(zeros, Complex64::new(x, 0.0)).unwrap().m;
            let outside = m_from_zeros(zeros, Complex64::new(1.0 / x, 0.0)).unwrap().m;
            worst_odd = worst_odd.max((inside + outside).norm());
        }
    }
    let pass = worst_cross <= 1e-10 && worst_odd <= 1e-10 && origin_exact;
    report(
        9,
        pass,
        t.elapsed().as_secs_f64(),
        &format!(
            "{} systems: max |m_zeros - m_direct| = {worst_cross:.1e}, max |m(1/z) + m(z)| = {worst_odd:.1e}, m(0) = 1 exactly: {origin_exact}",
            systems.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_monte_carlo() {
    let t = Instant::now();
    let lattice = build_lattice(2, 1, Boundary::Free).unwrap();
    let spec = enumerate_spectrum(&lattice, &Beta::parse("0.3").unwrap(), 106).unwrap();
    let gamma_n = 1.0 / (2.0 * spec.moment(2));
    let tilted = tilt_spectrum(&spec, gamma_n).unwrap();
    let cases = [(0.0, spec.moment(2), spec.moment(4)), (gamma_n, tilted.moment(2), tilted.moment(4))];
    let mut parts = Vec::new();
    let mut pass = true;
    for (g, m2, m4) in cases {
        let mut hits = 0;
        for rep in 0..100u64 {
            let mut cfg = McConfig::new(lattice.clone(), 0.3, GammaMode::Explicit { gamma: g });
            cfg.sweeps = 20_000;
            cfg.burn_in = 1_000;
            cfg.chains = 2;
            cfg.master_seed = 1000 + rep;
            let est = mc_run(&cfg).unwrap();
            let (e2, e4) = (est.moment(2), est.moment(4));
            if (e2.mean - m2).abs() <= 3.0 * e2.std_error && (e4.mean - m4).abs() <= 3.0 * e4.std_error {
                hits += 1;
            }
        }
        pass &= hits >= 95;
        parts.push(format!("gamma={g:.6}: {hits}/100 within 3 SE"));
    }
    report(10, pass, t.elapsed().as_secs_f64(), &parts.join("; "));
    assert!(pass);
}
