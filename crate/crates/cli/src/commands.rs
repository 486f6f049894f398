use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use leeyang::analysis::{
    cumulant_set_from_zeros, cumulants_from_spectrum, density_envelope, normalized_kurtosis, power_sum_profile,
    scaling_constants, tilt_spectrum, WDensity,
};
use leeyang::herglotz::{m_direct, m_from_zeros, stieltjes_arc_mass, DEFAULT_RADII};
use leeyang::io::{write_atomic, write_spectrum, write_zeros};
use leeyang::lattice::Boundary;
use leeyang::montecarlo::{mc_histogram, mc_run, GammaMode, McConfig};
use leeyang::pipeline::{chain_precision_hint, limit_row, solve_family_member, LimitFamily, LimitRow};
use leeyang::zeros::{empirical_zero_measure, factorization_residual, mgf_zeros, MgfZeroList};
use leeyang::Beta;

use crate::args::{BoundaryArg, Command, EngineChoice, FamilyArg, GlobalArgs, SourceArgs, SystemArgs, ZeroArgs};
use crate::system::{Context, System};
use crate::{usage, Outcome};

/// Relative truncation target for replica depths chosen automatically.
const DEPTH_TOL: f64 = 1e-10;

pub fn dispatch(global: &GlobalArgs, command: &Command) -> anyhow::Result<Outcome> {
    let mut ctx = Context::new(global);
    let outputs = match command {
        Command::Spectrum { system } => spectrum(&mut ctx, system)?,
        Command::Zeros { source, zeros, depth } => zeros_cmd(&mut ctx, source, zeros, *depth)?,
        Command::Cumulants { source, zeros, u6 } => cumulants(&mut ctx, source, zeros, *u6)?,
        Command::Tilt { source, gamma } => tilt(&mut ctx, source, gamma)?,
        Command::Density { source, points, xmax } => density(&mut ctx, source, *points, *xmax)?,
        Command::Limitcheck { family, beta, sizes, boundary } => limitcheck(&mut ctx, *family, beta, sizes, *boundary)?,
        Command::Mc { .. } => mc(&mut ctx, command)?,
        Command::Herglotz { source, zeros, z, h, arc, radii } => {
            herglotz(&mut ctx, source, zeros, z, h, arc, radii)?
        }
        Command::CompareBc { d, n, beta, zeros } => compare_bc(&mut ctx, *d, *n, beta, zeros)?,
    };
    Ok(Outcome { inputs: ctx.inputs, outputs })
}

fn out_path(ctx: &Context, name: &str) -> PathBuf {
    ctx.global.out.join(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_decimal(name: &str, s: &str) -> anyhow::Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| usage(format!("--{name} '{s}' is not a finite decimal")))
}

fn spectrum(ctx: &mut Context, args: &SystemArgs) -> anyhow::Result<Vec<PathBuf>> {
    let sys = System::from_args(args)?;
    let spec = ctx.spectrum(&sys, ctx.global.precision_bits)?;
    let path = out_path(ctx, "spectrum.json");
    write_spectrum(&spec, &path)?;
    println!(
        "N = {}  engine = {}  beta = {}  precision = {} bits  ln Z = {:.12}",
        spec.site_count(),
        spec.engine(),
        spec.beta(),
        spec.precision_bits(),
        spec.ln_partition().to_f64()
    );
    println!("cache key {}", spec.cache_key());
    Ok(vec![path, ctx.cache_path(&spec)])
}

/// Sector of the closed unit disc where the MGF factorization is checked.
fn factorization_grid() -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=4 {
        for j in 0..=6 {
            g.push(Complex64::from_polar(i as f64 / 4.0, j as f64 * PI / 16.0));
        }
    }
    g
}

fn zeros_cmd(ctx: &mut Context, source: &SourceArgs, za: &ZeroArgs, depth: Option<usize>) -> anyhow::Result<Vec<PathBuf>> {
    let solved = ctx.solve(source, za)?;
    let depth = depth.unwrap_or_else(|| MgfZeroList::depth_for(&solved.zeros, 4, DEPTH_TOL));
    let list = mgf_zeros(&solved.zeros, depth);
    let fact = factorization_residual(&solved.spectrum, &list, &factorization_grid())?;
    let zpath = out_path(ctx, "zeros.json");
    write_zeros(&solved.zeros, &zpath)?;
    let report = json!({
        "site_count": solved.spectrum.site_count(),
        "precision_bits": solved.precision_bits,
        "roots": solved.zeros.count(),
        "distinct_angles": solved.zeros.angles().len(),
        "multiplicities": solved.zeros.angles().iter().map(|a| (a.theta, a.multiplicity)).collect::<Vec<_>>(),
        "theta_1": solved.zeros.smallest(),
        "circle_residual": solved.zeros.residual(),
        "depth": depth,
        "factorization_residual": fact.residual,
        "factorization_tail_bound": fact.tail_bound,
    });
    let rpath = out_path(ctx, "zeros_report.json");
    write_json(&rpath, &report)?;
    println!(
        "{} roots ({} distinct) at {} bits; theta_1 = {:.12}; circle residual {:.2e}",
        solved.zeros.count(),
        solved.zeros.angles().len(),
        solved.precision_bits,
        solved.zeros.smallest(),
        solved.zeros.residual()
    );
    for a in solved.zeros.angles().iter().filter(|a| a.multiplicity > 1) {
        println!("  theta = {:.12} has multiplicity {}", a.theta, a.multiplicity);
    }
    println!(
        "factorization residual {:.2e} on |z| <= 1 (tail bound {:.2e}, depth K = {depth})",
        fact.residual, fact.tail_bound
    );
    Ok(vec![zpath, rpath])
}

fn cumulants(ctx: &mut Context, source: &SourceArgs, za: &ZeroArgs, u6: bool) -> anyhow::Result<Vec<PathBuf>> {
    let solved = ctx.solve(source, za)?;
    let orders: &[u32] = if u6 { &[2, 4, 6] } else { &[2, 4] };
    let exact = cumulants_from_spectrum(&solved.spectrum, orders)?;
    let mut depth = MgfZeroList::depth_for(&solved.zeros, 4, DEPTH_TOL);
    if u6 {
        depth = depth.max(MgfZeroList::depth_for(&solved.zeros, 6, DEPTH_TOL));
    }
    let list = mgf_zeros(&solved.zeros, depth);
    let from_zeros = cumulant_set_from_zeros(&list, u6)?;
    let b = list.complete_power_sum(2).map(|s| exact.u2 - 2.0 * s);
    let scaling = if exact.u4 < 0.0 { Some(scaling_constants(&solved.spectrum)?) } else { None };
    let profile = if exact.u4 < 0.0 { Some(power_sum_profile(&list, exact.u4, &[4, 6, 8])?) } else { None };
    let report = json!({
        "site_count": solved.spectrum.site_count(),
        "precision_bits": solved.precision_bits,
        "spectrum": exact,
        "zeros": from_zeros,
        "depth": depth,
        "b": b,
        "scaling": scaling,
        "power_sum_profile": profile,
    });
    let path = out_path(ctx, "cumulants.json");
    write_json(&path, &report)?;
    println!("u2 = {:.15e}  u4 = {:.15e}", exact.u2, exact.u4);
    println!(
        "from zeros (K = {depth}): u4 = {:.15e} +- {:.1e}",
        from_zeros.u4, from_zeros.truncation_bound
    );
    if let Some(u6) = exact.u6 {
        println!("u6 = {u6:.15e}  (zeros: {:.15e})", from_zeros.u6.unwrap_or(f64::NAN));
    }
    if let Some(b) = b {
        println!("b = {b:.3e}");
    }
    if let Some(s) = scaling {
        println!("gamma_n = {:.12}  lambda_n = {:.12}  c_n = {:.10}  d_n = {:.10}", s.gamma_n, s.lambda_n, s.c_n, s.d_n);
    }
    Ok(vec![path])
}

fn tilt(ctx: &mut Context, source: &SourceArgs, gamma: &str) -> anyhow::Result<Vec<PathBuf>> {
    let spec = ctx.source_spectrum(source)?;
    let g = if gamma == "auto" { 1.0 / (2.0 * spec.moment(2)) } else { parse_decimal("gamma", gamma)? };
    let tilted = tilt_spectrum(&spec, g)?;
    #[derive(Serialize)]
    struct Row {
        m: i64,
        probability: f64,
    }
    let path = out_path(ctx, "tilt.csv");
    write_csv(&path, tilted.probabilities().into_iter().map(|(m, probability)| Row { m, probability }))?;
    println!(
        "gamma = {g:.15e}  E Y^2 = {:.12e}  E Y^4 = {:.12e}  kurtosis = {:.10}",
        tilted.moment(2),
        tilted.moment(4),
        normalized_kurtosis(&tilted)?
    );
    Ok(vec![path])
}

fn density(ctx: &mut Context, source: &SourceArgs, points: usize, xmax: f64) -> anyhow::Result<Vec<PathBuf>> {
    if points < 2 || !(xmax > 0.0 && xmax.is_finite()) {
        return Err(usage("need --points >= 2 and a positive --xmax"));
    }
    let spec = ctx.source_spectrum(source)?;
    let sc = scaling_constants(&spec)?;
    let w = WDensity::new(&spec)?;
    #[derive(Serialize)]
    struct Row {
        x: f64,
        density: f64,
        lower: f64,
        upper: f64,
    }
    let mut violations = 0;
    let rows: Vec<Row> = (0..points)
        .map(|i| {
            let x = -xmax + 2.0 * xmax * i as f64 / (points - 1) as f64;
            let density = w.eval(x / sc.d_n) / sc.d_n;
            let (lower, upper) = density_envelope(sc.c_n, x);
            if density < lower * (1.0 - 1e-10) || density > upper * (1.0 + 1e-10) {
                violations += 1;
            }
            Row { x, density, lower, upper }
        })
        .collect();
    let path = out_path(ctx, "density.csv");
    write_csv(&path, rows)?;
    println!("c_n = {:.10}  d_n = {:.10}  envelope violations: {violations} of {points}", sc.c_n, sc.d_n);
    Ok(vec![path])
}

fn limitcheck(
    ctx: &mut Context,
    family: FamilyArg,
    beta: &str,
    sizes: &[usize],
    boundary: BoundaryArg,
) -> anyhow::Result<Vec<PathBuf>> {
    let beta = Beta::parse(beta)?;
    let family = match family {
        FamilyArg::Cw if !beta.is_zero() => return Err(usage("the cw family has no coupling; beta must be 0")),
        FamilyArg::Cw => LimitFamily::Cw,
        FamilyArg::Chain => LimitFamily::Chain,
    };
    let boundary: Boundary = boundary.into();
    let mut rows: Vec<LimitRow> = Vec::new();
    for &n in sizes {
        let start = match family {
            LimitFamily::Cw => ctx.global.precision_bits,
            LimitFamily::Chain => ctx.global.precision_bits.max(chain_precision_hint(n, beta.to_f64())),
        };
        let solved = solve_family_member(family, &beta, boundary, n, ctx.policy(start))
            .with_context(|| format!("size {n}"))?;
        ctx.inputs.push(solved.spectrum.cache_key());
        let row = limit_row(&solved)?;
        println!(
            "N = {:>6}  bits = {:>5}  kurtosis = {:.8}  KS = {:.3e}  theta_1 = {:.8}  alpha_1 (-u4/4!)^1/4 = {:.6}",
            row.size, row.precision_bits, row.kurtosis, row.kolmogorov, row.theta_1, row.alpha_1_scaled
        );
        rows.push(row);
    }
    let path = out_path(ctx, "limitcheck.csv");
    write_csv(&path, rows)?;
    Ok(vec![path])
}

fn mc(ctx: &mut Context, command: &Command) -> anyhow::Result<Vec<PathBuf>> {
    let Command::Mc { system, gamma, gamma_exact, calibrate, sweeps, burn_in, chains, thinning, batches, bins } = command
    else {
        unreachable!("dispatched on Mc")
    };
    let sys = System::from_args(system)?;
    let lattice = sys.lattice().cloned().ok_or_else(|| usage("mc needs a lattice (d >= 1)"))?;
    let mode = match (gamma, gamma_exact, calibrate) {
        (Some(g), _, _) => GammaMode::Explicit { gamma: parse_decimal("gamma", g)? },
        (None, true, _) => {
            let spec = ctx.spectrum(&sys, ctx.global.precision_bits)?;
            GammaMode::FromSecondMoment { second_moment: spec.moment(2) }
        }
        (None, false, Some(s)) => GammaMode::Calibrate { sweeps: *s },
        (None, false, None) => GammaMode::Explicit { gamma: 0.0 },
    };
    let mut cfg = McConfig::new(lattice, sys.beta().to_f64(), mode);
    cfg.sweeps = *sweeps;
    cfg.burn_in = *burn_in;
    cfg.chains = *chains;
    cfg.thinning = *thinning;
    cfg.batches = *batches;
    cfg.master_seed = ctx.global.seed;
    let est = mc_run(&cfg)?;
    let hist = mc_histogram(&est, *bins)?;
    let jpath = out_path(ctx, "mc.json");
    write_json(&jpath, &json!({ "config": cfg, "estimates": est }))?;
    #[derive(Serialize)]
    struct Bin {
        lo: f64,
        hi: f64,
        mass: f64,
    }
    let hpath = out_path(ctx, "mc_histogram.csv");
    write_csv(
        &hpath,
        hist.edges.windows(2).zip(&hist.masses).map(|(e, &mass)| Bin { lo: e[0], hi: e[1], mass }),
    )?;
    println!("gamma = {:.12e} ({})  acceptance = {:.4}", est.gamma, est.gamma_source, est.acceptance_rate);
    for k in 1..=4 {
        let e = est.moment(k);
        println!("E Y^{k} = {:.8e} +- {:.2e}", e.mean, e.std_error);
    }
    Ok(vec![jpath, hpath])
}

#[derive(Serialize)]
struct HerglotzRow {
    source: &'static str,
    z_re: f64,
    z_im: f64,
    m_re: f64,
    m_im: f64,
}

#[allow(clippy::too_many_arguments)]
fn herglotz(
    ctx: &mut Context,
    source: &SourceArgs,
    za: &ZeroArgs,
    points: &[(f64, f64)],
    fields: &[f64],
    arc: &[f64],
    radii: &[f64],
) -> anyhow::Result<Vec<PathBuf>> {
    let solved = ctx.solve(source, za)?;
    let mut rows = Vec::new();
    for &(re, im) in points {
        let ev = m_from_zeros(&solved.zeros, Complex64::new(re, im))?;
        println!("m({re} + {im}i) = {:.15} + {:.15}i", ev.m.re, ev.m.im);
        rows.push(HerglotzRow { source: "zeros", z_re: re, z_im: im, m_re: ev.m.re, m_im: ev.m.im });
    }
    for &h in fields {
        let z = (-2.0 * h).exp();
        let a = m_from_zeros(&solved.zeros, Complex64::new(z, 0.0))?;
        let b = m_direct(&solved.spectrum, h)?;
        println!("h = {h}: m(e^-2h) zeros {:.15}  direct {:.15}  gap {:.2e}", a.m.re, b.m.re, (a.m - b.m).norm());
        rows.push(HerglotzRow { source: "zeros", z_re: z, z_im: 0.0, m_re: a.m.re, m_im: a.m.im });
        rows.push(HerglotzRow { source: "direct", z_re: z, z_im: 0.0, m_re: b.m.re, m_im: b.m.im });
    }
    let mut outputs = Vec::new();
    if !rows.is_empty() {
        let path = out_path(ctx, "herglotz.csv");
        write_csv(&path, rows)?;
        outputs.push(path);
    }
    if !arc.is_empty() {
        let &[a, b] = arc else {
            return Err(usage("--arc takes exactly two angles a,b"));
        };
        let radii = if radii.is_empty() { DEFAULT_RADII.to_vec() } else { radii.to_vec() };
        let est = stieltjes_arc_mass(&solved.zeros, a, b, &radii)?;
        let empirical = empirical_zero_measure(&solved.zeros).arc_mass(a, b);
        println!(
            "arc ({a}, {b}): mass {:.3e} (extrapolation error {:.1e}); empirical {empirical:.6}; zero free: {}",
            est.extrapolated, est.extrapolation_error, est.zero_free
        );
        let path = out_path(ctx, "herglotz_arc.json");
        write_json(&path, &json!({ "estimate": est, "empirical": empirical }))?;
        outputs.push(path);
    }
    if outputs.is_empty() {
        return Err(usage("nothing to evaluate: pass --z, --h or --arc"));
    }
    Ok(outputs)
}

fn compare_bc(ctx: &mut Context, d: u32, n: u32, beta: &str, za: &ZeroArgs) -> anyhow::Result<Vec<PathBuf>> {
    let mut columns = Vec::new();
    for boundary in [BoundaryArg::Free, BoundaryArg::Periodic] {
        let args = SystemArgs {
            d,
            n: Some(n),
            sites: None,
            beta: beta.to_owned(),
            boundary,
            engine: EngineChoice::Auto,
        };
        let solved = ctx.solve_system(&System::from_args(&args)?, za)?;
        let u4 = cumulants_from_spectrum(&solved.spectrum, &[4])?.u4;
        let scale = (-u4).powf(0.25);
        let list = mgf_zeros(&solved.zeros, 0);
        columns.push(list.alphas().iter().map(|a| a * scale).collect::<Vec<f64>>());
    }
    #[derive(Serialize)]
    struct Row {
        j: usize,
        free: f64,
        periodic: f64,
    }
    let rows: Vec<Row> = columns[0]
        .iter()
        .zip(&columns[1])
        .enumerate()
        .map(|(j, (&free, &periodic))| Row { j: j + 1, free, periodic })
        .collect();
    for r in rows.iter().take(5) {
        println!("j = {:>3}  free {:.8}  periodic {:.8}", r.j, r.free, r.periodic);
    }
    let path = out_path(ctx, "compare_bc.csv");
    write_csv(&path, rows)?;
    Ok(vec![path])
}
