//! The average magnetization density `m(z)`, computed from zeros or from the spectrum,
//! and recovery of the zero measure by Stieltjes inversion.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use crate::spectrum::MagnetizationSpectrum;
use crate::zeros::LeeYangSpectrum;

pub const POLE_TOL: f64 = 1e-12;
pub const ZERO_FREE_TOL: f64 = 1e-6;
pub const DEFAULT_RADII: [f64; 3] = [0.99, 0.999, 0.9999];
pub const DEFAULT_PANELS: usize = 128;
const PANEL_ORDER: usize = 16;
/// Target absolute accuracy of each quadrature estimate.
const QUADRATURE_CHECK: f64 = 1e-10;
const MAX_BISECTIONS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HerglotzSource {
    Zeros,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerglotzEvaluation {
    pub z: Complex64,
    pub m: Complex64,
    pub source: HerglotzSource,
}

/// `m(z) = (1/N) sum_j (e^{i theta_j} + z) / (e^{i theta_j} - z)`.
pub fn m_from_zeros(angles: &LeeYangSpectrum, z: Complex64) -> Result<HerglotzEvaluation> {
    if !z.is_finite() {
        return Err(Error::invalid("z must be finite"));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for a in angles.angles() {
        let e = Complex64::from_polar(1.0, a.theta);
        let gap = (e - z).norm();
        if gap < POLE_TOL {
            return Err(Error::PoleProximity {
                theta: a.theta,
                distance: gap,
            });
        }
        sum += (e + z) / (e - z) * a.multiplicity as f64;
    }
    if (z.norm() - 1.0).abs() < POLE_TOL {
        return Err(Error::invalid("m(z) is not evaluated on |z| = 1"));
    }
    Ok(HerglotzEvaluation {
        z,
        m: sum / angles.count() as f64,
        source: HerglotzSource::Zeros,
    })
}

/// `<Y>_h / N` from the field-tilted spectrum, reported at `z = e^{-2h}`.
pub fn m_direct(spec: &MagnetizationSpectrum, h: f64) -> Result<HerglotzEvaluation> {
    if !h.is_finite() {
        return Err(Error::invalid("h must be finite"));
    }
    let n = spec.site_count();
    let p = spec.precision_bits() + 32;
    let hf = Float::with_val(p, h);
    let shift = h.abs() * n as f64;
    let mut num = Float::new(p);
    let mut den = Float::new(p);
    for (k, w) in spec.weights().iter().enumerate() {
        let m = spec.magnetization(k);
        let t = (Float::with_val(p, &hf * m) - shift).exp() * w;
        num += Float::with_val(p, &t * m);
        den += t;
    }
    let m = (num / den / n as u32).to_f64();
    Ok(HerglotzEvaluation {
        z: Complex64::new((-2.0 * h).exp(), 0.0),
        m: Complex64::new(m, 0.0),
        source: HerglotzSource::Direct,
    })
}

/// Stieltjes-inversion estimate of the zero measure of an arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcMassEstimate {
    pub a: f64,
    pub b: f64,
    pub radii: Vec<f64>,
    /// `(1/2pi) int_a^b Re m(r e^{i theta}) d theta` for each radius.
    pub estimates: Vec<f64>,
    /// Polynomial extrapolation in `1 - r` to `r = 1`.
    pub extrapolated: f64,
    /// Difference between the full extrapolation and the one omitting the smallest radius.
    pub extrapolation_error: f64,
    pub nodes: usize,
    pub zero_free: bool,
}

fn check_arc(a: f64, b: f64, radii: &[f64]) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && b > a && b - a < TAU) {
        return Err(Error::invalid(format!("arc ({a}, {b}) must satisfy 0 < b - a < 2pi")));
    }
    if radii.is_empty() {
        return Err(Error::invalid("need at least one radius"));
    }
    if radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radii must increase strictly within (0, 1)"));
    }
    Ok(())
}

/// Neville's scheme evaluated at 0.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i] * p[i + 1] - xs[i + m] * p[i]) / (xs[i] - xs[i + m]);
        }
    }
    p[0]
}

/// `Re m(r e^{i theta})`: the Poisson kernel averaged over the zeros.
fn poisson_average(angles: &LeeYangSpectrum, r: f64, theta: f64) -> f64 {
    let one_minus = (1.0 - r) * (1.0 + r);
    let total: f64 = angles
        .angles()
        .iter()
        .map(|z| {
            // 1 - 2 r cos(d) + r^2 = (1 - r)^2 + 4 r sin^2(d / 2)
            let s = ((theta - z.theta) * 0.5).sin();
            z.multiplicity as f64 * one_minus / ((1.0 - r) * (1.0 - r) + 4.0 * r * s * s)
        })
        .sum();
    total / angles.count() as f64
}

fn gauss_panel(lo: f64, hi: f64, x: &[f64], w: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    h * x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>()
}

/// Bisects a panel until the rule and its two halves agree to `tol`; returns `(integral, nodes)`.
#[allow(clippy::too_many_arguments)]
fn adaptive_panel(
    lo: f64,
    hi: f64,
    whole: f64,
    tol: f64,
    level: u32,
    x: &[f64],
    w: &[f64],
    f: &dyn Fn(f64) -> f64,
) -> Option<(f64, usize)> {
    let mid = 0.5 * (lo + hi);
    let left = gauss_panel(lo, mid, x, w, f);
    let right = gauss_panel(mid, hi, x, w, f);
    let nodes = 2 * x.len();
    if (left + right - whole).abs() <= tol {
        return Some((left + right, nodes));
    }
    if level == MAX_BISECTIONS {
        return None;
    }
    let (l, nl) = adaptive_panel(lo, mid, left, 0.5 * tol, level + 1, x, w, f)?;
    let (r, nr) = adaptive_panel(mid, hi, right, 0.5 * tol, level + 1, x, w, f)?;
    Some((l + r, nodes + nl + nr))
}

/// Arc mass by adaptive Gauss-Legendre quadrature of `Re m` on circles of radius `r < 1`,
/// extrapolated to `r = 1`. The rule starts from `nodes` evenly spread nodes (a multiple of 16)
/// and bisects panels until the estimate is stable to 1e-10.
pub fn stieltjes_arc_mass_with(
    angles: &LeeYangSpectrum,
    a: f64,
    b: f64,
    radii: &[f64],
    nodes: usize,
) -> Result<ArcMassEstimate> {
    check_arc(a, b, radii)?;
    if nodes == 0 || nodes % PANEL_ORDER != 0 {
        return Err(Error::invalid(format!("nodes must be a positive multiple of {PANEL_ORDER}")));
    }
    let panels = nodes / PANEL_ORDER;
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let h = (b - a) / panels as f64;
    let tol = QUADRATURE_CHECK * TAU / panels as f64;
    let mut estimates = Vec::with_capacity(radii.len());
    let mut used = 0;
    for &r in radii {
        let f = |t: f64| poisson_average(angles, r, t);
        let parts: Option<Vec<(f64, usize)>> = (0..panels)
            .into_par_iter()
            .map(|i| {
                let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
                let whole = gauss_panel(lo, hi, &x, &w, &f);
                adaptive_panel(lo, hi, whole, tol, 0, &x, &w, &f).map(|(v, n)| (v, n + PANEL_ORDER))
            })
            .collect();
        let parts = parts.ok_or_else(|| Error::ArcQuadrature {
            radius: r,
            detail: format!("no convergence after {MAX_BISECTIONS} bisections of a panel"),
        })?;
        let total: f64 = parts.iter().map(|p| p.0).sum();
        used = used.max(parts.iter().map(|p| p.1).sum::<usize>());
        estimates.push((total / TAU).max(0.0));
    }
    Ok(finish(a, b, radii, estimates, used))
}

pub fn stieltjes_arc_mass(angles: &LeeYangSpectrum, a: f64, b: f64, radii: &[f64]) -> Result<ArcMassEstimate> {
    stieltjes_arc_mass_with(angles, a, b, radii, DEFAULT_PANELS * PANEL_ORDER)
}

/// The same estimate with each zero's Poisson integral done in closed form.
pub fn poisson_arc_mass(angles: &LeeYangSpectrum, a: f64, b: f64, radii: &[f64]) -> Result<ArcMassEstimate> {
    check_arc(a, b, radii)?;
    let estimates = radii
        .iter()
        .map(|&r| {
            let k = (1.0 + r) / (1.0 - r);
            // continuous antiderivative of the kernel in theta, divided by 2pi
            let anti = |t: f64, phi: f64| {
                let u = 0.5 * (t - phi);
                let turns = (u / PI + 0.5).floor();
                ((k * (u - turns * PI).tan()).atan() + turns * PI) / PI
            };
            let total: f64 = angles
                .angles()
                .iter()
                .map(|z| z.multiplicity as f64 * (anti(b, z.theta) - anti(a, z.theta)))
                .sum();
            (total / angles.count() as f64).max(0.0)
        })
        .collect();
    Ok(finish(a, b, radii, estimates, 0))
}

fn finish(a: f64, b: f64, radii: &[f64], estimates: Vec<f64>, nodes: usize) -> ArcMassEstimate {
    let eps: Vec<f64> = radii.iter().map(|r| 1.0 - r).collect();
    let extrapolated = neville_at_zero(&eps, &estimates);
    let extrapolation_error = if eps.len() > 1 {
        (extrapolated - neville_at_zero(&eps[1..], &estimates[1..])).abs()
    } else {
        f64::INFINITY
    };
    ArcMassEstimate {
        a,
        b,
        radii: radii.to_vec(),
        estimates,
        extrapolated,
        extrapolation_error,
        nodes,
        zero_free: extrapolated.abs() < ZERO_FREE_TOL,
    }
}
