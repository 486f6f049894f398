//! Lee-Yang zero angles, their replication to MGF zeros, and the product reconstruction.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Assign, Float};
use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::hp::log2_abs;
use crate::spectrum::MagnetizationSpectrum;

pub const DEFAULT_THETA_TOL: f64 = 1e-12;
pub const GRID_POINTS_PER_SITE: usize = 64;
const REFINE_SPLIT: usize = 16;
const REFINE_PASSES: usize = 8;
const EXHAUSTED_RUN: usize = 8;
const CROWD_REACH: f64 = 4.0;

/// One Lee-Yang angle with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroAngle {
    pub theta: f64,
    pub multiplicity: u32,
}

/// All `N` zeros of `Z(z)` on the unit circle, as angles in `(0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeeYangSpectrum {
    angles: Vec<ZeroAngle>,
    residual: f64,
    source: String,
}

impl LeeYangSpectrum {
    pub fn new(mut angles: Vec<ZeroAngle>, residual: f64, source: impl Into<String>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("a zero set needs at least one angle"));
        }
        for a in &angles {
            if !(a.theta > 0.0 && a.theta < TAU) || a.multiplicity == 0 {
                return Err(Error::invalid(format!(
                    "angle {} (multiplicity {}) outside (0, 2pi)",
                    a.theta, a.multiplicity
                )));
            }
        }
        angles.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        Ok(LeeYangSpectrum {
            angles,
            residual,
            source: source.into(),
        })
    }

    pub fn angles(&self) -> &[ZeroAngle] {
        &self.angles
    }

    /// Sorted angles with each repeated according to its multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.angles
            .iter()
            .flat_map(|a| std::iter::repeat(a.theta).take(a.multiplicity as usize))
            .collect()
    }

    /// Number of zeros counted with multiplicity.
    pub fn count(&self) -> usize {
        self.angles.iter().map(|a| a.multiplicity as usize).sum()
    }

    pub fn smallest(&self) -> f64 {
        self.angles[0].theta
    }

    /// Largest `|H(theta_j)| / sum A_m` over the located zeros.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Value of the circle function with its certification status.
#[derive(Debug, Clone)]
pub struct CircleValue {
    relative: Float,
    noise: Float,
    scale: Float,
}

impl CircleValue {
    /// `H(theta) / sum A_m`.
    pub fn relative(&self) -> &Float {
        &self.relative
    }

    /// `H(theta)` itself.
    pub fn value(&self) -> Float {
        Float::with_val(self.relative.prec(), &self.relative * &self.scale)
    }

    /// Whether the sign of the value exceeds the accumulated rounding noise.
    pub fn is_certified(&self) -> bool {
        self.relative.cmp_abs(&self.noise) == Some(Ordering::Greater)
    }
}

/// Clenshaw evaluation of `H(theta) = sum_m A_m cos(m theta / 2)` grouped by `|m|`.
struct CircleEvaluator {
    coeffs: Vec<Float>,
    odd: bool,
    prec: u32,
    noise: Float,
    total: Float,
}

impl CircleEvaluator {
    fn new(spec: &MagnetizationSpectrum) -> Self {
        let n = spec.site_count();
        let prec = spec.precision_bits() + 16;
        let w = spec.weights();
        let total = spec.weight_sum();
        // coefficient of cos((r + 2i) phi), r = n mod 2
        let steps = n / 2;
        let coeffs: Vec<Float> = (0..=steps)
            .map(|i| {
                let k = n - (n % 2 + 2 * i);
                let k = k / 2;
                let k_plus = n - k;
                let c = Float::with_val(prec, &w[k_plus] / &total);
                if k_plus == k {
                    c
                } else {
                    c * 2u32
                }
            })
            .collect();
        let noise = Float::with_val(prec, (steps + 1) as f64) >> (spec.precision_bits() as i32 - 16);
        CircleEvaluator {
            coeffs,
            odd: n % 2 == 1,
            prec,
            noise,
            total,
        }
    }

    fn eval(&self, theta: f64) -> Float {
        let p = self.prec;
        let t = Float::with_val(p, theta);
        let alpha = if self.odd { Float::with_val(p, &t / 2u32) } else { Float::new(p) };
        let two_cos = Float::with_val(p, t.cos_ref()) * 2u32;
        let mut b1 = Float::new(p);
        let mut b2 = Float::new(p);
        let mut tmp = Float::new(p);
        for d in self.coeffs.iter().rev() {
            // b0 = d + 2cos(theta) b1 - b2
            tmp.assign(&two_cos * &b1);
            tmp -= &b2;
            tmp += d;
            std::mem::swap(&mut b2, &mut b1);
            std::mem::swap(&mut b1, &mut tmp);
        }
        // b1 now holds b_0 and b2 holds b_1
        let cos_a = Float::with_val(p, alpha.cos_ref());
        let cos_am = Float::with_val(p, Float::with_val(p, &alpha - &t).cos_ref());
        Float::with_val(p, &b1 * &cos_a) - Float::with_val(p, &b2 * &cos_am)
    }

    fn certified(&self, v: &Float) -> bool {
        v.cmp_abs(&self.noise) == Some(Ordering::Greater)
    }

    /// Multiplicity of the zero at `pi` and the sign of `H` just below `pi`.
    fn at_pi(&self, spec: &MagnetizationSpectrum) -> (usize, i32) {
        let n = spec.site_count();
        let p = self.prec;
        for k in 0..=n {
            let mut acc = Float::new(p);
            let mut mag = Float::new(p);
            for (idx, w) in spec.weights().iter().enumerate() {
                let m = spec.magnetization(idx);
                let phase = (m + k as i64).rem_euclid(4);
                if phase % 2 == 1 {
                    continue;
                }
                let term = Float::with_val(p, Float::with_val(p, m) / 2u32).pow(k as u32) * w;
                mag += Float::with_val(p, term.abs_ref());
                if phase == 0 {
                    acc += &term;
                } else {
                    acc -= &term;
                }
            }
            if acc.is_zero() {
                continue;
            }
            let floor = Float::with_val(p, &mag * &self.noise);
            if acc.cmp_abs(&floor) == Some(Ordering::Greater) {
                let sign = if acc.is_sign_negative() { -1 } else { 1 };
                let below = if k % 2 == 1 { -sign } else { sign };
                return (k, below);
            }
        }
        (n, 1)
    }
}

pub fn circle_function(spec: &MagnetizationSpectrum, theta: f64) -> Result<CircleValue> {
    if !(0.0..=TAU).contains(&theta) {
        return Err(Error::invalid(format!("theta {theta} outside [0, 2pi]")));
    }
    let ev = CircleEvaluator::new(spec);
    let relative = ev.eval(theta);
    let scale = Float::with_val(ev.prec, spec.log_scale().exp_ref()) * &ev.total;
    Ok(CircleValue {
        relative,
        noise: ev.noise,
        scale,
    })
}

#[derive(Clone)]
struct Sample {
    theta: f64,
    value: Float,
    certified: bool,
}

impl Sample {
    fn sign(&self) -> i32 {
        if self.value.is_sign_negative() {
            -1
        } else {
            1
        }
    }
}

enum Bracket {
    /// A certified sign change between two samples.
    Odd(usize, usize),
    /// Same sign on both sides of a run of uncertified samples.
    Even(usize, usize),
}

/// Counts roots visible in the sample sequence and collects suspicious cells.
///
/// With `root_at_pi` the flat stretch before the final sample belongs to the
/// zero at `pi` and is not read as a double root.
fn survey(samples: &[Sample], root_at_pi: bool) -> (Vec<Bracket>, Vec<usize>) {
    let mut brackets = Vec::new();
    let mut suspects = Vec::new();
    let certified: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].certified).collect();
    for pair in certified.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if samples[a].sign() != samples[b].sign() {
            brackets.push(Bracket::Odd(a, b));
        } else if b > a + 1 && !(root_at_pi && b + 1 == samples.len()) {
            brackets.push(Bracket::Even(a, b));
        }
    }
    for w in certified.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let s = samples[a].sign();
        if samples[b].sign() == s
            && samples[c].sign() == s
            && samples[b].value.cmp_abs(&samples[a].value) == Some(Ordering::Less)
            && samples[b].value.cmp_abs(&samples[c].value) != Some(Ordering::Greater)
        {
            suspects.push(a);
            suspects.push(b);
        }
    }
    suspects.extend(crowded_cells(samples, &brackets));
    (brackets, suspects)
}

/// Cells within `CROWD_REACH` spacings of a located root that are wider than
/// half the local root spacing. Close pairs at the arc edge hide in such cells
/// without a sign change or a visible dip, since `|H|` falls steeply there.
fn crowded_cells(samples: &[Sample], brackets: &[Bracket]) -> Vec<usize> {
    let roots: Vec<(usize, f64)> = brackets
        .iter()
        .map(|b| match *b {
            Bracket::Odd(a, b) | Bracket::Even(a, b) => (a, 0.5 * (samples[a].theta + samples[b].theta)),
        })
        .collect();
    let mut cells = Vec::new();
    for (k, &(at, theta)) in roots.iter().enumerate() {
        let prev = k.checked_sub(1).map(|j| theta - roots[j].1);
        let next = roots.get(k + 1).map(|r| r.1 - theta);
        let spacing = match (prev, next) {
            (Some(p), Some(n)) => p.min(n),
            (Some(s), None) | (None, Some(s)) => s,
            (None, None) => continue,
        };
        let reach = CROWD_REACH * spacing;
        let mut lo = at;
        while lo > 0 && theta - samples[lo].theta <= reach {
            lo -= 1;
        }
        let mut hi = at + 1;
        while hi + 1 < samples.len() && samples[hi].theta - theta <= reach {
            hi += 1;
        }
        cells.extend((lo..hi).filter(|&c| samples[c + 1].theta - samples[c].theta > 0.5 * spacing));
    }
    cells
}

fn found_count(brackets: &[Bracket]) -> usize {
    brackets
        .iter()
        .map(|b| match b {
            Bracket::Odd(..) => 1,
            Bracket::Even(..) => 2,
        })
        .sum()
}

/// Locates all Lee-Yang angles of a spectrum.
///
/// `grid_points` counts samples over the whole circle; only `(0, pi]` is scanned
/// and the result mirrored.
pub fn find_angles(
    spec: &MagnetizationSpectrum,
    grid_points: usize,
    theta_tol: f64,
) -> Result<LeeYangSpectrum> {
    let n = spec.site_count();
    if grid_points < 4 * n {
        return Err(Error::invalid(format!("grid_points {grid_points} below 4N = {}", 4 * n)));
    }
    if !(theta_tol > 0.0) {
        return Err(Error::invalid("theta_tol must be positive"));
    }
    let source = spec.cache_key();
    if spec.is_independent_spins() {
        return LeeYangSpectrum::new(
            vec![ZeroAngle {
                theta: PI,
                multiplicity: n as u32,
            }],
            0.0,
            source,
        );
    }
    let ev = CircleEvaluator::new(spec);
    let (mult_pi, sign_below_pi) = ev.at_pi(spec);
    if (n - mult_pi) % 2 == 1 {
        return Err(Error::RootDeficit {
            found: mult_pi,
            expected: n,
            detail: "multiplicity at pi has the wrong parity".into(),
        });
    }
    let expected = (n - mult_pi) / 2;

    let half = (grid_points / 2).max(2);
    let step = PI / half as f64;
    let mut samples = Vec::with_capacity(half + 1);
    samples.push(Sample {
        theta: 0.0,
        value: Float::with_val(ev.prec, 1),
        certified: true,
    });
    let interior = evaluate_blocks(&ev, (1..half).map(|i| i as f64 * step).collect(), mult_pi > 0, true)?;
    samples.extend(interior);
    samples.push(Sample {
        theta: PI,
        value: Float::with_val(ev.prec, sign_below_pi),
        certified: true,
    });

    let mut pass = 0;
    let brackets = loop {
        let (brackets, suspects) = survey(&samples, mult_pi > 0);
        let found = found_count(&brackets);
        if found == expected {
            break brackets;
        }
        if pass == REFINE_PASSES || found > expected || suspects.is_empty() {
            return Err(deficit(&samples, found, expected, mult_pi));
        }
        pass += 1;
        samples = refine(&ev, samples, &suspects)?;
    };

    let mut roots: Vec<ZeroAngle> = brackets
        .par_iter()
        .map(|b| match *b {
            Bracket::Odd(a, b) => Ok(ZeroAngle {
                theta: bisect(&ev, &samples[a], &samples[b], theta_tol)?,
                multiplicity: 1,
            }),
            Bracket::Even(a, b) => Ok(ZeroAngle {
                theta: deepest(&ev, samples[a].theta, samples[b].theta, theta_tol),
                multiplicity: 2,
            }),
        })
        .collect::<Result<_>>()?;

    let mut residual = 0f64;
    for r in &roots {
        let v = ev.eval(r.theta).abs().to_f64();
        residual = residual.max(v);
    }
    let mirrored: Vec<ZeroAngle> = roots
        .iter()
        .map(|r| ZeroAngle {
            theta: TAU - r.theta,
            multiplicity: r.multiplicity,
        })
        .collect();
    roots.extend(mirrored);
    if mult_pi > 0 {
        roots.push(ZeroAngle {
            theta: PI,
            multiplicity: mult_pi as u32,
        });
    }
    LeeYangSpectrum::new(roots, residual, source)
}

fn deficit(samples: &[Sample], found: usize, expected: usize, mult_pi: usize) -> Error {
    let uncertified = samples.iter().filter(|s| !s.certified).count();
    Error::RootDeficit {
        found: 2 * found + mult_pi,
        expected: 2 * expected + mult_pi,
        detail: format!("{} samples, {uncertified} below the noise floor", samples.len()),
    }
}

/// Evaluates sample points. With `abort`, stops early when a long uncertified
/// run shows that the precision cannot resolve the sign of `H`.
fn evaluate_blocks(
    ev: &CircleEvaluator,
    thetas: Vec<f64>,
    root_at_pi: bool,
    abort: bool,
) -> Result<Vec<Sample>> {
    const BLOCK: usize = 4096;
    let mut out: Vec<Sample> = Vec::with_capacity(thetas.len());
    let mut run = 0usize;
    let total = thetas.len();
    for chunk in thetas.chunks(BLOCK) {
        let block: Vec<Sample> = chunk
            .par_iter()
            .map(|&theta| {
                let value = ev.eval(theta);
                let certified = ev.certified(&value);
                Sample {
                    theta,
                    value,
                    certified,
                }
            })
            .collect();
        for s in block {
            if s.certified {
                run = 0;
            } else {
                run += 1;
                // A flat stretch just below a zero at pi is expected.
                let near_end = root_at_pi && out.len() + EXHAUSTED_RUN >= total;
                if abort && run >= EXHAUSTED_RUN && !near_end {
                    return Err(Error::PrecisionExhausted { theta: s.theta });
                }
            }
            out.push(s);
        }
    }
    Ok(out)
}

fn refine(ev: &CircleEvaluator, samples: Vec<Sample>, suspects: &[usize]) -> Result<Vec<Sample>> {
    let mut cells: Vec<usize> = suspects
        .iter()
        .flat_map(|&i| [i.saturating_sub(1), i, i + 1])
        .filter(|&i| i + 1 < samples.len())
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let mut fresh = Vec::new();
    for &c in &cells {
        let (a, b) = (samples[c].theta, samples[c + 1].theta);
        let h = (b - a) / REFINE_SPLIT as f64;
        if h <= 0.0 || a + h == a {
            continue;
        }
        fresh.extend((1..REFINE_SPLIT).map(|j| a + j as f64 * h));
    }
    let new_samples = evaluate_blocks(ev, fresh, false, false)?;
    let mut merged = samples;
    merged.extend(new_samples);
    merged.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(merged)
}

/// Bisects a sign change down to `tol`; a sign lost in rounding noise first asks for more bits.
fn bisect(ev: &CircleEvaluator, lo: &Sample, hi: &Sample, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.theta, hi.theta);
    let sa = lo.sign();
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = ev.eval(mid);
        if !ev.certified(&v) {
            return Err(Error::PrecisionExhausted { theta: mid });
        }
        let s = if v.is_sign_negative() { -1 } else { 1 };
        if s == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Golden-section search for the minimum of `|H|` on `[a, b]`.
fn deepest(ev: &CircleEvaluator, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |t: f64| log2_abs(&ev.eval(t));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    0.5 * (a + b)
}

/// MGF zeros `theta_l / 2 + k pi` for `0 <= k <= K`, sorted.
#[derive(Debug, Clone)]
pub struct MgfZeroList {
    alphas: Vec<f64>,
    angles: Vec<f64>,
    depth: usize,
}

pub fn mgf_zeros(angles: &LeeYangSpectrum, depth: usize) -> MgfZeroList {
    let base = angles.expanded();
    let mut alphas: Vec<f64> = (0..=depth)
        .flat_map(|k| base.iter().map(move |t| 0.5 * t + k as f64 * PI))
        .collect();
    alphas.sort_by(f64::total_cmp);
    MgfZeroList {
        alphas,
        angles: base,
        depth,
    }
}

impl MgfZeroList {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn site_count(&self) -> usize {
        self.angles.len()
    }

    pub fn theta_min(&self) -> f64 {
        self.angles.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bound on the omitted `sum_{k > K} alpha^{-order}` (order even, >= 2).
    pub fn tail_bound(&self, order: u32) -> f64 {
        assert!(order >= 2 && order % 2 == 0, "order must be even and >= 2");
        let n = self.site_count() as f64;
        let o = order as f64;
        let base = self.depth as f64 + self.theta_min() / TAU;
        n * PI.powf(-o) * base.powf(1.0 - o) / (o - 1.0)
    }

    /// Truncated power sum `sum_j alpha_j^{-order}` (largest terms added last).
    pub fn power_sum(&self, order: u32) -> f64 {
        self.alphas
            .iter()
            .rev()
            .map(|a| a.powi(-(order as i32)))
            .sum()
    }

    /// The untruncated power sum for orders 2, 4 and 6, from cosecant identities.
    pub fn complete_power_sum(&self, order: u32) -> Option<f64> {
        complete_power_sum(&self.angles, order)
    }

    /// Smallest depth with `tail_bound(order) < tol`.
    pub fn depth_for(angles: &LeeYangSpectrum, order: u32, tol: f64) -> usize {
        let n = angles.count() as f64;
        let o = order as f64;
        let theta = angles.smallest();
        let need = (n * PI.powf(-o) / ((o - 1.0) * tol)).powf(1.0 / (o - 1.0)) - theta / TAU;
        need.max(0.0).ceil() as usize
    }
}

/// `sum_l sum_{k >= 0} (theta_l/2 + k pi)^{-order}` summed over all `k` in closed form.
///
/// Uses `sum_{k in Z} (a + k pi)^{-2} = csc^2 a` and its derivatives; the angle
/// multiset must be symmetric under `theta -> 2pi - theta`.
pub fn complete_power_sum(angles: &[f64], order: u32) -> Option<f64> {
    let total: f64 = angles
        .iter()
        .map(|&t| {
            let c2 = 1.0 / (0.5 * t).sin().powi(2);
            match order {
                2 => c2,
                4 => c2 * c2 - 2.0 / 3.0 * c2,
                6 => c2 * c2 * c2 - c2 * c2 + 2.0 / 15.0 * c2,
                _ => f64::NAN,
            }
        })
        .sum();
    total.is_finite().then_some(0.5 * total)
}

/// Maximum relative deviation of the MGF from its truncated product over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationResidual {
    pub residual: f64,
    /// Bound on the relative error caused by omitting replicas beyond depth K.
    pub tail_bound: f64,
}

pub fn factorization_residual(
    spec: &MagnetizationSpectrum,
    zeros: &MgfZeroList,
    z_grid: &[Complex64],
) -> Result<FactorizationResidual> {
    let u2 = spec.moment(2);
    let t4 = zeros.tail_bound(4);
    let mut worst = 0f64;
    let mut bound = 0f64;
    for &z in z_grid {
        if z.norm() > PI / 2.0 + 1e-12 {
            return Err(Error::invalid(format!("grid point {z} outside |z| <= pi/2")));
        }
        let (lhs, lhs_scale) = spec.mgf_scaled(z)?;
        let (prod, prod_scale) = truncated_product(zeros.alphas(), z);
        let gauss = z * z * (0.5 * u2);
        let log_ratio = Complex64::new(prod_scale + gauss.re - lhs_scale, gauss.im);
        let ratio = log_ratio.exp() * prod / lhs;
        worst = worst.max((ratio - 1.0).norm());
        bound = bound.max((z.norm().powi(4) * t4).exp_m1());
    }
    Ok(FactorizationResidual {
        residual: worst,
        tail_bound: bound,
    })
}

/// `prod (1 + z^2/a^2) exp(-z^2/a^2)` as `(mantissa, ln scale)`.
fn truncated_product(alphas: &[f64], z: Complex64) -> (Complex64, f64) {
    let z2 = z * z;
    let mut acc = Complex64::new(1.0, 0.0);
    let mut ln_scale = 0f64;
    for &a in alphas.iter().rev() {
        let w = z2 / (a * a);
        acc *= (1.0 + w) * (-w).exp();
        let r = acc.norm();
        if !(1e-100..=1e100).contains(&r) {
            if r == 0.0 {
                return (acc, 0.0);
            }
            acc /= r;
            ln_scale += r.ln();
        }
    }
    (acc, ln_scale)
}

/// Uniform probability measure on the zero angles.
#[derive(Debug, Clone)]
pub struct EmpiricalZeroMeasure {
    points: Vec<(f64, f64)>,
}

pub fn empirical_zero_measure(angles: &LeeYangSpectrum) -> EmpiricalZeroMeasure {
    let n = angles.count() as f64;
    EmpiricalZeroMeasure {
        points: angles
            .angles()
            .iter()
            .map(|a| (a.theta, a.multiplicity as f64 / n))
            .collect(),
    }
}

impl EmpiricalZeroMeasure {
    /// `(theta, mass)` atoms.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Mass of the closed arc `[a, b]` (taken modulo `2pi`, so `a` may be negative).
    pub fn arc_mass(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        if b - a >= TAU {
            return self.points.iter().map(|p| p.1).sum();
        }
        self.points
            .iter()
            .filter(|(t, _)| a + (t - a).rem_euclid(TAU) <= b)
            .map(|p| p.1)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::Beta;
    use crate::lattice::{build_lattice, Boundary};
    use crate::spectrum::{enumerate_spectrum, transfer_spectrum_1d};

    fn chain3() -> MagnetizationSpectrum {
        let l = build_lattice(1, 1, Boundary::Free).unwrap();
        let beta = Beta::parse("0.34657359027997265470861606072908828403775006718012762706034000").unwrap();
        enumerate_spectrum(&l, &beta, 106).unwrap()
    }

    fn single() -> MagnetizationSpectrum {
        enumerate_spectrum(&build_lattice(1, 0, Boundary::Free).unwrap(), &Beta::parse("0.4").unwrap(), 106)
            .unwrap()
    }

    #[test]
    fn circle_function_closed_forms() {
        let s = single();
        for t in [0.3, 1.0, 2.5, 5.0] {
            let v = circle_function(&s, t).unwrap().value().to_f64();
            assert!((v - 2.0 * (t / 2.0).cos()).abs() < 1e-15);
        }
        assert!(circle_function(&s, 1.0).unwrap().is_certified());

        let c3 = chain3();
        for t in [0.4f64, 1.2, 2.9, 4.4] {
            let c = (t / 2.0).cos();
            let v = circle_function(&c3, t).unwrap().value().to_f64();
            assert!((v / 2.0 - (8.0 * c * c * c - 3.5 * c)).abs() < 1e-13);
        }
        let l = build_lattice(1, 1, Boundary::Free).unwrap();
        let z = enumerate_spectrum(&l, &Beta::zero(), 106).unwrap();
        let v = circle_function(&z, 1.0).unwrap().value().to_f64();
        assert!((v - (2.0 * 0.5f64.cos()).powi(3)).abs() < 1e-13);
    }

    #[test]
    fn angles_of_small_systems() {
        let one = find_angles(&single(), 64, 1e-12).unwrap();
        assert_eq!(one.angles(), &[ZeroAngle { theta: PI, multiplicity: 1 }]);

        let z = find_angles(&chain3(), 192, 1e-12).unwrap();
        let e = z.expanded();
        let t1 = 2.0 * (7f64 / 16.0).sqrt().acos();
        assert_eq!(e.len(), 3);
        assert!((e[0] - t1).abs() < 1e-11, "{e:?}");
        assert!((e[1] - PI).abs() < 1e-15);
        assert!((e[2] - (TAU - t1)).abs() < 1e-11);

        let l = build_lattice(1, 1, Boundary::Free).unwrap();
        let free = enumerate_spectrum(&l, &Beta::zero(), 106).unwrap();
        let z0 = find_angles(&free, 12, 1e-12).unwrap();
        assert_eq!(z0.angles(), &[ZeroAngle { theta: PI, multiplicity: 3 }]);
    }

    #[test]
    fn grid_floor_enforced() {
        assert!(find_angles(&chain3(), 11, 1e-12).is_err());
    }

    #[test]
    fn unresolved_bisection_asks_for_bits() {
        let beta = Beta::parse("0.1").unwrap();
        let low = transfer_spectrum_1d(101, Boundary::Free, &beta, 206).unwrap();
        let err = find_angles(&low, 101 * 64, 1e-12).unwrap_err();
        assert!(err.needs_escalation(), "{err}");
        let high = transfer_spectrum_1d(101, Boundary::Free, &beta, 309).unwrap();
        let z = find_angles(&high, 101 * 64, 1e-12).unwrap();
        let u4 = crate::analysis::cumulants_from_spectrum(&high, &[2, 4]).unwrap().u4;
        let p4 = complete_power_sum(&z.expanded(), 4).unwrap();
        assert!(((u4 + 12.0 * p4) / u4).abs() < 1e-12);
    }

    #[test]
    fn even_chain_has_no_root_at_pi() {
        let s = transfer_spectrum_1d(8, Boundary::Free, &Beta::parse("0.3").unwrap(), 106).unwrap();
        let z = find_angles(&s, 8 * 64, 1e-12).unwrap();
        assert_eq!(z.count(), 8);
        let e = z.expanded();
        for (a, b) in e.iter().zip(e.iter().rev()) {
            assert!((a + b - TAU).abs() < 1e-12);
        }
        assert!(z.residual() < 1e-12);
    }

    #[test]
    fn replicated_zeros() {
        let one = find_angles(&single(), 64, 1e-12).unwrap();
        let list = mgf_zeros(&one, 2);
        let expect = [PI / 2.0, 1.5 * PI, 2.5 * PI];
        for (a, b) in list.alphas().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let k10 = mgf_zeros(&one, 10);
        assert!(k10.tail_bound(4) <= PI.powi(-4) * 1e-3 / 3.0);

        let z3 = find_angles(&chain3(), 192, 1e-12).unwrap();
        let a = mgf_zeros(&z3, 0);
        let half = 0.5 * (-0.125f64).acos();
        let expect = [half, PI / 2.0, PI - half];
        for (x, y) in a.alphas().iter().zip(expect) {
            assert!((x - y).abs() < 1e-11, "{:?}", a.alphas());
        }
    }

    #[test]
    fn complete_sums_match_series() {
        // single spin: sum (pi/2 + k pi)^{-2} = 1/2, ^{-4} = 1/6, ^{-6} = 1/15
        let angles = [PI];
        assert!((complete_power_sum(&angles, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((complete_power_sum(&angles, 4).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((complete_power_sum(&angles, 6).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!(complete_power_sum(&angles, 8).is_none());
    }

    #[test]
    fn factorization_of_small_systems() {
        let s = single();
        let zs = mgf_zeros(&find_angles(&s, 64, 1e-12).unwrap(), 50);
        let grid: Vec<Complex64> = (-10..=10).map(|i| Complex64::new(i as f64 / 10.0, 0.0)).collect();
        let r = factorization_residual(&s, &zs, &grid).unwrap();
        assert!(r.residual <= 1e-6, "{r:?}");
        assert!(r.residual <= r.tail_bound + 1e-12);

        let c3 = chain3();
        let zs = mgf_zeros(&find_angles(&c3, 192, 1e-12).unwrap(), 100);
        let r0 = factorization_residual(&c3, &zs, &[Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(r0.residual, 0.0);
        let grid: Vec<Complex64> = (0..8)
            .flat_map(|j| (1..=4).map(move |i| Complex64::from_polar(i as f64 / 4.0, j as f64 * PI / 16.0)))
            .collect();
        let r = factorization_residual(&c3, &zs, &grid).unwrap();
        assert!(r.residual <= 1e-8 + r.tail_bound, "{r:?}");
    }

    #[test]
    fn arc_masses() {
        let one = empirical_zero_measure(&find_angles(&single(), 64, 1e-12).unwrap());
        assert_eq!(one.arc_mass(PI - 0.1, PI + 0.1), 1.0);
        let c3 = empirical_zero_measure(&find_angles(&chain3(), 192, 1e-12).unwrap());
        assert_eq!(c3.arc_mass(0.0, 1.0), 0.0);
        assert!((c3.arc_mass(-2.0, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        let l = build_lattice(1, 1, Boundary::Free).unwrap();
        let free = enumerate_spectrum(&l, &Beta::zero(), 106).unwrap();
        let m = empirical_zero_measure(&find_angles(&free, 12, 1e-12).unwrap());
        assert_eq!(m.arc_mass(3.0, 3.3), 1.0);
    }
}
