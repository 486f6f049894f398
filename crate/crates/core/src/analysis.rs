//! Cumulants, scaling constants, the Curie-Weiss tilt and Gaussian-transform densities.

use rug::Float;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectrum::{Engine, MagnetizationSpectrum, SpectrumMeta};
use crate::zeros::{find_angles, LeeYangSpectrum, MgfZeroList};

/// A truncated quantity together with a bound on what truncation left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CumulantSource {
    Spectrum,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub u2: f64,
    pub u4: f64,
    pub u6: Option<f64>,
    pub source: CumulantSource,
    pub truncation_bound: f64,
}

fn check_orders(orders: &[u32]) -> Result<bool> {
    for &o in orders {
        if ![2, 4, 6].contains(&o) {
            return Err(Error::invalid(format!("cumulant order {o} not in {{2, 4, 6}}")));
        }
    }
    Ok(orders.contains(&6))
}

/// `u2`, `u4` (and `u6` when requested) from exact moments.
pub fn cumulants_from_spectrum(spec: &MagnetizationSpectrum, orders: &[u32]) -> Result<CumulantSet> {
    let want6 = check_orders(orders)?;
    let m2 = spec.moment_hp(2);
    let m4 = spec.moment_hp(4);
    let p = m2.prec();
    let u4 = Float::with_val(p, &m4 - Float::with_val(p, m2.square_ref()) * 3u32);
    let u6 = want6.then(|| {
        let m6 = spec.moment_hp(6);
        let mut u = Float::with_val(p, &m6 - Float::with_val(p, &m4 * &m2) * 15u32);
        u += Float::with_val(p, Float::with_val(p, m2.square_ref()) * &m2) * 30u32;
        u.to_f64()
    });
    Ok(CumulantSet {
        u2: m2.to_f64(),
        u4: u4.to_f64(),
        u6,
        source: CumulantSource::Spectrum,
        truncation_bound: 0.0,
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `u_{2m} = (-1)^{m-1} (2m)!/m * sum alpha^{-2m}`, truncated at the list depth.
pub fn cumulants_from_zeros(zeros: &MgfZeroList, order: u32) -> Result<Bounded> {
    if order < 4 || order % 2 == 1 {
        return Err(Error::invalid(format!("zero-sum cumulants need an even order >= 4, got {order}")));
    }
    let m = order / 2;
    let scale = factorial(order) / m as f64;
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    Ok(Bounded {
        value: sign * scale * zeros.power_sum(order),
        bound: scale * zeros.tail_bound(order),
    })
}

/// Full cumulant set from the zeros alone (`u2 = 2 sum alpha^{-2}`, i.e. `b = 0`).
pub fn cumulant_set_from_zeros(zeros: &MgfZeroList, with_u6: bool) -> Result<CumulantSet> {
    let u4 = cumulants_from_zeros(zeros, 4)?;
    let u6 = if with_u6 { Some(cumulants_from_zeros(zeros, 6)?) } else { None };
    let u2 = 2.0 * zeros.power_sum(2);
    let bound = [2.0 * zeros.tail_bound(2), u4.bound, u6.map_or(0.0, |b| b.bound)]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CumulantSet {
        u2,
        u4: u4.value,
        u6: u6.map(|b| b.value),
        source: CumulantSource::Zeros,
        truncation_bound: bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub gamma_n: f64,
    pub lambda_n: f64,
    pub c_n: f64,
    pub d_n: f64,
}

/// Bracket for `c_n`: `[1 / int (1+x^4/3)^{-1}, 1 / int e^{-x^4}]`.
pub fn c_n_bracket() -> (f64, f64) {
    let lower = 2f64.sqrt() / (3f64.powf(0.25) * PI);
    let upper = 1.0 / (2.0 * crate::special::gamma(1.25));
    (lower, upper)
}

pub fn scaling_constants(spec: &MagnetizationSpectrum) -> Result<ScalingConstants> {
    let cum = cumulants_from_spectrum(spec, &[2, 4])?;
    if !(cum.u4 < 0.0) {
        return Err(Error::invalid(format!("scaling constants need u4 < 0, got {}", cum.u4)));
    }
    let lambda = cum.u2;
    let ln_t = ln_square_exp_moment(spec, 1.0 / (2.0 * lambda));
    let q = (-cum.u4 / 24.0).powf(0.25);
    let c_n = (lambda.sqrt().ln() - 0.5 * (2.0 * PI).ln() - ln_t).exp() / q;
    Ok(ScalingConstants {
        gamma_n: 1.0 / (2.0 * lambda),
        lambda_n: lambda,
        c_n,
        d_n: q / lambda,
    })
}

/// `ln <exp(gamma Y^2)>` at the spectrum's precision.
pub fn ln_square_exp_moment(spec: &MagnetizationSpectrum, gamma: f64) -> f64 {
    let p = spec.precision_bits() + 16;
    let g = Float::with_val(p, gamma);
    let mut num = Float::new(p);
    let mut den = Float::new(p);
    let shift = gamma.max(0.0) * (spec.site_count() as f64).powi(2);
    for (k, w) in spec.weights().iter().enumerate() {
        let m = spec.magnetization(k);
        let e = Float::with_val(p, &g * (m * m)) - shift;
        num += e.exp() * w;
        den += w;
    }
    (num.ln() - den.ln()).to_f64() + shift
}

/// Law of `X` with `P(X = m)` proportional to `A_m exp(gamma m^2)`.
#[derive(Debug, Clone)]
pub struct TiltedSpectrum {
    gamma: f64,
    base_key: String,
    ln_normalizer: f64,
    tilted: MagnetizationSpectrum,
}

pub fn tilt_spectrum(spec: &MagnetizationSpectrum, gamma: f64) -> Result<TiltedSpectrum> {
    if !gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite"));
    }
    let p = spec.precision_bits();
    let g = Float::with_val(p + 16, gamma);
    let raw: Vec<Float> = spec
        .weights()
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let m = spec.magnetization(k);
            Float::with_val(p + 16, &g * (m * m)).exp() * w
        })
        .collect();
    let ln_normalizer = ln_square_exp_moment(spec, gamma);
    let tilt_repr = match spec.tilt() {
        Some(prev) => format!("{prev}+{gamma:?}"),
        None => format!("{gamma:?}"),
    };
    let meta = SpectrumMeta {
        geometry: spec.geometry().clone(),
        site_count: spec.site_count(),
        beta: spec.beta().clone(),
        precision_bits: p,
        engine: Engine::Tilted,
        tilt: Some(tilt_repr),
    };
    let tilted = MagnetizationSpectrum::from_raw(meta, raw, spec.log_scale().clone())?;
    Ok(TiltedSpectrum {
        gamma,
        base_key: spec.cache_key(),
        ln_normalizer,
        tilted,
    })
}

impl TiltedSpectrum {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn base_key(&self) -> &str {
        &self.base_key
    }

    /// `ln <exp(gamma Y^2)>` under the untilted law.
    pub fn ln_normalizer(&self) -> f64 {
        self.ln_normalizer
    }

    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer.exp()
    }

    /// The tilted weights viewed as a spectrum (for zero finding and MGF evaluation).
    pub fn as_spectrum(&self) -> &MagnetizationSpectrum {
        &self.tilted
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.tilted.moment(k)
    }

    /// `(m, p_m)` pairs.
    pub fn probabilities(&self) -> Vec<(i64, f64)> {
        let p = self.tilted.precision_bits();
        let total = self.tilted.weight_sum();
        self.tilted
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| (self.tilted.magnetization(k), Float::with_val(p, w / &total).to_f64()))
            .collect()
    }

    /// Atoms of `X / sqrt(E X^2)`.
    pub fn normalized_atoms(&self) -> Vec<(f64, f64)> {
        let s = self.moment(2).sqrt();
        self.probabilities()
            .into_iter()
            .map(|(m, p)| (m as f64 / s, p))
            .collect()
    }
}

/// Anything with second and fourth moments.
pub trait MomentSource {
    fn second_moment(&self) -> f64;
    fn fourth_moment(&self) -> f64;
}

impl MomentSource for TiltedSpectrum {
    fn second_moment(&self) -> f64 {
        self.moment(2)
    }
    fn fourth_moment(&self) -> f64 {
        self.moment(4)
    }
}

impl MomentSource for MagnetizationSpectrum {
    fn second_moment(&self) -> f64 {
        self.moment(2)
    }
    fn fourth_moment(&self) -> f64 {
        self.moment(4)
    }
}

/// Plain sample moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub second: f64,
    pub fourth: f64,
}

impl MomentSource for SampleMoments {
    fn second_moment(&self) -> f64 {
        self.second
    }
    fn fourth_moment(&self) -> f64 {
        self.fourth
    }
}

/// `E X^4 / (E X^2)^2`.
pub fn normalized_kurtosis<D: MomentSource + ?Sized>(dist: &D) -> Result<f64> {
    let m2 = dist.second_moment();
    if !(m2 > 0.0) {
        return Err(Error::invalid("second moment must be positive"));
    }
    Ok(dist.fourth_moment() / (m2 * m2))
}

/// Density of `W = X + N(0, lambda)` from the spectrum.
#[derive(Debug, Clone)]
pub struct WDensity {
    weights: Vec<(i64, f64)>,
    lambda: f64,
    ln_prefactor: f64,
}

impl WDensity {
    pub fn new(spec: &MagnetizationSpectrum) -> Result<Self> {
        let lambda = spec.moment(2);
        if !(lambda > 0.0) {
            return Err(Error::invalid("second moment must be positive"));
        }
        let ln_t = ln_square_exp_moment(spec, 1.0 / (2.0 * lambda));
        let p = spec.precision_bits();
        let total = spec.weight_sum();
        let weights = spec
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let r = Float::with_val(p, w / &total).ln();
                (spec.magnetization(k), r.to_f64())
            })
            .collect();
        Ok(WDensity {
            weights,
            lambda,
            ln_prefactor: -0.5 * (2.0 * PI * lambda).ln() - ln_t,
        })
    }

    /// `ln <exp(t Y)>` for real `t` (log-sum-exp of positive terms).
    fn ln_mgf(&self, t: f64) -> f64 {
        let max = self
            .weights
            .iter()
            .map(|&(m, lw)| lw + t * m as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: crate::hp::CompensatedSum = self
            .weights
            .iter()
            .map(|&(m, lw)| (lw + t * m as f64 - max).exp())
            .collect();
        max + s.value().ln()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let l = self.lambda;
        (self.ln_prefactor - x * x / (2.0 * l) + self.ln_mgf(x / l)).exp()
    }
}

pub fn w_density_spectrum(spec: &MagnetizationSpectrum, x: f64) -> Result<f64> {
    Ok(WDensity::new(spec)?.eval(x))
}

/// Product form of the density of `d_n W_n` built from MGF zeros.
#[derive(Debug, Clone)]
pub struct ZeroDensity {
    c_n: f64,
    inv_scaled: Vec<f64>,
    omitted4: f64,
    tail6: f64,
    tol: f64,
}

pub const ZERO_DENSITY_TOL: f64 = 1e-6;

impl ZeroDensity {
    pub fn new(spec: &MagnetizationSpectrum, zeros: &MgfZeroList) -> Result<Self> {
        let sc = scaling_constants(spec)?;
        let u4 = cumulants_from_spectrum(spec, &[4])?.u4;
        let s = (-u4 / 24.0).sqrt();
        let inv_scaled = zeros.alphas().iter().rev().map(|a| 1.0 / (a * a * s)).collect();
        let omitted4 = zeros
            .complete_power_sum(4)
            .map(|full| (full - zeros.power_sum(4)).max(0.0))
            .unwrap_or(0.0);
        Ok(ZeroDensity {
            c_n: sc.c_n,
            inv_scaled,
            omitted4: omitted4 / (s * s),
            tail6: zeros.tail_bound(6) / (s * s * s),
            tol: ZERO_DENSITY_TOL,
        })
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let x2 = x * x;
        let mut log = 0.0;
        for &c in &self.inv_scaled {
            let y = x2 * c;
            log += y.ln_1p() - y;
        }
        // omitted factors: ln((1+y)e^{-y}) = -y^2/2 + y^3/3 - ...
        log -= 0.5 * x2 * x2 * self.omitted4;
        let bound = x2 * x2 * x2 * self.tail6 / 3.0;
        if bound > self.tol {
            return Err(Error::Truncation { bound, tol: self.tol });
        }
        Ok(self.c_n * log.exp())
    }
}

pub fn w_density_zeros(spec: &MagnetizationSpectrum, zeros: &MgfZeroList, x: f64) -> Result<f64> {
    ZeroDensity::new(spec, zeros)?.eval(x)
}

/// Lower and upper envelopes `c e^{-x^4}` and `c / (1 + x^4/3)` for the density of `d_n W_n`.
pub fn density_envelope(c_n: f64, x: f64) -> (f64, f64) {
    let x4 = x.powi(4);
    (c_n * (-x4).exp(), c_n / (1.0 + x4 / 3.0))
}

#[derive(Debug, Clone)]
pub enum LyStatus {
    /// All zeros of the re-tilted spectrum were certified on the circle.
    Certified(LeeYangSpectrum),
    /// The shifted coupling is negative at this size; no certification attempted.
    PreAsymptotic,
}

#[derive(Debug, Clone)]
pub struct TiltedLyReport {
    pub b: f64,
    pub gamma_n: f64,
    pub second_moment_x: f64,
    pub gamma_hat: f64,
    pub status: LyStatus,
}

/// Re-tilts with `gamma_hat = gamma_n (1 - b / (gamma_n E X^2))` and certifies the zeros.
pub fn tilted_ly_check(
    spec: &MagnetizationSpectrum,
    b: f64,
    grid_points: usize,
    theta_tol: f64,
) -> Result<TiltedLyReport> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid("b must be positive"));
    }
    let gamma_n = 1.0 / (2.0 * spec.moment(2));
    let ex2 = tilt_spectrum(spec, gamma_n)?.moment(2);
    let gamma_hat = gamma_n * (1.0 - b / (gamma_n * ex2));
    let status = if gamma_hat < 0.0 {
        LyStatus::PreAsymptotic
    } else {
        let t = tilt_spectrum(spec, gamma_hat)?;
        LyStatus::Certified(find_angles(t.as_spectrum(), grid_points, theta_tol)?)
    };
    Ok(TiltedLyReport {
        b,
        gamma_n,
        second_moment_x: ex2,
        gamma_hat,
        status,
    })
}

/// `b_k = sum alpha^{-2k} / (-u4/4!)^{k/2}` for each requested order `2k`.
pub fn power_sum_profile(zeros: &MgfZeroList, u4: f64, orders: &[u32]) -> Result<Vec<Bounded>> {
    if !(u4 < 0.0) {
        return Err(Error::invalid("power-sum profile needs u4 < 0"));
    }
    let q = -u4 / 24.0;
    orders
        .iter()
        .map(|&o| {
            if o < 4 || o % 2 == 1 {
                return Err(Error::invalid(format!("order {o} must be even and >= 4")));
            }
            let norm = q.powf(o as f64 / 4.0);
            Ok(Bounded {
                value: zeros.power_sum(o) / norm,
                bound: zeros.tail_bound(o) / norm,
            })
        })
        .collect()
}

/// `(<exp(x X~)> exp(x^2 lambda / (2 E X^2)), exp(x^2))` with `X~ = X / sqrt(E X^2)`.
pub fn ghs_mgf_check(spec: &MagnetizationSpectrum, x: f64) -> Result<(f64, f64)> {
    let lambda = spec.moment(2);
    let tilted = tilt_spectrum(spec, 1.0 / (2.0 * lambda))?;
    let ex2 = tilted.moment(2);
    let w = WDensity::new(tilted.as_spectrum())?;
    let lhs = (w.ln_mgf(x / ex2.sqrt()) + x * x * lambda / (2.0 * ex2)).exp();
    Ok((lhs, (x * x).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::Beta;
    use crate::lattice::{build_lattice, Boundary};
    use crate::spectrum::{curie_weiss_spectrum, enumerate_spectrum};
    use crate::zeros::mgf_zeros;

    fn chain3() -> MagnetizationSpectrum {
        let l = build_lattice(1, 1, Boundary::Free).unwrap();
        let beta = Beta::parse("0.34657359027997265470861606072908828403775006718012762706034000").unwrap();
        enumerate_spectrum(&l, &beta, 106).unwrap()
    }

    fn single() -> MagnetizationSpectrum {
        enumerate_spectrum(&build_lattice(2, 0, Boundary::Free).unwrap(), &Beta::zero(), 106).unwrap()
    }

    #[test]
    fn spectrum_cumulants() {
        let c = cumulants_from_spectrum(&single(), &[2, 4, 6]).unwrap();
        assert_eq!((c.u2, c.u4, c.u6), (1.0, -2.0, Some(16.0)));
        let cw = cumulants_from_spectrum(&curie_weiss_spectrum(7, 106).unwrap(), &[2, 4]).unwrap();
        assert!((cw.u2 - 7.0).abs() < 1e-13 && (cw.u4 + 14.0).abs() < 1e-12);
        let c3 = cumulants_from_spectrum(&chain3(), &[4]).unwrap();
        assert!((c3.u2 - 41.0 / 9.0).abs() < 1e-14);
        assert!((c3.u4 + 694.0 / 27.0).abs() < 1e-13);
        assert!(cumulants_from_spectrum(&chain3(), &[3]).is_err());
    }

    #[test]
    fn zero_cumulants() {
        let s = single();
        let z = find_angles(&s, 64, 1e-12).unwrap();
        let list = mgf_zeros(&z, 10_000);
        let u4 = cumulants_from_zeros(&list, 4).unwrap();
        assert!((u4.value + 2.0).abs() <= u4.bound + 1e-12);
        assert!(u4.bound < 1e-10);
        let u6 = cumulants_from_zeros(&list, 6).unwrap();
        assert!((u6.value - 16.0).abs() < 1e-9);
        assert!(cumulants_from_zeros(&list, 2).is_err());

        let c3 = chain3();
        let list = mgf_zeros(&find_angles(&c3, 192, 1e-12).unwrap(), 200);
        let u4 = cumulants_from_zeros(&list, 4).unwrap();
        assert!((u4.value + 694.0 / 27.0).abs() <= u4.bound + 1e-9, "{u4:?}");
    }

    #[test]
    fn scaling_of_single_spin() {
        let sc = scaling_constants(&single()).unwrap();
        let closed = 12f64.powf(0.25) / ((2.0 * PI).sqrt() * 0.5f64.exp());
        assert!((sc.c_n - closed).abs() < 1e-14);
        assert!((sc.d_n - (1.0f64 / 12.0).powf(0.25)).abs() < 1e-14);
        assert_eq!(sc.gamma_n * sc.lambda_n, 0.5);
        let (lo, hi) = c_n_bracket();
        assert!((lo - 0.342_046_232_7).abs() < 1e-10 && (hi - 0.551_631_325_7).abs() < 1e-10);
        assert!(lo <= sc.c_n && sc.c_n <= hi);
    }

    #[test]
    fn tilts() {
        let cw2 = curie_weiss_spectrum(2, 106).unwrap();
        let t = tilt_spectrum(&cw2, 0.25).unwrap();
        let e = std::f64::consts::E;
        assert!((t.moment(2) - 4.0 * e / (e + 1.0)).abs() < 1e-14);
        let t0 = tilt_spectrum(&chain3(), 0.0).unwrap();
        assert!((t0.moment(2) - 41.0 / 9.0).abs() < 1e-14);
        let ts = tilt_spectrum(&single(), 3.7).unwrap();
        for (_, p) in ts.probabilities() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        assert_ne!(t.as_spectrum().cache_key(), cw2.cache_key());
    }

    #[test]
    fn kurtosis_examples() {
        let gauss = SampleMoments { second: 1.0, fourth: 3.0 };
        assert_eq!(normalized_kurtosis(&gauss).unwrap(), 3.0);
        assert_eq!(normalized_kurtosis(&single()).unwrap(), 1.0);
        assert!(normalized_kurtosis(&SampleMoments { second: 0.0, fourth: 1.0 }).is_err());
    }

    #[test]
    fn densities_agree() {
        let s = single();
        let w = WDensity::new(&s).unwrap();
        let norm = 1.0 / ((2.0 * PI).sqrt() * 0.5f64.exp());
        assert!((w.eval(0.0) - norm).abs() < 1e-15);
        for x in [0.3f64, 1.0, 2.2] {
            let closed = (-x * x / 2.0).exp() * x.cosh() * norm;
            assert!((w.eval(x) - closed).abs() < 1e-14);
        }
        let sc = scaling_constants(&s).unwrap();
        let zeros = mgf_zeros(&find_angles(&s, 64, 1e-12).unwrap(), 200);
        let zd = ZeroDensity::new(&s, &zeros).unwrap();
        assert_eq!(zd.eval(0.0).unwrap(), sc.c_n);
        for x in [0.2, 0.7, 1.5, 2.5] {
            let direct = w.eval(x / sc.d_n) / sc.d_n;
            let prod = zd.eval(x).unwrap();
            assert!((direct - prod).abs() < 1e-9 * direct, "x={x}: {direct} vs {prod}");
            let (lo, hi) = density_envelope(sc.c_n, x);
            assert!(lo <= direct && direct <= hi);
        }
    }

    #[test]
    fn tilted_ly_examples() {
        let cw2 = curie_weiss_spectrum(2, 106).unwrap();
        let r = tilted_ly_check(&cw2, 0.1, 64, 1e-12).unwrap();
        assert!((r.gamma_hat - 0.21580).abs() < 1e-5);
        match r.status {
            LyStatus::Certified(z) => assert_eq!(z.count(), 2),
            LyStatus::PreAsymptotic => panic!("expected certification"),
        }
        let r = tilted_ly_check(&cw2, 5.0, 64, 1e-12).unwrap();
        assert!(matches!(r.status, LyStatus::PreAsymptotic));
        let tiny = tilted_ly_check(&cw2, 1e-9, 64, 1e-12).unwrap();
        assert!((tiny.gamma_hat - tiny.gamma_n).abs() < 1e-8);
    }

    #[test]
    fn profile_of_single_spin() {
        let s = single();
        let zeros = mgf_zeros(&find_angles(&s, 64, 1e-12).unwrap(), 2000);
        let prof = power_sum_profile(&zeros, -2.0, &[4, 6]).unwrap();
        assert!((prof[0].value - 2.0).abs() <= prof[0].bound + 1e-12);
        // sum (pi/2 + k pi)^{-6} = 1/15, divided by (1/12)^{3/2}
        let b3 = (1.0 / 15.0) / (1.0f64 / 12.0).powf(1.5);
        assert!((prof[1].value - b3).abs() <= prof[1].bound + 1e-12);
        assert!(prof[1].value <= 2f64.powf(1.5));
    }
}
