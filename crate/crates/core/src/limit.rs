//! Limit densities `K exp(-kappa1 w^4) prod (1 + w^2/a^2) exp(-w^2/a^2)` and distances to them.

use crate::error::{Error, Result};
use crate::special::{gamma, integrate};

pub const QUADRATURE_TOL: f64 = 1e-10;
const TAIL_RATIO: f64 = 1e-17;

/// Constants of the quartic law `C exp(-C^4 x^4) / int e^{-t^4} dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticConstants {
    /// `sqrt(Gamma(3/4) / Gamma(1/4))`.
    pub c: f64,
    /// Density at the origin, `C / (2 Gamma(5/4))`.
    pub k: f64,
    /// `Gamma(5/4) Gamma(1/4) / Gamma(3/4)^2`.
    pub kurtosis: f64,
}

pub fn quartic_constants() -> QuarticConstants {
    let g14 = gamma(0.25);
    let g34 = gamma(0.75);
    let g54 = gamma(1.25);
    let c = (g34 / g14).sqrt();
    QuarticConstants {
        c,
        k: c / (2.0 * g54),
        kurtosis: g54 * g14 / (g34 * g34),
    }
}

/// Density of `X = W / C3` where `W` has density `K exp(-kappa1 w^4) prod_j (1 + w^2/a_j^2) exp(-w^2/a_j^2)`.
#[derive(Debug, Clone)]
pub struct LimitDensityModel {
    kappa1: f64,
    a_list: Vec<f64>,
    k_w: f64,
    c3: f64,
    half_width: f64,
}

impl LimitDensityModel {
    /// Builds the model for a list of `a_j`; `kappa1 = 1 - sum a_j^{-4} / 2` must be nonnegative.
    pub fn new(mut a_list: Vec<f64>) -> Result<Self> {
        if a_list.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("a_j must be positive and finite"));
        }
        a_list.sort_by(f64::total_cmp);
        let s4: f64 = a_list.iter().map(|a| a.powi(-4)).sum();
        let kappa1 = 1.0 - 0.5 * s4;
        if kappa1 < -1e-12 {
            return Err(Error::invalid(format!("sum a_j^-4 / 2 = {} exceeds 1", 0.5 * s4)));
        }
        let kappa1 = kappa1.max(0.0);
        if kappa1 == 0.0 && a_list.is_empty() {
            return Err(Error::invalid("degenerate model"));
        }
        let mut model = LimitDensityModel {
            kappa1,
            a_list,
            k_w: 1.0,
            c3: 1.0,
            half_width: 6.0,
        };
        while model.shape(model.half_width) > TAIL_RATIO {
            model.half_width *= 2.0;
        }
        let l = model.half_width;
        let mass = integrate(|w| model.shape(w), -l, l, QUADRATURE_TOL)?.value;
        let second = integrate(|w| w * w * model.shape(w), -l, l, QUADRATURE_TOL)?.value;
        model.k_w = 1.0 / mass;
        model.c3 = (second / mass).sqrt();
        Ok(model)
    }

    fn shape(&self, w: f64) -> f64 {
        let w2 = w * w;
        let mut log = -self.kappa1 * w2 * w2;
        for a in &self.a_list {
            let y = w2 / (a * a);
            log += y.ln_1p() - y;
        }
        log.exp()
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn a_list(&self) -> &[f64] {
        &self.a_list
    }

    /// `sqrt(E W^2)`, the rescaling that gives `X` unit variance.
    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// Normalizer of the `W` density.
    pub fn w_normalizer(&self) -> f64 {
        self.k_w
    }

    /// Density of `X` at the origin, `C3 * K`.
    pub fn normalizer(&self) -> f64 {
        self.c3 * self.k_w
    }

    pub fn density_w(&self, w: f64) -> f64 {
        self.k_w * self.shape(w)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.c3 * self.density_w(self.c3 * x)
    }

    /// Support half-width (in `x`) beyond which the density is negligible.
    pub fn half_width(&self) -> f64 {
        self.half_width / self.c3
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let ax = x.abs().min(self.half_width());
        let half = integrate(|t| self.density(t), 0.0, ax, QUADRATURE_TOL * 0.1)?.value;
        Ok(if x >= 0.0 { 0.5 + half } else { 0.5 - half })
    }

    pub fn moment(&self, k: u32) -> Result<f64> {
        if k % 2 == 1 {
            return Ok(0.0);
        }
        let l = self.half_width();
        Ok(integrate(|x| x.powi(k as i32) * self.density(x), -l, l, QUADRATURE_TOL)?.value)
    }
}

/// The empty-list model (`kappa1 = 1`): the critical Curie-Weiss limit.
pub fn quartic_model() -> LimitDensityModel {
    LimitDensityModel::new(Vec::new()).expect("quartic model is well posed")
}

pub fn limit_density(model: &LimitDensityModel, x: f64) -> f64 {
    model.density(x)
}

/// Sup distance between the CDF of atoms `(x, p)` and the model CDF, checked at every jump.
pub fn kolmogorov_distance(atoms: &[(f64, f64)], model: &LimitDensityModel) -> Result<f64> {
    let mut atoms: Vec<(f64, f64)> = atoms.to_vec();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("atoms carry no mass"));
    }
    let mut model_cdf = 0.0;
    let mut last_x = f64::NEG_INFINITY;
    let lo = -model.half_width();
    let mut emp = 0.0;
    let mut worst = 0f64;
    for &(x, p) in &atoms {
        let from = last_x.max(lo);
        let to = x.clamp(lo, -lo);
        if to > from {
            model_cdf += integrate(|t| model.density(t), from, to, QUADRATURE_TOL * 1e-3)?.value;
        }
        last_x = x.max(last_x);
        worst = worst.max((emp - model_cdf).abs());
        emp += p / total;
        worst = worst.max((emp - model_cdf).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_constants_match_gamma_arithmetic() {
        let q = quartic_constants();
        assert!((q.c * q.c - 0.337_989_120).abs() < 1e-8);
        assert!((q.k - 0.320_700_975).abs() < 1e-8);
        let alt = gamma(0.75).sqrt() / (4.0 * gamma(1.25).powf(1.5));
        assert!((q.k - alt).abs() < 1e-15);
        assert!((q.kurtosis - 2.188_439_615).abs() < 1e-8);
    }

    #[test]
    fn quartic_model_is_unit_variance() {
        let m = quartic_model();
        let q = quartic_constants();
        assert_eq!(m.kappa1(), 1.0);
        assert!((m.c3() - q.c).abs() < 1e-11);
        assert!((m.normalizer() - q.k).abs() < 1e-11);
        assert!((m.moment(0).unwrap() - 1.0).abs() < 1e-10);
        assert!((m.moment(2).unwrap() - 1.0).abs() < 1e-10);
        assert!((m.moment(4).unwrap() - q.kurtosis).abs() < 1e-9);
        assert!((m.cdf(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.cdf(-8.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn general_model_identity() {
        let m = LimitDensityModel::new(vec![1.5, 2.0, 3.0]).unwrap();
        let s: f64 = [1.5f64, 2.0, 3.0].iter().map(|a| a.powi(-4)).sum();
        assert!((m.kappa1() + 0.5 * s - 1.0).abs() < 1e-12);
        assert!((m.moment(0).unwrap() - 1.0).abs() < 1e-9);
        assert!((m.moment(2).unwrap() - 1.0).abs() < 1e-9);
        assert!(LimitDensityModel::new(vec![0.5]).is_err());
    }

    #[test]
    fn distance_to_self_is_small() {
        let m = quartic_model();
        let n = 4000;
        let l = m.half_width();
        let h = 2.0 * l / n as f64;
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let a = -l + i as f64 * h;
                (a + h, m.cdf(a + h).unwrap() - m.cdf(a).unwrap())
            })
            .collect();
        // a discretization of the model is off only by the largest single jump
        let jump = atoms.iter().map(|a| a.1).fold(0.0, f64::max);
        assert!((kolmogorov_distance(&atoms, &m).unwrap() - jump).abs() < 1e-9);
        // two atoms at +-1 against a continuous law
        let d = kolmogorov_distance(&[(-1.0, 0.5), (1.0, 0.5)], &m).unwrap();
        let f = m.cdf(-1.0).unwrap();
        assert!((d - (0.5 - f).max(f)).abs() < 1e-10);
    }
}
