//! Precision escalation and the per-size convergence diagnostics shared by the CLI and tests.

use serde::{Deserialize, Serialize};

use crate::analysis::{cumulants_from_spectrum, normalized_kurtosis, tilt_spectrum};
use crate::error::{Error, Result};
use crate::hp::{Beta, DEFAULT_PRECISION_BITS};
use crate::lattice::Boundary;
use crate::limit::{kolmogorov_distance, quartic_model};
use crate::spectrum::{curie_weiss_spectrum, transfer_spectrum_1d, MagnetizationSpectrum};
use crate::zeros::{find_angles, LeeYangSpectrum, DEFAULT_THETA_TOL, GRID_POINTS_PER_SITE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscalationPolicy {
    pub start_bits: u32,
    pub max_bits: u32,
    pub factor: f64,
}

impl Default for EscalationPolicy {
    fn default() -> Self {
        EscalationPolicy {
            start_bits: DEFAULT_PRECISION_BITS,
            max_bits: 1 << 14,
            factor: 1.5,
        }
    }
}

impl EscalationPolicy {
    pub fn starting_at(bits: u32) -> Self {
        EscalationPolicy {
            start_bits: bits,
            ..Self::default()
        }
    }
}

/// Runs `f` at increasing precision until it stops asking for more bits.
pub fn escalate<T>(policy: EscalationPolicy, mut f: impl FnMut(u32) -> Result<T>) -> Result<(T, u32)> {
    let mut bits = policy.start_bits;
    loop {
        match f(bits) {
            Ok(v) => return Ok((v, bits)),
            Err(e) if e.needs_escalation() => {
                let next = (bits as f64 * policy.factor).ceil() as u32;
                if next > policy.max_bits {
                    return Err(e);
                }
                bits = next;
            }
            Err(e) => return Err(e),
        }
    }
}

/// A spectrum together with its certified zeros.
#[derive(Debug, Clone)]
pub struct SolvedSystem {
    pub spectrum: MagnetizationSpectrum,
    pub zeros: LeeYangSpectrum,
    pub precision_bits: u32,
}

/// Builds a spectrum and finds its zeros, raising the precision on root deficits.
pub fn solve_with_escalation(
    policy: EscalationPolicy,
    build: impl Fn(u32) -> Result<MagnetizationSpectrum>,
) -> Result<SolvedSystem> {
    let ((spectrum, zeros), bits) = escalate(policy, |bits| {
        let spec = build(bits)?;
        let grid = GRID_POINTS_PER_SITE * spec.site_count().max(1);
        let zeros = find_angles(&spec, grid, DEFAULT_THETA_TOL)?;
        Ok((spec, zeros))
    })?;
    Ok(SolvedSystem {
        spectrum,
        zeros,
        precision_bits: bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitFamily {
    /// Independent spins with the critical Curie-Weiss tilt.
    Cw,
    /// Nearest-neighbour chains.
    Chain,
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub size: usize,
    pub precision_bits: u32,
    pub u2: f64,
    pub u4: f64,
    pub gamma_n: f64,
    /// `E X^4 / (E X^2)^2` under the tilted law.
    pub kurtosis: f64,
    /// Sup distance between the law of `X / sqrt(E X^2)` and the quartic limit.
    pub kolmogorov: f64,
    pub theta_1: f64,
    /// `alpha_1 (-u4/4!)^{1/4}` with `alpha_1 = theta_1 / 2`.
    pub alpha_1_scaled: f64,
}

pub fn limit_row(system: &SolvedSystem) -> Result<LimitRow> {
    let spec = &system.spectrum;
    let cum = cumulants_from_spectrum(spec, &[2, 4])?;
    if !(cum.u4 < 0.0) {
        return Err(Error::invalid(format!("u4 = {} is not negative", cum.u4)));
    }
    let gamma_n = 1.0 / (2.0 * cum.u2);
    let tilted = tilt_spectrum(spec, gamma_n)?;
    let theta_1 = system.zeros.smallest();
    Ok(LimitRow {
        size: spec.site_count(),
        precision_bits: system.precision_bits,
        u2: cum.u2,
        u4: cum.u4,
        gamma_n,
        kurtosis: normalized_kurtosis(&tilted)?,
        kolmogorov: kolmogorov_distance(&tilted.normalized_atoms(), &quartic_model())?,
        theta_1,
        alpha_1_scaled: 0.5 * theta_1 * (-cum.u4 / 24.0).powf(0.25),
    })
}

/// Solves one member of a family at its starting precision, escalating as needed.
pub fn solve_family_member(
    family: LimitFamily,
    beta: &Beta,
    boundary: Boundary,
    size: usize,
    policy: EscalationPolicy,
) -> Result<SolvedSystem> {
    match family {
        LimitFamily::Cw => solve_with_escalation(policy, |bits| curie_weiss_spectrum(size, bits)),
        LimitFamily::Chain => solve_with_escalation(policy, |bits| transfer_spectrum_1d(size, boundary, beta, bits)),
    }
}

/// Starting precision that comfortably resolves a chain of `n` sites at `beta`.
pub fn chain_precision_hint(n: usize, beta: f64) -> u32 {
    let bits = 5.0 * beta * n as f64 / std::f64::consts::LN_2 + 64.0;
    (bits.ceil() as u32).max(DEFAULT_PRECISION_BITS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn escalation_steps() {
        let mut seen = Vec::new();
        let (v, bits) = escalate(EscalationPolicy::starting_at(100), |b| {
            seen.push(b);
            if b < 300 {
                Err(Error::PrecisionExhausted { theta: 1.0 })
            } else {
                Ok(b)
            }
        })
        .unwrap();
        assert_eq!(seen, vec![100, 150, 225, 338]);
        assert_eq!((v, bits), (338, 338));
        let r: Result<((), u32)> = escalate(EscalationPolicy::default(), |_| Err(Error::invalid("x")));
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cw_rows_approach_quartic() {
        let rows: Vec<LimitRow> = [100, 1000]
            .iter()
            .map(|&n| {
                let s = solve_family_member(LimitFamily::Cw, &Beta::zero(), Boundary::Free, n, EscalationPolicy::default())
                    .unwrap();
                limit_row(&s).unwrap()
            })
            .collect();
        assert!(rows[0].kurtosis < rows[1].kurtosis && rows[1].kurtosis < 2.1885);
        assert!((rows[0].gamma_n - 0.005).abs() < 1e-15);
        assert_eq!(rows[0].theta_1, std::f64::consts::PI);
    }

    #[test]
    fn chain_at_zero_beta_equals_cw() {
        let policy = EscalationPolicy::default();
        let a = limit_row(&solve_family_member(LimitFamily::Chain, &Beta::zero(), Boundary::Free, 50, policy).unwrap())
            .unwrap();
        let b = limit_row(&solve_family_member(LimitFamily::Cw, &Beta::zero(), Boundary::Free, 50, policy).unwrap())
            .unwrap();
        assert!((a.kurtosis - b.kurtosis).abs() < 1e-13);
        assert!((a.kolmogorov - b.kolmogorov).abs() < 1e-12);
    }
}
