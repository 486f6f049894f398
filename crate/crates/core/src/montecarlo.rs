//! Single-spin Metropolis sampling of the Curie-Weiss-perturbed Ising measure.
//!
//! Sites are visited in lexicographic order; each visit proposes a flip with
//! probability 1/2 and accepts it with probability `min(1, e^{dE})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::analysis::MomentSource;
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

pub const MIN_BATCHES: usize = 32;

/// How the Curie-Weiss coupling is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GammaMode {
    Explicit { gamma: f64 },
    /// `gamma = 1 / (2 <Y^2>)` with `<Y^2>` known exactly.
    FromSecondMoment { second_moment: f64 },
    /// `gamma = 1 / (2 <Y^2>)` with `<Y^2>` estimated by a `gamma = 0` pre-run.
    Calibrate { sweeps: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(skip)]
    pub lattice: Option<LatticeSpec>,
    pub beta: f64,
    pub gamma: GammaMode,
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub master_seed: u64,
    pub thinning: usize,
    pub batches: usize,
}

impl McConfig {
    pub fn new(lattice: LatticeSpec, beta: f64, gamma: GammaMode) -> Self {
        McConfig {
            lattice: Some(lattice),
            beta,
            gamma,
            sweeps: 20_000,
            burn_in: 1_000,
            chains: 4,
            master_seed: 0,
            thinning: 1,
            batches: MIN_BATCHES,
        }
    }

    fn validate(&self) -> Result<&LatticeSpec> {
        let lattice = self.lattice.as_ref().ok_or_else(|| Error::invalid("no lattice"))?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("beta must be finite and >= 0"));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::invalid("sweeps must exceed burn_in"));
        }
        if self.chains == 0 || self.thinning == 0 {
            return Err(Error::invalid("chains and thinning must be positive"));
        }
        if self.batches < MIN_BATCHES {
            return Err(Error::invalid(format!("need at least {MIN_BATCHES} batches")));
        }
        if (self.sweeps - self.burn_in) / self.thinning < self.batches {
            return Err(Error::invalid("fewer recorded sweeps than batches"));
        }
        Ok(lattice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimates {
    pub gamma: f64,
    pub gamma_source: String,
    /// `E Y^k` for k = 1..4.
    pub moments: [Estimate; 4],
    pub acceptance_rate: f64,
    /// Stream index of each chain (all chains share `master_seed`).
    pub chain_streams: Vec<u64>,
    /// Per-batch `(E Y^2, E Y^4)` in chain order.
    pub batch_means: Vec<(f64, f64)>,
    /// Magnetization histogram, mass per value.
    pub histogram: BTreeMap<i64, f64>,
}

impl McEstimates {
    pub fn moment(&self, k: usize) -> Estimate {
        self.moments[k - 1]
    }
}

impl MomentSource for McEstimates {
    fn second_moment(&self) -> f64 {
        self.moments[1].mean
    }
    fn fourth_moment(&self) -> f64 {
        self.moments[3].mean
    }
}

struct ChainOutput {
    batches: Vec<[f64; 4]>,
    accepted: u64,
    proposed: u64,
    histogram: BTreeMap<i64, u64>,
}

fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_chain(
    adj: &[Vec<usize>],
    beta: f64,
    gamma: f64,
    cfg: &McConfig,
    stream: u64,
) -> ChainOutput {
    let n = adj.len();
    let mut rng = chain_rng(cfg.master_seed, stream);
    let mut spins: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    let mut y: i64 = spins.iter().map(|&s| s as i64).sum();
    let recorded = (cfg.sweeps - cfg.burn_in) / cfg.thinning;
    let per_batch = recorded / cfg.batches;
    let mut sums = vec![[0f64; 4]; cfg.batches];
    let mut histogram = BTreeMap::new();
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let mut kept = 0usize;
    for sweep in 0..cfg.sweeps {
        for u in 0..n {
            // lazy proposal: without it a sweep at beta = gamma = 0 is a deterministic global flip
            if rng.gen::<bool>() {
                continue;
            }
            let s = spins[u] as i64;
            let field: i64 = adj[u].iter().map(|&v| spins[v] as i64).sum();
            let y_new = y - 2 * s;
            let delta = -2.0 * beta * (s * field) as f64 + gamma * (y_new * y_new - y * y) as f64;
            proposed += 1;
            if delta >= 0.0 || rng.gen::<f64>() < delta.exp() {
                spins[u] = -spins[u];
                y = y_new;
                accepted += 1;
            }
        }
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thinning == 0 {
            let batch = kept / per_batch;
            if batch < cfg.batches {
                let yf = y as f64;
                let b = &mut sums[batch];
                b[0] += yf;
                b[1] += yf * yf;
                b[2] += yf * yf * yf;
                b[3] += yf * yf * yf * yf;
                *histogram.entry(y).or_insert(0u64) += 1;
            }
            kept += 1;
        }
    }
    for b in sums.iter_mut() {
        for v in b.iter_mut() {
            *v /= per_batch as f64;
        }
    }
    ChainOutput {
        batches: sums,
        accepted,
        proposed,
        histogram,
    }
}

fn batch_estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

fn resolve_gamma(cfg: &McConfig, adj: &[Vec<usize>]) -> Result<(f64, String)> {
    Ok(match cfg.gamma {
        GammaMode::Explicit { gamma } => {
            if !(gamma.is_finite() && gamma >= 0.0) {
                return Err(Error::invalid("gamma must be finite and >= 0"));
            }
            (gamma, "explicit".into())
        }
        GammaMode::FromSecondMoment { second_moment } => {
            if !(second_moment > 0.0) {
                return Err(Error::invalid("gamma unresolved: second moment must be positive"));
            }
            (1.0 / (2.0 * second_moment), "exact-spectrum".into())
        }
        GammaMode::Calibrate { sweeps } => {
            let pre = McConfig {
                gamma: GammaMode::Explicit { gamma: 0.0 },
                sweeps,
                burn_in: sweeps / 10,
                chains: 1,
                thinning: 1,
                batches: MIN_BATCHES,
                ..cfg.clone()
            };
            pre.validate()?;
            let out = run_chain(adj, cfg.beta, 0.0, &pre, u64::MAX);
            let m2 = out.batches.iter().map(|b| b[1]).sum::<f64>() / out.batches.len() as f64;
            (1.0 / (2.0 * m2), format!("calibration({sweeps} sweeps, E Y^2 = {m2:?})"))
        }
    })
}

/// Runs independent Metropolis chains and pools their batch means.
pub fn mc_run(cfg: &McConfig) -> Result<McEstimates> {
    let lattice = cfg.validate()?;
    let adj = lattice.neighbors();
    let (gamma, gamma_source) = resolve_gamma(cfg, &adj)?;
    let outputs: Vec<ChainOutput> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| run_chain(&adj, cfg.beta, gamma, cfg, c))
        .collect();

    let all: Vec<[f64; 4]> = outputs.iter().flat_map(|o| o.batches.iter().copied()).collect();
    let moments = [0, 1, 2, 3].map(|k| batch_estimate(&all.iter().map(|b| b[k]).collect::<Vec<_>>()));
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for o in &outputs {
        for (&y, &c) in &o.histogram {
            *counts.entry(y).or_insert(0) += c;
        }
    }
    let total: u64 = counts.values().sum();
    let histogram = counts
        .into_iter()
        .map(|(y, c)| (y, c as f64 / total as f64))
        .collect();
    let accepted: u64 = outputs.iter().map(|o| o.accepted).sum();
    let proposed: u64 = outputs.iter().map(|o| o.proposed).sum();
    Ok(McEstimates {
        gamma,
        gamma_source,
        moments,
        acceptance_rate: accepted as f64 / proposed as f64,
        chain_streams: (0..cfg.chains as u64).collect(),
        batch_means: all.iter().map(|b| (b[1], b[3])).collect(),
        histogram,
    })
}

/// Probability histogram of `Y / sqrt(E Y^2)` on bins symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

pub fn mc_histogram(est: &McEstimates, bins: usize) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::invalid("need at least 10 bins"));
    }
    let scale = est.second_moment().sqrt();
    if !(scale > 0.0) {
        return Err(Error::invalid("second moment must be positive"));
    }
    let max = est
        .histogram
        .keys()
        .map(|&y| (y as f64 / scale).abs())
        .fold(0.0, f64::max);
    let r = if max > 0.0 { max * (1.0 + 1e-9) } else { 1.0 };
    let width = 2.0 * r / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| -r + i as f64 * width).collect();
    let mut masses = vec![0.0; bins];
    for (&y, &p) in &est.histogram {
        let pos = (y as f64 / scale + r) / width;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 && nearest > 0.0 && (nearest as usize) < bins {
            // atom on an interior edge: split evenly
            masses[nearest as usize - 1] += 0.5 * p;
            masses[nearest as usize] += 0.5 * p;
        } else {
            masses[(pos.floor() as usize).min(bins - 1)] += p;
        }
    }
    let total: f64 = masses.iter().sum();
    for m in masses.iter_mut() {
        *m /= total;
    }
    Ok(Histogram { edges, masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    fn two_sites() -> LatticeSpec {
        LatticeSpec::chain(2, Boundary::Free).unwrap()
    }

    #[test]
    fn independent_spins() {
        let l = LatticeSpec::chain(10, Boundary::Free).unwrap();
        let mut cfg = McConfig::new(l, 0.0, GammaMode::Explicit { gamma: 0.0 });
        cfg.sweeps = 5000;
        cfg.burn_in = 100;
        cfg.master_seed = 11;
        let est = mc_run(&cfg).unwrap();
        let m2 = est.moment(2);
        assert!((m2.mean - 10.0).abs() < 3.0 * m2.std_error, "{m2:?}");
        assert!((est.histogram.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_stationary_law() {
        // P(Y=±2) ∝ e^{beta + 4 gamma}, P(Y=0) ∝ 2 e^{-beta}
        let (beta, gamma) = (0.4, 0.1);
        let mut cfg = McConfig::new(two_sites(), beta, GammaMode::Explicit { gamma });
        cfg.sweeps = 40_000;
        cfg.master_seed = 3;
        let est = mc_run(&cfg).unwrap();
        let a = (beta + 4.0 * gamma).exp();
        let b = (-beta as f64).exp();
        let exact_m2 = 2.0 * a * 4.0 / (2.0 * a + 2.0 * b);
        let m2 = est.moment(2);
        assert!((m2.mean - exact_m2).abs() < 3.0 * m2.std_error, "{m2:?} vs {exact_m2}");
    }

    #[test]
    fn reproducible() {
        let l = LatticeSpec::chain(5, Boundary::Periodic).unwrap();
        let mut cfg = McConfig::new(l, 0.3, GammaMode::Calibrate { sweeps: 2000 });
        cfg.sweeps = 3000;
        cfg.master_seed = 99;
        let a = mc_run(&cfg).unwrap();
        let b = mc_run(&cfg).unwrap();
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.batch_means, b.batch_means);
        assert!(a.gamma_source.starts_with("calibration"));
    }

    #[test]
    fn config_errors() {
        let mut cfg = McConfig::new(two_sites(), 0.1, GammaMode::Explicit { gamma: 0.0 });
        cfg.batches = 4;
        assert!(mc_run(&cfg).is_err());
        cfg.batches = 32;
        cfg.burn_in = cfg.sweeps;
        assert!(mc_run(&cfg).is_err());
        let cfg = McConfig::new(two_sites(), 0.1, GammaMode::FromSecondMoment { second_moment: 0.0 });
        assert!(mc_run(&cfg).is_err());
    }

    #[test]
    fn histogram_symmetric_edges() {
        let l = LatticeSpec::chain(6, Boundary::Free).unwrap();
        let mut cfg = McConfig::new(l, 0.0, GammaMode::Explicit { gamma: 0.0 });
        cfg.sweeps = 2000;
        let est = mc_run(&cfg).unwrap();
        let h = mc_histogram(&est, 12).unwrap();
        assert_eq!(h.edges.len(), 13);
        for (a, b) in h.edges.iter().zip(h.edges.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mc_histogram(&est, 5).is_err());
    }
}
