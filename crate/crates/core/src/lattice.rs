//! Hypercubic boxes, spin configurations and the (perturbed) Ising exponent.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Boundary::Free),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::invalid(format!("unknown boundary '{other}'"))),
        }
    }
}

/// A box of `side^d` sites with nearest-neighbour edges.
///
/// Sites are indexed lexicographically: coordinate 0 is the most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    dimension: u32,
    radius: Option<u32>,
    side: usize,
    site_count: usize,
    boundary: Boundary,
    edges: Vec<(usize, usize)>,
}

/// The box `[-n, n]^d` with side `2n+1`.
pub fn build_lattice(d: u32, n: u32, boundary: Boundary) -> Result<LatticeSpec> {
    let side = 2 * n as u64 + 1;
    let mut spec = LatticeSpec::hypercube(d, side, boundary)?;
    spec.radius = Some(n);
    Ok(spec)
}

impl LatticeSpec {
    /// Generalized builder: a `d`-dimensional box of arbitrary side (even sides allowed).
    pub fn hypercube(d: u32, side: u64, boundary: Boundary) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if side == 0 {
            return Err(Error::invalid("side must be at least 1"));
        }
        if boundary == Boundary::Periodic && side < 3 {
            return Err(Error::invalid("periodic boundary needs side >= 3"));
        }
        let overflow = || Error::IndexOverflow { d, side };
        let n_sites = side.checked_pow(d).ok_or_else(overflow)?;
        let n_edges = n_sites.checked_mul(d as u64).ok_or_else(overflow)?;
        let site_count = usize::try_from(n_sites).map_err(|_| overflow())?;
        usize::try_from(n_edges).map_err(|_| overflow())?;
        let side = side as usize;

        let mut edges = Vec::new();
        let mut stride = 1usize;
        let mut strides = vec![0usize; d as usize];
        for axis in (0..d as usize).rev() {
            strides[axis] = stride;
            stride *= side;
        }
        for site in 0..site_count {
            for &s in &strides {
                let coord = (site / s) % side;
                if coord + 1 < side {
                    edges.push((site, site + s));
                } else if boundary == Boundary::Periodic {
                    let wrapped = site - coord * s;
                    edges.push((wrapped.min(site), wrapped.max(site)));
                }
            }
        }
        edges.sort_unstable();
        Ok(LatticeSpec {
            dimension: d,
            radius: None,
            side,
            site_count,
            boundary,
            edges,
        })
    }

    /// A one-dimensional chain of `len` sites (any length).
    pub fn chain(len: usize, boundary: Boundary) -> Result<Self> {
        Self::hypercube(1, len as u64, boundary)
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// `n` when built as `[-n, n]^d`.
    pub fn radius(&self) -> Option<u32> {
        self.radius
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.site_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// `n` for radius-built boxes, the side length otherwise; matches the cache `n_or_N` field.
    pub fn extent(&self) -> u64 {
        match self.radius {
            _ if self.dimension == 1 => self.site_count as u64,
            Some(n) => n as u64,
            None => self.side as u64,
        }
    }
}

/// A configuration of `±1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("spin value {bad} is not +1 or -1")));
        }
        Ok(SpinConfiguration(spins))
    }

    pub fn uniform(len: usize, spin: i8) -> Result<Self> {
        Self::new(vec![spin; len])
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        SpinConfiguration(self.0.iter().map(|s| -s).collect())
    }
}

/// Inverse temperature, Curie-Weiss coupling and external field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
    pub field: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, field: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !field.is_finite() {
            return Err(Error::invalid("field must be finite"));
        }
        Ok(ModelParams { beta, gamma, field })
    }
}

fn check_len(config: &SpinConfiguration, lattice: &LatticeSpec) -> Result<()> {
    if config.len() != lattice.site_count() {
        return Err(Error::LengthMismatch {
            expected: lattice.site_count(),
            got: config.len(),
        });
    }
    Ok(())
}

/// `beta * sum over edges of s_u s_v`; larger is more probable.
pub fn base_energy(config: &SpinConfiguration, lattice: &LatticeSpec, beta: f64) -> Result<f64> {
    check_len(config, lattice)?;
    let s = config.spins();
    let pair: i64 = lattice
        .edges()
        .iter()
        .map(|&(u, v)| (s[u] * s[v]) as i64)
        .sum();
    Ok(beta * pair as f64)
}

pub fn total_magnetization(config: &SpinConfiguration) -> i64 {
    config.spins().iter().map(|&s| s as i64).sum()
}

/// `base_energy + gamma * Y^2`.
pub fn perturbed_energy(
    config: &SpinConfiguration,
    lattice: &LatticeSpec,
    beta: f64,
    gamma: f64,
) -> Result<f64> {
    let y = total_magnetization(config) as f64;
    Ok(base_energy(config, lattice, beta)? + gamma * y * y)
}
