//! Magnetization-resolved weight spectra `A_m` and their moment generating function.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hp::{check_precision, log2_abs, Beta};
use crate::lattice::{Boundary, LatticeSpec};

pub const BRUTE_FORCE_CAP: usize = 26;
pub const TRANSFER_2D_MAX_WIDTH: usize = 9;
pub const TRANSFER_2D_MAX_PERIODIC_WIDTH: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    BruteForce,
    Transfer1d,
    Transfer2d,
    CurieWeiss,
    Tilted,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::BruteForce => "brute-force",
            Engine::Transfer1d => "transfer-1d",
            Engine::Transfer2d => "transfer-2d",
            Engine::CurieWeiss => "curie-weiss",
            Engine::Tilted => "tilted",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "brute-force" | "brute" => Engine::BruteForce,
            "transfer-1d" => Engine::Transfer1d,
            "transfer-2d" => Engine::Transfer2d,
            "curie-weiss" | "binomial" => Engine::CurieWeiss,
            "tilted" => Engine::Tilted,
            other => return Err(Error::invalid(format!("unknown engine '{other}'"))),
        })
    }
}

/// Where a spectrum came from; `dimension` is 0 for the complete-graph (Curie-Weiss) case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub dimension: u32,
    pub extent: u64,
    pub boundary: Boundary,
}

/// Weights `A_m` for `m = -N, -N+2, ..., N`, stored scaled so the largest is 1.
#[derive(Debug, Clone)]
pub struct MagnetizationSpectrum {
    geometry: Geometry,
    site_count: usize,
    beta: Beta,
    precision_bits: u32,
    engine: Engine,
    tilt: Option<String>,
    weights: Vec<Float>,
    log_scale: Float,
}

pub(crate) struct SpectrumMeta {
    pub geometry: Geometry,
    pub site_count: usize,
    pub beta: Beta,
    pub precision_bits: u32,
    pub engine: Engine,
    pub tilt: Option<String>,
}

impl MagnetizationSpectrum {
    /// Symmetrizes, validates and rescales raw weights (index `k` = number of up spins).
    pub(crate) fn from_raw(meta: SpectrumMeta, raw: Vec<Float>, log_offset: Float) -> Result<Self> {
        let n = meta.site_count;
        if raw.len() != n + 1 {
            return Err(Error::Format(format!("expected {} weights, got {}", n + 1, raw.len())));
        }
        let p = meta.precision_bits;
        let mut w: Vec<Float> = raw.into_iter().map(|x| Float::with_val(p, x)).collect();
        for k in 0..=n / 2 {
            let j = n - k;
            if k != j {
                let avg = Float::with_val(p, &w[k] + &w[j]) / 2u32;
                w[k] = avg.clone();
                w[j] = avg;
            }
        }
        for (k, x) in w.iter().enumerate() {
            if !(x.is_finite() && *x > 0) {
                return Err(Error::EmptyClass(2 * k as i64 - n as i64));
            }
        }
        let max = w.iter().max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap().clone();
        for x in w.iter_mut() {
            *x /= &max;
        }
        let log_scale = Float::with_val(p, max.ln_ref()) + log_offset;
        Ok(MagnetizationSpectrum {
            geometry: meta.geometry,
            site_count: n,
            beta: meta.beta,
            precision_bits: p,
            engine: meta.engine,
            tilt: meta.tilt,
            weights: w,
            log_scale,
        })
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn boundary(&self) -> Boundary {
        self.geometry.boundary
    }

    /// Decimal string of the tilt coefficient for tilted spectra.
    pub fn tilt(&self) -> Option<&str> {
        self.tilt.as_deref()
    }

    /// Magnetization belonging to weight index `k`.
    pub fn magnetization(&self, k: usize) -> i64 {
        2 * k as i64 - self.site_count as i64
    }

    pub fn magnetizations(&self) -> impl Iterator<Item = i64> + '_ {
        (0..=self.site_count).map(|k| self.magnetization(k))
    }

    /// Scaled weights; the true `A_m` is `weights()[k] * exp(log_scale())`.
    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn log_scale(&self) -> &Float {
        &self.log_scale
    }

    pub fn log_weight(&self, m: i64) -> Option<Float> {
        let n = self.site_count as i64;
        if m.abs() > n || (m + n) % 2 != 0 {
            return None;
        }
        let k = ((m + n) / 2) as usize;
        Some(Float::with_val(self.precision_bits, self.weights[k].ln_ref()) + &self.log_scale)
    }

    /// `(m, ln A_m)` pairs in f64.
    pub fn log_weights_f64(&self) -> Vec<(i64, f64)> {
        self.magnetizations()
            .map(|m| (m, self.log_weight(m).unwrap().to_f64()))
            .collect()
    }

    /// Scaled sum of weights (the partition function divided by `exp(log_scale)`).
    pub fn weight_sum(&self) -> Float {
        let mut s = Float::new(self.precision_bits);
        for w in &self.weights {
            s += w;
        }
        s
    }

    pub fn ln_partition(&self) -> Float {
        self.weight_sum().ln() + &self.log_scale
    }

    /// Spectra of independent spins, whose circle function is exactly `(2cos(theta/2))^N`.
    pub fn is_independent_spins(&self) -> bool {
        self.beta.is_zero() && self.tilt.is_none()
    }

    /// Canonical content hash of the parameters that determine this spectrum.
    pub fn cache_key(&self) -> String {
        cache_key(
            self.geometry.dimension,
            self.site_count,
            self.geometry.boundary,
            &self.beta,
            self.precision_bits,
            self.engine,
            self.tilt.as_deref(),
        )
    }

    /// `<Y^k>`; odd orders return exactly 0.
    pub fn moment(&self, k: u32) -> f64 {
        self.moment_hp(k).to_f64()
    }

    pub fn moment_hp(&self, k: u32) -> Float {
        let p = self.precision_bits + 16;
        if k % 2 == 1 {
            return Float::new(p);
        }
        let mut num = Float::new(p);
        let mut den = Float::new(p);
        for (idx, w) in self.weights.iter().enumerate() {
            let m = self.magnetization(idx);
            let mk = Float::with_val(p, m).pow(k);
            num += mk * w;
            den += w;
        }
        num / den
    }

    /// `<exp(zY)>` evaluated at the spectrum's precision.
    ///
    /// Fails with [`Error::LossOfSignificance`] when cancellation leaves fewer than 40 bits.
    pub fn mgf(&self, z: Complex64) -> Result<Complex64> {
        let (v, ln_scale) = self.mgf_scaled(z)?;
        Ok(v * ln_scale.exp())
    }

    /// `<exp(zY)>` as `(mantissa, ln scale)` so large arguments cannot overflow.
    pub fn mgf_scaled(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let n = self.site_count;
        let p = self.precision_bits + 32 + (usize::BITS - n.leading_zeros());
        let x = Float::with_val(p, z.re);
        let y = Float::with_val(p, z.im);
        // exp(z m) = exp(x m) (cos(y m) + i sin(y m)); shift by the largest real part.
        let shift = x.to_f64().abs() * n as f64;
        let mut re = Float::new(p);
        let mut im = Float::new(p);
        let mut abs = Float::new(p);
        let mut den = Float::new(p);
        for (k, w) in self.weights.iter().enumerate() {
            let m = self.magnetization(k);
            let mag = Float::with_val(p, &x * m) - shift;
            let mag = mag.exp() * w;
            let (s, c) = Float::with_val(p, &y * m).sin_cos(Float::new(p));
            re += Float::with_val(p, &c * &mag);
            im += Float::with_val(p, &s * &mag);
            abs += &mag;
            den += w;
        }
        let modulus = Float::with_val(p, re.hypot_ref(&im));
        let lost = log2_abs(&abs) - log2_abs(&modulus);
        let budget = self.precision_bits as f64;
        if lost > budget - 8.0 {
            // Indistinguishable from an exact zero at this precision.
            re.assign(0u32);
            im.assign(0u32);
        } else if lost > budget - 40.0 {
            return Err(Error::LossOfSignificance {
                lost_bits: lost,
                precision_bits: self.precision_bits,
            });
        }
        let scale = Float::with_val(p, abs.ln_ref()) - Float::with_val(p, den.ln_ref());
        let scale_f = scale.to_f64() + shift;
        let re = (re / &abs).to_f64();
        let im = (im / &abs).to_f64();
        Ok((Complex64::new(re, im), scale_f))
    }
}

pub fn cache_key(
    d: u32,
    n: usize,
    boundary: Boundary,
    beta: &Beta,
    precision_bits: u32,
    engine: Engine,
    tilt: Option<&str>,
) -> String {
    let mut canonical = format!(
        "d={d};N={n};boundary={boundary};beta={beta};precision_bits={precision_bits};engine={engine}"
    );
    if let Some(g) = tilt {
        canonical.push_str(&format!(";tilt={g}"));
    }
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn lattice_meta(lattice: &LatticeSpec, beta: &Beta, bits: u32, engine: Engine) -> SpectrumMeta {
    SpectrumMeta {
        geometry: Geometry {
            dimension: lattice.dimension(),
            extent: lattice.extent(),
            boundary: lattice.boundary(),
        },
        site_count: lattice.site_count(),
        beta: beta.clone(),
        precision_bits: bits,
        engine,
        tilt: None,
    }
}

/// `exp(beta * j)` for `j` in `lo..=hi`.
fn exp_table(beta: &Float, lo: i64, hi: i64, bits: u32) -> Vec<Float> {
    (lo..=hi)
        .map(|j| Float::with_val(bits, beta * j).exp())
        .collect()
}

/// Exact enumeration over all configurations with the first spin up.
pub fn enumerate_spectrum(
    lattice: &LatticeSpec,
    beta: &Beta,
    precision_bits: u32,
) -> Result<MagnetizationSpectrum> {
    enumerate_spectrum_capped(lattice, beta, precision_bits, BRUTE_FORCE_CAP)
}

pub fn enumerate_spectrum_capped(
    lattice: &LatticeSpec,
    beta: &Beta,
    precision_bits: u32,
    cap: usize,
) -> Result<MagnetizationSpectrum> {
    check_precision(precision_bits)?;
    let n = lattice.site_count();
    if n > cap || n > 63 {
        return Err(Error::BruteForceCap { sites: n, cap });
    }
    let n_edges = lattice.edges().len();
    let adj = lattice.neighbors();
    let masks: Vec<u64> = adj
        .iter()
        .map(|nb| nb.iter().fold(0u64, |m, &v| m | (1u64 << v)))
        .collect();
    let degree: Vec<i64> = adj.iter().map(|nb| nb.len() as i64).collect();

    let free = n - 1;
    let chunk_bits = free.min(8);
    let low_bits = free - chunk_bits;
    let width = n_edges + 1;

    let histogram = |chunk: u64| -> Vec<u64> {
        let mut hist = vec![0u64; (n + 1) * width];
        let mut spins: u64 = 1 | (chunk << (1 + low_bits));
        let mut ups = spins.count_ones() as usize;
        let mut agree = lattice
            .edges()
            .iter()
            .filter(|&&(u, v)| (spins >> u) & 1 == (spins >> v) & 1)
            .count() as i64;
        hist[ups * width + agree as usize] += 1;
        for g in 1u64..(1u64 << low_bits) {
            let site = 1 + g.trailing_zeros() as usize;
            let up = (spins >> site) & 1 == 1;
            let same = if up { spins & masks[site] } else { !spins & masks[site] }.count_ones() as i64;
            agree += degree[site] - 2 * same;
            spins ^= 1u64 << site;
            if up {
                ups -= 1;
            } else {
                ups += 1;
            }
            hist[ups * width + agree as usize] += 1;
        }
        hist
    };

    let parts: Vec<Vec<u64>> = (0..(1u64 << chunk_bits)).into_par_iter().map(histogram).collect();
    let mut counts = vec![0u64; (n + 1) * width];
    for part in &parts {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }

    let p = precision_bits;
    let b = beta.to_float(p);
    let e = n_edges as i64;
    let boltz: Vec<Float> = (0..=e).map(|a| Float::with_val(p, &b * (2 * a - e)).exp()).collect();
    let mut raw = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = Float::new(p);
        for a in 0..width {
            let c = counts[k * width + a] + counts[(n - k) * width + a];
            if c > 0 {
                acc += Float::with_val(p, &boltz[a] * c);
            }
        }
        raw.push(acc);
    }
    MagnetizationSpectrum::from_raw(
        lattice_meta(lattice, beta, p, Engine::BruteForce),
        raw,
        Float::new(p),
    )
}

/// Transfer matrix along a chain of `len` sites; state is (last spin, up count).
pub fn transfer_spectrum_1d(
    len: usize,
    boundary: Boundary,
    beta: &Beta,
    precision_bits: u32,
) -> Result<MagnetizationSpectrum> {
    check_precision(precision_bits)?;
    let lattice = LatticeSpec::chain(len, boundary)?;
    let p = precision_bits + 8;
    let b = beta.to_float(p);
    let tab = exp_table(&b, -1, 1, p);
    let (e_minus, e_plus) = (&tab[0], &tab[2]);

    // up[u] / down[u]: last spin up / down, u up spins so far; first spin fixed up.
    let mut up = vec![Float::new(p); len + 1];
    let mut down = vec![Float::new(p); len + 1];
    up[1] = Float::with_val(p, 1);
    let mut next_up = up.clone();
    let mut next_down = down.clone();
    for t in 1..len {
        // t sites placed, u ranges over 1..=t
        for u in 1..=t + 1 {
            let mut a = Float::with_val(p, &up[u - 1] * e_plus);
            a += &down[u - 1] * e_minus;
            next_up[u] = a;
        }
        for u in 1..=t {
            let mut a = Float::with_val(p, &up[u] * e_minus);
            a += &down[u] * e_plus;
            next_down[u] = a;
        }
        std::mem::swap(&mut up, &mut next_up);
        std::mem::swap(&mut down, &mut next_down);
    }
    let mut raw: Vec<Float> = vec![Float::new(p); len + 1];
    for u in 0..=len {
        let mut b_u = Float::new(p);
        match boundary {
            Boundary::Free => {
                b_u += &up[u];
                b_u += &down[u];
            }
            Boundary::Periodic => {
                b_u += &up[u] * e_plus;
                b_u += &down[u] * e_minus;
            }
        }
        raw[u] = b_u;
    }
    // The flipped configurations (first spin down) mirror u -> len - u.
    let mirrored: Vec<Float> = (0..=len)
        .map(|u| Float::with_val(p, &raw[u] + &raw[len - u]))
        .collect();
    MagnetizationSpectrum::from_raw(
        lattice_meta(&lattice, beta, precision_bits, Engine::Transfer1d),
        mirrored,
        Float::new(precision_bits),
    )
}

/// Site-by-site transfer matrix on a `(2n+1) x (2n+1)` square.
pub fn transfer_spectrum_2d(
    n: u32,
    boundary: Boundary,
    beta: &Beta,
    precision_bits: u32,
) -> Result<MagnetizationSpectrum> {
    check_precision(precision_bits)?;
    let lattice = crate::lattice::build_lattice(2, n, boundary)?;
    let side = lattice.side();
    let cap = match boundary {
        Boundary::Free => TRANSFER_2D_MAX_WIDTH,
        Boundary::Periodic => TRANSFER_2D_MAX_PERIODIC_WIDTH,
    };
    if side > cap {
        return Err(Error::UnsupportedLattice(format!(
            "width {side} exceeds the {boundary} cap {cap}"
        )));
    }
    let p = precision_bits + 8;
    let b = beta.to_float(p);
    let sites = side * side;
    let tab = exp_table(&b, -4, 4, p);
    let boltz = |j: i64| &tab[(j + 4) as usize];
    let periodic = boundary == Boundary::Periodic;
    let spin = |f: u32, c: usize| if (f >> c) & 1 == 1 { 1i64 } else { -1 };

    let row_energy = |f: u32| -> i64 {
        let mut e: i64 = (0..side.saturating_sub(1)).map(|c| spin(f, c) * spin(f, c + 1)).sum();
        if periodic {
            e += spin(f, side - 1) * spin(f, 0);
        }
        e
    };
    let first_rows: Vec<u32> = (0..(1u32 << side)).filter(|f| f & 1 == 1).collect();
    let states = 1usize << side;
    let stride = sites + 1;

    let run = |rows: &[u32], first: Option<u32>| -> Vec<Float> {
        let mut cur = vec![Float::new(p); states * stride];
        let mut nxt = cur.clone();
        for &f in rows {
            let u = f.count_ones() as usize;
            cur[f as usize * stride + u] = Float::with_val(p, boltz(row_energy(f)));
        }
        for r in 1..side {
            for c in 0..side {
                let placed = r * side + c;
                for x in nxt.iter_mut() {
                    x.assign(0u32);
                }
                for f in 0..states as u32 {
                    let mut field = spin(f, c);
                    if c > 0 {
                        field += spin(f, c - 1);
                    }
                    if periodic && c == side - 1 {
                        field += spin(f, 0);
                    }
                    if let (true, Some(f0)) = (r == side - 1, first) {
                        field += spin(f0, c);
                    }
                    let up_state = (f | (1 << c)) as usize;
                    let down_state = (f & !(1 << c)) as usize;
                    let (w_up, w_down) = (boltz(field), boltz(-field));
                    for u in 1..=placed {
                        let w = &cur[f as usize * stride + u];
                        if w.is_zero() {
                            continue;
                        }
                        nxt[up_state * stride + u + 1] += w * w_up;
                        nxt[down_state * stride + u] += w * w_down;
                    }
                }
                std::mem::swap(&mut cur, &mut nxt);
            }
        }
        let mut out = vec![Float::new(p); stride];
        for f in 0..states {
            for u in 0..stride {
                out[u] += &cur[f * stride + u];
            }
        }
        out
    };

    let partials: Vec<Vec<Float>> = if periodic {
        first_rows.par_iter().map(|&f| run(&[f], Some(f))).collect()
    } else {
        vec![run(&first_rows, None)]
    };
    let mut raw = vec![Float::new(p); stride];
    for part in &partials {
        for (acc, x) in raw.iter_mut().zip(part) {
            *acc += x;
        }
    }
    let mirrored: Vec<Float> = (0..=sites)
        .map(|u| Float::with_val(p, &raw[u] + &raw[sites - u]))
        .collect();
    MagnetizationSpectrum::from_raw(
        lattice_meta(&lattice, beta, precision_bits, Engine::Transfer2d),
        mirrored,
        Float::new(precision_bits),
    )
}

/// Binomial spectrum of `n` independent spins, from log-gamma.
pub fn curie_weiss_spectrum(n: usize, precision_bits: u32) -> Result<MagnetizationSpectrum> {
    check_precision(precision_bits)?;
    if n == 0 {
        return Err(Error::invalid("site count must be positive"));
    }
    let p = precision_bits + 32;
    let lg = |x: usize| Float::with_val(p, x + 1).ln_gamma();
    let top = lg(n);
    let logs: Vec<Float> = (0..=n).map(|k| Float::with_val(p, &top - lg(k)) - lg(n - k)).collect();
    let max = logs[n / 2].clone();
    let raw: Vec<Float> = logs.iter().map(|l| Float::with_val(p, l - &max).exp()).collect();
    let meta = SpectrumMeta {
        geometry: Geometry {
            dimension: 0,
            extent: n as u64,
            boundary: Boundary::Free,
        },
        site_count: n,
        beta: Beta::zero(),
        precision_bits,
        engine: Engine::CurieWeiss,
        tilt: None,
    };
    MagnetizationSpectrum::from_raw(meta, raw, Float::with_val(precision_bits, &max))
}

/// Picks the fastest exact engine for a lattice.
pub fn exact_spectrum(lattice: &LatticeSpec, beta: &Beta, precision_bits: u32) -> Result<MagnetizationSpectrum> {
    match lattice.dimension() {
        1 => transfer_spectrum_1d(lattice.site_count(), lattice.boundary(), beta, precision_bits),
        2 if lattice.radius().is_some()
            && lattice.side()
                <= match lattice.boundary() {
                    Boundary::Free => TRANSFER_2D_MAX_WIDTH,
                    Boundary::Periodic => TRANSFER_2D_MAX_PERIODIC_WIDTH,
                } =>
        {
            transfer_spectrum_2d(lattice.radius().unwrap(), lattice.boundary(), beta, precision_bits)
        }
        _ => enumerate_spectrum(lattice, beta, precision_bits),
    }
}
