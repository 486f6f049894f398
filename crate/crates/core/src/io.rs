//! On-disk formats: spectrum and zero-set JSON, the spectrum cache and run manifests.

use rug::Float;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hp::{parse_float, to_decimal, Beta};
use crate::lattice::Boundary;
use crate::spectrum::{Engine, Geometry, MagnetizationSpectrum, SpectrumMeta};
use crate::zeros::{LeeYangSpectrum, ZeroAngle};

pub const SCHEMA_VERSION: u32 = 1;
/// Extra bits written beyond the working precision so reloading is lossless.
const GUARD_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub schema_version: u32,
    pub d: u32,
    #[serde(rename = "n_or_N")]
    pub n_or_big_n: u64,
    pub boundary: Boundary,
    pub beta: Beta,
    pub precision_bits: u32,
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<String>,
    pub log_weights: Vec<(i64, String)>,
}

impl SpectrumFile {
    pub fn from_spectrum(spec: &MagnetizationSpectrum) -> Self {
        let bits = spec.precision_bits() + GUARD_BITS;
        let log_weights = spec
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let lw = Float::with_val(bits, w.ln_ref()) + spec.log_scale();
                (spec.magnetization(k), to_decimal(&lw))
            })
            .collect();
        let g = spec.geometry();
        SpectrumFile {
            schema_version: SCHEMA_VERSION,
            d: g.dimension,
            n_or_big_n: g.extent,
            boundary: g.boundary,
            beta: spec.beta().clone(),
            precision_bits: spec.precision_bits(),
            engine: spec.engine(),
            tilt: spec.tilt().map(str::to_owned),
            log_weights,
        }
    }

    pub fn to_spectrum(&self) -> Result<MagnetizationSpectrum> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported schema_version {}", self.schema_version)));
        }
        let n = self.log_weights.len().checked_sub(1).ok_or_else(|| Error::Format("no weights".into()))?;
        let bits = self.precision_bits + GUARD_BITS;
        let mut logs = Vec::with_capacity(n + 1);
        for (k, (m, s)) in self.log_weights.iter().enumerate() {
            if *m != 2 * k as i64 - n as i64 {
                return Err(Error::Format(format!("entry {k} has m={m}, expected {}", 2 * k as i64 - n as i64)));
            }
            logs.push(parse_float(s, bits)?);
        }
        let max = logs
            .iter()
            .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
            .cloned()
            .ok_or_else(|| Error::Format("no weights".into()))?;
        let raw = logs.iter().map(|l| Float::with_val(bits, l - &max).exp()).collect();
        let meta = SpectrumMeta {
            geometry: Geometry {
                dimension: self.d,
                extent: self.n_or_big_n,
                boundary: self.boundary,
            },
            site_count: n,
            beta: self.beta.clone(),
            precision_bits: self.precision_bits,
            engine: self.engine,
            tilt: self.tilt.clone(),
        };
        MagnetizationSpectrum::from_raw(meta, raw, Float::with_val(self.precision_bits, &max))
    }
}

pub fn spectrum_to_json(spec: &MagnetizationSpectrum) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpectrumFile::from_spectrum(spec))?)
}

pub fn spectrum_from_json(text: &str) -> Result<MagnetizationSpectrum> {
    serde_json::from_str::<SpectrumFile>(text)?.to_spectrum()
}

pub fn write_spectrum(spec: &MagnetizationSpectrum, path: &Path) -> Result<()> {
    write_atomic(path, spectrum_to_json(spec)?.as_bytes())
}

pub fn read_spectrum(path: &Path) -> Result<MagnetizationSpectrum> {
    spectrum_from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroFile {
    pub schema_version: u32,
    pub source_key: String,
    /// `(theta, multiplicity)` with theta as a shortest round-trip decimal.
    pub angles: Vec<(String, u32)>,
    pub residual: f64,
}

impl ZeroFile {
    pub fn from_zeros(z: &LeeYangSpectrum) -> Self {
        ZeroFile {
            schema_version: SCHEMA_VERSION,
            source_key: z.source().to_owned(),
            angles: z.angles().iter().map(|a| (format!("{:?}", a.theta), a.multiplicity)).collect(),
            residual: z.residual(),
        }
    }

    pub fn to_zeros(&self) -> Result<LeeYangSpectrum> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported schema_version {}", self.schema_version)));
        }
        let angles = self
            .angles
            .iter()
            .map(|(t, m)| {
                let theta = t.parse::<f64>().map_err(|e| Error::Format(format!("angle '{t}': {e}")))?;
                Ok(ZeroAngle {
                    theta,
                    multiplicity: *m,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LeeYangSpectrum::new(angles, self.residual, self.source_key.clone())
    }
}

pub fn write_zeros(z: &LeeYangSpectrum, path: &Path) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(&ZeroFile::from_zeros(z))?.as_bytes())
}

pub fn read_zeros(path: &Path) -> Result<LeeYangSpectrum> {
    serde_json::from_str::<ZeroFile>(&fs::read_to_string(path)?)?.to_zeros()
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Spectra stored as `<root>/spectra/<cache_key>.json`.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    root: PathBuf,
}

/// Parameters a cached file must echo to count as a hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheRequest {
    pub d: u32,
    pub site_count: usize,
    pub boundary: Boundary,
    pub beta: Beta,
    pub precision_bits: u32,
    pub engine: Engine,
    pub tilt: Option<String>,
}

impl CacheRequest {
    pub fn key(&self) -> String {
        crate::spectrum::cache_key(
            self.d,
            self.site_count,
            self.boundary,
            &self.beta,
            self.precision_bits,
            self.engine,
            self.tilt.as_deref(),
        )
    }

    fn matches(&self, s: &MagnetizationSpectrum) -> bool {
        s.geometry().dimension == self.d
            && s.site_count() == self.site_count
            && s.boundary() == self.boundary
            && *s.beta() == self.beta
            && s.precision_bits() == self.precision_bits
            && s.engine() == self.engine
            && s.tilt() == self.tilt.as_deref()
    }
}

impl SpectrumCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SpectrumCache { root: root.into() }
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.root.join("spectra").join(format!("{key}.json"))
    }

    /// Loads a cached spectrum; a file whose echo disagrees with the request is a collision.
    pub fn get(&self, req: &CacheRequest) -> Result<Option<MagnetizationSpectrum>> {
        let path = self.path_for(&req.key());
        if !path.exists() {
            return Ok(None);
        }
        let spec = read_spectrum(&path)?;
        if !req.matches(&spec) {
            return Err(Error::Format(format!("cache collision at {}", path.display())));
        }
        Ok(Some(spec))
    }

    pub fn put(&self, spec: &MagnetizationSpectrum) -> Result<PathBuf> {
        let path = self.path_for(&spec.cache_key());
        if !path.exists() {
            write_spectrum(spec, &path)?;
        }
        Ok(path)
    }
}

/// One line of `manifests.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            params: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_time_s: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }

    /// Appends this manifest as one JSON line.
    pub fn append_to(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{}", serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read_all(path: &Path) -> Result<Vec<RunManifest>> {
        fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::spectrum::{curie_weiss_spectrum, enumerate_spectrum};
    use std::f64::consts::PI;

    #[test]
    fn spectrum_round_trip() {
        let l = build_lattice(2, 1, Boundary::Periodic).unwrap();
        let s = enumerate_spectrum(&l, &Beta::parse("0.3").unwrap(), 106).unwrap();
        let text = spectrum_to_json(&s).unwrap();
        let back = spectrum_from_json(&text).unwrap();
        assert_eq!(back.cache_key(), s.cache_key());
        for (a, b) in s.weights().iter().zip(back.weights()) {
            let rel = Float::with_val(200, a - b).abs() / a;
            assert!(rel.to_f64() < 1e-30);
        }
        assert_eq!(spectrum_to_json(&back).unwrap(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_or_N"], 1);
        assert_eq!(v["beta"], "0.3");
        assert_eq!(v["log_weights"].as_array().unwrap().len(), 10);
    }

    #[test]
    fn zero_round_trip() {
        let z = LeeYangSpectrum::new(
            vec![ZeroAngle { theta: PI, multiplicity: 3 }, ZeroAngle { theta: 1.1, multiplicity: 1 }],
            1e-20,
            "k",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.json");
        write_zeros(&z, &p).unwrap();
        assert_eq!(read_zeros(&p).unwrap(), z);
    }

    #[test]
    fn cache_hits_and_collisions() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::new(dir.path());
        let s = curie_weiss_spectrum(50, 106).unwrap();
        let req = CacheRequest {
            d: 0,
            site_count: 50,
            boundary: Boundary::Free,
            beta: Beta::zero(),
            precision_bits: 106,
            engine: Engine::CurieWeiss,
            tilt: None,
        };
        assert!(cache.get(&req).unwrap().is_none());
        let path = cache.put(&s).unwrap();
        let bytes = fs::read(&path).unwrap();
        let hit = cache.get(&req).unwrap().unwrap();
        cache.put(&hit).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        // a file planted under the wrong key is detected
        let other = curie_weiss_spectrum(40, 106).unwrap();
        write_spectrum(&other, &path).unwrap();
        assert!(cache.get(&req).is_err());
    }

    #[test]
    fn manifests_append() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m").join("manifests.jsonl");
        let mut m = RunManifest::new("spectrum");
        m.param("beta", "0.3");
        m.append_to(&p).unwrap();
        m.append_to(&p).unwrap();
        let all = RunManifest::read_all(&p).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].params["beta"], "0.3");
    }
}
