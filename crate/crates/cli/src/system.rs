//! Turning command-line system descriptions into cached spectra and certified zeros.

use anyhow::Context as _;
use leeyang::io::{read_spectrum, CacheRequest, SpectrumCache};
use leeyang::lattice::{build_lattice, Boundary, LatticeSpec};
use leeyang::pipeline::{escalate, EscalationPolicy, SolvedSystem};
use leeyang::spectrum::{
    curie_weiss_spectrum, enumerate_spectrum, transfer_spectrum_1d, transfer_spectrum_2d, Engine,
    MagnetizationSpectrum, TRANSFER_2D_MAX_PERIODIC_WIDTH, TRANSFER_2D_MAX_WIDTH,
};
use leeyang::zeros::{find_angles, GRID_POINTS_PER_SITE};
use leeyang::Beta;

use crate::args::{EngineChoice, GlobalArgs, SourceArgs, SystemArgs, ZeroArgs};
use crate::usage;

/// Shared state of one command run.
pub struct Context<'a> {
    pub global: &'a GlobalArgs,
    cache: SpectrumCache,
    /// Cache keys (or files) read or produced, for the manifest.
    pub inputs: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(global: &'a GlobalArgs) -> Self {
        Context {
            global,
            cache: SpectrumCache::new(global.cache_root()),
            inputs: Vec::new(),
        }
    }

    pub fn policy(&self, start_bits: u32) -> EscalationPolicy {
        let mut p = EscalationPolicy::starting_at(start_bits);
        if self.global.no_escalate {
            p.max_bits = start_bits;
        }
        p
    }

    /// Loads the spectrum from the cache, building and storing it on a miss.
    pub fn spectrum(&mut self, sys: &System, bits: u32) -> anyhow::Result<MagnetizationSpectrum> {
        let req = sys.request(bits);
        let key = req.key();
        let spec = match self.cache.get(&req)? {
            Some(s) => s,
            None => {
                let s = sys.build(bits)?;
                self.cache.put(&s)?;
                s
            }
        };
        if !self.inputs.contains(&key) {
            self.inputs.push(key);
        }
        Ok(spec)
    }

    pub fn cache_path(&self, spec: &MagnetizationSpectrum) -> std::path::PathBuf {
        self.cache.path_for(&spec.cache_key())
    }

    /// The spectrum named by a source, at the starting precision.
    pub fn source_spectrum(&mut self, source: &SourceArgs) -> anyhow::Result<MagnetizationSpectrum> {
        match &source.spectrum {
            Some(path) => {
                let spec = read_spectrum(path).with_context(|| format!("reading {}", path.display()))?;
                self.inputs.push(path.display().to_string());
                Ok(spec)
            }
            None => {
                let sys = System::from_args(&source.system)?;
                self.spectrum(&sys, self.global.precision_bits)
            }
        }
    }

    /// Spectrum and certified zeros, escalating precision when the system is rebuildable.
    pub fn solve(&mut self, source: &SourceArgs, zeros: &ZeroArgs) -> anyhow::Result<SolvedSystem> {
        let find = |spec: &MagnetizationSpectrum| {
            let grid = zeros.grid.unwrap_or(GRID_POINTS_PER_SITE * spec.site_count());
            find_angles(spec, grid, zeros.tol)
        };
        if source.spectrum.is_some() {
            let spectrum = self.source_spectrum(source)?;
            let z = find(&spectrum).context("the spectrum file fixes the precision; rebuild it with more bits")?;
            let bits = spectrum.precision_bits();
            return Ok(SolvedSystem { spectrum, zeros: z, precision_bits: bits });
        }
        let sys = System::from_args(&source.system)?;
        self.solve_system(&sys, zeros)
    }

    pub fn solve_system(&mut self, sys: &System, zeros: &ZeroArgs) -> anyhow::Result<SolvedSystem> {
        let policy = self.policy(self.global.precision_bits);
        let mut build_error = None;
        let result = escalate(policy, |bits| {
            let spectrum = match self.spectrum(sys, bits) {
                Ok(s) => s,
                Err(e) => {
                    build_error = Some(e);
                    return Err(leeyang::Error::Format("build failed".into()));
                }
            };
            let grid = zeros.grid.unwrap_or(GRID_POINTS_PER_SITE * spectrum.site_count());
            let z = find_angles(&spectrum, grid, zeros.tol)?;
            Ok((spectrum, z))
        });
        if let Some(e) = build_error {
            return Err(e);
        }
        let ((spectrum, z), bits) = result?;
        Ok(SolvedSystem { spectrum, zeros: z, precision_bits: bits })
    }
}

/// A fully resolved system: geometry, coupling and engine.
#[derive(Debug, Clone)]
pub struct System {
    lattice: Option<LatticeSpec>,
    sites: usize,
    beta: Beta,
    engine: Engine,
}

impl System {
    pub fn from_args(a: &SystemArgs) -> anyhow::Result<Self> {
        let beta = Beta::parse(&a.beta)?;
        let boundary: Boundary = a.boundary.into();
        if a.d == 0 {
            let sites = match (a.sites, a.n) {
                (Some(s), _) => s,
                (None, Some(n)) => 2 * n as usize + 1,
                (None, None) => return Err(usage("--sites or --n is required")),
            };
            if !beta.is_zero() {
                return Err(usage("d = 0 describes independent spins; beta must be 0"));
            }
            return Ok(System { lattice: None, sites, beta, engine: Engine::CurieWeiss });
        }
        let lattice = match (a.d, a.sites, a.n) {
            (1, Some(s), _) => LatticeSpec::chain(s, boundary)?,
            (_, Some(_), _) => return Err(usage("--sites is only meaningful for d = 0 or d = 1; use --n")),
            (d, None, Some(n)) => build_lattice(d, n, boundary)?,
            (_, None, None) => return Err(usage("--sites or --n is required")),
        };
        let engine = match a.engine {
            EngineChoice::Brute => Engine::BruteForce,
            EngineChoice::Transfer => match lattice.dimension() {
                1 => Engine::Transfer1d,
                2 if lattice.radius().is_some() => Engine::Transfer2d,
                d => return Err(usage(format!("no transfer engine for d = {d}"))),
            },
            EngineChoice::Auto => {
                let cap = match boundary {
                    Boundary::Free => TRANSFER_2D_MAX_WIDTH,
                    Boundary::Periodic => TRANSFER_2D_MAX_PERIODIC_WIDTH,
                };
                match lattice.dimension() {
                    1 => Engine::Transfer1d,
                    2 if lattice.radius().is_some() && lattice.side() <= cap => Engine::Transfer2d,
                    _ => Engine::BruteForce,
                }
            }
        };
        Ok(System { sites: lattice.site_count(), lattice: Some(lattice), beta, engine })
    }

    pub fn lattice(&self) -> Option<&LatticeSpec> {
        self.lattice.as_ref()
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }

    fn request(&self, bits: u32) -> CacheRequest {
        CacheRequest {
            d: self.lattice.as_ref().map_or(0, |l| l.dimension()),
            site_count: self.sites,
            boundary: self.lattice.as_ref().map_or(Boundary::Free, |l| l.boundary()),
            beta: self.beta.clone(),
            precision_bits: bits,
            engine: self.engine,
            tilt: None,
        }
    }

    fn build(&self, bits: u32) -> leeyang::Result<MagnetizationSpectrum> {
        let Some(l) = &self.lattice else {
            return curie_weiss_spectrum(self.sites, bits);
        };
        match self.engine {
            Engine::Transfer1d => transfer_spectrum_1d(l.site_count(), l.boundary(), &self.beta, bits),
            Engine::Transfer2d => transfer_spectrum_2d(l.radius().unwrap_or(0), l.boundary(), &self.beta, bits),
            _ => enumerate_spectrum(l, &self.beta, bits),
        }
    }
}
