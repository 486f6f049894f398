//! Python bindings: spectra, zeros, cumulants, the Herglotz function and Monte Carlo.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use leeyang::analysis::{cumulants_from_spectrum, normalized_kurtosis, scaling_constants, tilt_spectrum};
use leeyang::herglotz::{m_direct, m_from_zeros, stieltjes_arc_mass, DEFAULT_RADII};
use leeyang::io::{spectrum_from_json, spectrum_to_json};
use leeyang::lattice::{build_lattice, Boundary, LatticeSpec};
use leeyang::montecarlo::{mc_run, GammaMode, McConfig};
use leeyang::pipeline::{chain_precision_hint, limit_row, solve_family_member, EscalationPolicy, LimitFamily};
use leeyang::spectrum::{curie_weiss_spectrum, exact_spectrum, MagnetizationSpectrum};
use leeyang::zeros::{find_angles, LeeYangSpectrum, DEFAULT_THETA_TOL, GRID_POINTS_PER_SITE};
use leeyang::{Beta, DEFAULT_PRECISION_BITS};

create_exception!(leeyang_py, PrecisionError, PyRuntimeError, "More precision bits are needed.");

fn to_py(e: leeyang::Error) -> PyErr {
    use leeyang::Error as E;
    match e {
        e if e.needs_escalation() => PrecisionError::new_err(e.to_string()),
        E::InvalidParameter(_)
        | E::LengthMismatch { .. }
        | E::IndexOverflow { .. }
        | E::BruteForceCap { .. }
        | E::UnsupportedLattice(_) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn boundary(s: &str) -> PyResult<Boundary> {
    s.parse().map_err(to_py)
}

fn beta(s: &str) -> PyResult<Beta> {
    Beta::parse(s).map_err(to_py)
}

/// Exact magnetization spectrum `m -> A_m` of a finite system.
#[pyclass(module = "leeyang_py", frozen)]
pub struct Spectrum(MagnetizationSpectrum);

#[pymethods]
impl Spectrum {
    /// Box `[-n, n]^d` (a chain of `2n+1` sites for d = 1) at inverse temperature `beta`.
    #[staticmethod]
    #[pyo3(signature = (d, n, beta, boundary="free", precision_bits=DEFAULT_PRECISION_BITS))]
    fn lattice(d: u32, n: u32, beta: &str, boundary: &str, precision_bits: u32) -> PyResult<Self> {
        let l = build_lattice(d, n, self::boundary(boundary)?).map_err(to_py)?;
        Ok(Spectrum(exact_spectrum(&l, &self::beta(beta)?, precision_bits).map_err(to_py)?))
    }

    /// Chain of any number of sites.
    #[staticmethod]
    #[pyo3(signature = (sites, beta, boundary="free", precision_bits=DEFAULT_PRECISION_BITS))]
    fn chain(sites: usize, beta: &str, boundary: &str, precision_bits: u32) -> PyResult<Self> {
        let l = LatticeSpec::chain(sites, self::boundary(boundary)?).map_err(to_py)?;
        Ok(Spectrum(exact_spectrum(&l, &self::beta(beta)?, precision_bits).map_err(to_py)?))
    }

    /// Independent spins: the binomial spectrum.
    #[staticmethod]
    #[pyo3(signature = (sites, precision_bits=DEFAULT_PRECISION_BITS))]
    fn independent(sites: usize, precision_bits: u32) -> PyResult<Self> {
        Ok(Spectrum(curie_weiss_spectrum(sites, precision_bits).map_err(to_py)?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Spectrum(spectrum_from_json(text).map_err(to_py)?))
    }

    fn to_json(&self) -> PyResult<String> {
        spectrum_to_json(&self.0).map_err(to_py)
    }

    #[getter]
    fn site_count(&self) -> usize {
        self.0.site_count()
    }

    #[getter]
    fn beta(&self) -> String {
        self.0.beta().to_string()
    }

    #[getter]
    fn engine(&self) -> String {
        self.0.engine().to_string()
    }

    #[getter]
    fn precision_bits(&self) -> u32 {
        self.0.precision_bits()
    }

    #[getter]
    fn cache_key(&self) -> String {
        self.0.cache_key()
    }

    /// `[(m, ln A_m)]` rounded to double precision.
    fn log_weights(&self) -> Vec<(i64, f64)> {
        self.0.log_weights_f64()
    }

    /// `<Y^k>`.
    fn moment(&self, k: u32) -> f64 {
        self.0.moment(k)
    }

    /// `<exp(z Y)>` for complex `z`.
    fn mgf(&self, z: Complex64) -> PyResult<Complex64> {
        self.0.mgf(z).map_err(to_py)
    }

    /// `{"u2", "u4", "u6"}` from exact moments.
    fn cumulants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = cumulants_from_spectrum(&self.0, &[2, 4, 6]).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("u2", c.u2)?;
        d.set_item("u4", c.u4)?;
        d.set_item("u6", c.u6)?;
        Ok(d)
    }

    /// `{"gamma_n", "lambda_n", "c_n", "d_n"}`; needs `u4 < 0`.
    fn scaling_constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = scaling_constants(&self.0).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("gamma_n", s.gamma_n)?;
        d.set_item("lambda_n", s.lambda_n)?;
        d.set_item("c_n", s.c_n)?;
        d.set_item("d_n", s.d_n)?;
        Ok(d)
    }

    /// Law of `Y` under the `exp(gamma Y^2)` tilt; `gamma=None` uses `1 / (2 <Y^2>)`.
    #[pyo3(signature = (gamma=None))]
    fn tilt(&self, gamma: Option<f64>) -> PyResult<Vec<(i64, f64)>> {
        let g = gamma.unwrap_or_else(|| 1.0 / (2.0 * self.0.moment(2)));
        Ok(tilt_spectrum(&self.0, g).map_err(to_py)?.probabilities())
    }

    /// `E X^4 / (E X^2)^2` under the critical tilt.
    fn tilted_kurtosis(&self) -> PyResult<f64> {
        let t = tilt_spectrum(&self.0, 1.0 / (2.0 * self.0.moment(2))).map_err(to_py)?;
        normalized_kurtosis(&t).map_err(to_py)
    }

    /// Lee-Yang zeros on the unit circle.
    #[pyo3(signature = (grid=None, tol=DEFAULT_THETA_TOL))]
    fn zeros(&self, grid: Option<usize>, tol: f64) -> PyResult<Zeros> {
        let grid = grid.unwrap_or(GRID_POINTS_PER_SITE * self.0.site_count());
        Ok(Zeros(find_angles(&self.0, grid, tol).map_err(to_py)?))
    }

    /// `m(e^{-2h})` summed over the spectrum.
    fn m_direct(&self, h: f64) -> PyResult<Complex64> {
        Ok(m_direct(&self.0, h).map_err(to_py)?.m)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrum(N={}, beta={}, engine={}, precision_bits={})",
            self.0.site_count(),
            self.0.beta(),
            self.0.engine(),
            self.0.precision_bits()
        )
    }
}

/// Zeros `e^{i theta}` of the partition function in `z = e^{-2h}`.
#[pyclass(module = "leeyang_py", frozen)]
pub struct Zeros(LeeYangSpectrum);

#[pymethods]
impl Zeros {
    /// Sorted angles, repeated by multiplicity.
    #[getter]
    fn angles(&self) -> Vec<f64> {
        self.0.expanded()
    }

    /// `[(theta, multiplicity)]` over distinct angles.
    #[getter]
    fn multiplicities(&self) -> Vec<(f64, u32)> {
        self.0.angles().iter().map(|a| (a.theta, a.multiplicity)).collect()
    }

    #[getter]
    fn smallest(&self) -> f64 {
        self.0.smallest()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual()
    }

    fn __len__(&self) -> usize {
        self.0.count()
    }

    /// `m(z) = (1/N) sum (e^{i theta} + z) / (e^{i theta} - z)`.
    fn herglotz(&self, z: Complex64) -> PyResult<Complex64> {
        Ok(m_from_zeros(&self.0, z).map_err(to_py)?.m)
    }

    /// Zero mass of the arc `(a, b)` by Stieltjes inversion, with its extrapolation error.
    #[pyo3(signature = (a, b, radii=None))]
    fn arc_mass(&self, a: f64, b: f64, radii: Option<Vec<f64>>) -> PyResult<(f64, f64)> {
        let radii = radii.unwrap_or_else(|| DEFAULT_RADII.to_vec());
        let e = stieltjes_arc_mass(&self.0, a, b, &radii).map_err(to_py)?;
        Ok((e.extrapolated, e.extrapolation_error))
    }

    fn __repr__(&self) -> String {
        format!("Zeros(count={}, smallest={:.12})", self.0.count(), self.0.smallest())
    }
}

/// One row of the convergence table for `family` in {"cw", "chain"}.
#[pyfunction]
#[pyo3(signature = (family, size, beta="0", boundary="free"))]
fn limit_check<'py>(py: Python<'py>, family: &str, size: usize, beta: &str, boundary: &str) -> PyResult<Bound<'py, PyDict>> {
    let beta = self::beta(beta)?;
    let (family, start) = match family {
        "cw" => (LimitFamily::Cw, DEFAULT_PRECISION_BITS),
        "chain" => (LimitFamily::Chain, chain_precision_hint(size, beta.to_f64())),
        other => return Err(PyValueError::new_err(format!("unknown family '{other}'"))),
    };
    let bc = self::boundary(boundary)?;
    let solved = py
        .detach(|| solve_family_member(family, &beta, bc, size, EscalationPolicy::starting_at(start)))
        .map_err(to_py)?;
    let r = limit_row(&solved).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("size", r.size)?;
    d.set_item("precision_bits", r.precision_bits)?;
    d.set_item("u2", r.u2)?;
    d.set_item("u4", r.u4)?;
    d.set_item("kurtosis", r.kurtosis)?;
    d.set_item("kolmogorov", r.kolmogorov)?;
    d.set_item("theta_1", r.theta_1)?;
    d.set_item("alpha_1_scaled", r.alpha_1_scaled)?;
    Ok(d)
}

/// Metropolis estimates of `<Y^k>`, k = 1..4, as `[(mean, std_error)]`; `gamma=None` calibrates.
#[pyfunction]
#[pyo3(signature = (d, n, beta, gamma=None, boundary="free", sweeps=20_000, burn_in=1_000, chains=4, seed=0))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    py: Python<'_>,
    d: u32,
    n: u32,
    beta: f64,
    gamma: Option<f64>,
    boundary: &str,
    sweeps: usize,
    burn_in: usize,
    chains: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    let lattice = build_lattice(d, n, self::boundary(boundary)?).map_err(to_py)?;
    let mode = match gamma {
        Some(g) => GammaMode::Explicit { gamma: g },
        None => GammaMode::Calibrate { sweeps: sweeps / 4 },
    };
    let mut cfg = McConfig::new(lattice, beta, mode);
    cfg.sweeps = sweeps;
    cfg.burn_in = burn_in;
    cfg.chains = chains;
    cfg.master_seed = seed;
    let est = py.detach(|| mc_run(&cfg)).map_err(to_py)?;
    Ok(est.moments.iter().map(|e| (e.mean, e.std_error)).collect())
}

#[pymodule]
fn leeyang_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Spectrum>()?;
    m.add_class::<Zeros>()?;
    m.add_function(wrap_pyfunction!(limit_check, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add("PrecisionError", m.py().get_type::<PrecisionError>())?;
    Ok(())
}
