//! Exact finite-volume Ising magnetization spectra, their Lee-Yang zeros, and
//! numerical checks of the critical Curie-Weiss tilt limit.
//!
//! The usual flow is lattice → [`MagnetizationSpectrum`] → [`LeeYangSpectrum`]
//! → MGF zeros, cumulants and limit densities.

pub mod analysis;
pub mod error;
pub mod herglotz;
pub mod hp;
pub mod io;
pub mod lattice;
pub mod limit;
pub mod montecarlo;
pub mod pipeline;
pub mod special;
pub mod spectrum;
pub mod zeros;

pub use analysis::{
    cumulants_from_spectrum, cumulants_from_zeros, normalized_kurtosis, scaling_constants, tilt_spectrum,
    CumulantSet, ScalingConstants, TiltedSpectrum,
};
pub use error::{Error, Result};
pub use herglotz::{m_direct, m_from_zeros, stieltjes_arc_mass, ArcMassEstimate, HerglotzEvaluation};
pub use hp::{Beta, DEFAULT_PRECISION_BITS};
pub use lattice::{build_lattice, Boundary, LatticeSpec, ModelParams, SpinConfiguration};
pub use limit::{quartic_constants, quartic_model, LimitDensityModel};
pub use montecarlo::{mc_run, GammaMode, McConfig, McEstimates};
pub use spectrum::{
    curie_weiss_spectrum, enumerate_spectrum, exact_spectrum, transfer_spectrum_1d, transfer_spectrum_2d, Engine,
    MagnetizationSpectrum,
};
pub use zeros::{find_angles, mgf_zeros, LeeYangSpectrum, MgfZeroList, ZeroAngle};
