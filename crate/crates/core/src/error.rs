use thiserror::Error;

/// Errors raised by any part of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration length {got} does not match lattice size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("lattice index overflow for d={d}, side={side}")]
    IndexOverflow { d: u32, side: u64 },

    #[error("brute-force enumeration capped at {cap} spins (got {sites}); use a transfer engine")]
    BruteForceCap { sites: usize, cap: usize },

    #[error("transfer engine does not support this lattice: {0}")]
    UnsupportedLattice(String),

    #[error("magnetization class m={0} is empty")]
    EmptyClass(i64),

    #[error("loss of significance: {lost_bits:.1} bits cancelled with {precision_bits}-bit accumulation")]
    LossOfSignificance { lost_bits: f64, precision_bits: u32 },

    #[error("root deficit: certified {found} of {expected} roots ({detail}); raise precision_bits or grid_points")]
    RootDeficit {
        found: usize,
        expected: usize,
        detail: String,
    },

    #[error("precision exhausted near theta={theta:.6}: |H| below the noise floor without a bracketed sign change")]
    PrecisionExhausted { theta: f64 },

    #[error("truncation bound {bound:.3e} exceeds tolerance {tol:.3e}")]
    Truncation { bound: f64, tol: f64 },

    #[error("quadrature failed to converge on [{a}, {b}] (error estimate {err:.3e})")]
    Quadrature { a: f64, b: f64, err: f64 },

    #[error("pole proximity: |z - e^(i theta)| = {distance:.3e} for theta={theta}")]
    PoleProximity { theta: f64, distance: f64 },

    #[error("quadrature failure at radius {radius}: {detail}")]
    ArcQuadrature { radius: f64, detail: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when retrying with more precision bits or grid points may succeed.
    pub fn needs_escalation(&self) -> bool {
        matches!(
            self,
            Error::RootDeficit { .. }
                | Error::PrecisionExhausted { .. }
                | Error::LossOfSignificance { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
