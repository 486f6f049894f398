//! Multiprecision plumbing: decimal round trips, the `Beta` newtype and a compensated f64 sum.

use rug::Float;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION_BITS: u32 = 106;
pub(crate) const MIN_PRECISION_BITS: u32 = 53;

/// Decimal digits needed to round-trip `bits` of significand.
pub fn decimal_digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

pub fn parse_float(s: &str, bits: u32) -> Result<Float> {
    let parsed = Float::parse(s.trim()).map_err(|e| Error::Format(format!("'{s}': {e}")))?;
    Ok(Float::with_val(bits, parsed))
}

pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix(10, Some(decimal_digits(x.prec())))
}

pub(crate) fn check_precision(bits: u32) -> Result<()> {
    if bits < MIN_PRECISION_BITS {
        return Err(Error::invalid(format!(
            "precision_bits must be at least {MIN_PRECISION_BITS}, got {bits}"
        )));
    }
    Ok(())
}

/// log2 of |x|, or -inf for zero.
pub(crate) fn log2_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (mant, exp) = x.to_f64_exp();
    mant.abs().log2() + exp as f64
}

/// Inverse temperature carried as its canonical decimal string.
///
/// The string is what enters cache keys, so `0.3` and `0.30` are normalized to one form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Beta(String);

impl Beta {
    pub fn parse(s: &str) -> Result<Self> {
        let x = parse_float(s, 64).map_err(|_| Error::invalid(format!("beta '{s}' is not a number")))?;
        if !x.is_finite() || x.is_sign_negative() && !x.is_zero() {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got '{s}'")));
        }
        if x.is_zero() {
            return Ok(Beta("0".into()));
        }
        Ok(Beta(canonical_decimal(s.trim())))
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        Self::parse(&format!("{x}"))
    }

    pub fn zero() -> Self {
        Beta("0".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == "0"
    }

    pub fn to_f64(&self) -> f64 {
        self.0.parse().unwrap_or(f64::NAN)
    }

    pub fn to_float(&self, bits: u32) -> Float {
        parse_float(&self.0, bits).expect("validated at construction")
    }
}

/// Strips a leading '+', redundant leading zeros and trailing fractional zeros.
fn canonical_decimal(s: &str) -> String {
    let s = s.strip_prefix('+').unwrap_or(s);
    if s.contains(['e', 'E']) {
        return s.to_ascii_lowercase();
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    }
}

impl TryFrom<String> for Beta {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Beta::parse(&s)
    }
}

impl From<Beta> for String {
    fn from(b: Beta) -> String {
        b.0
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Neumaier-compensated f64 accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
