use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "leeyang", version, about = "Exact Ising spectra, Lee-Yang zeros and quartic-limit diagnostics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Directory for outputs and `manifests.jsonl`.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Spectrum cache root (defaults to `<out>/cache`).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Starting precision of the multiprecision accumulation.
    #[arg(long, global = true, default_value_t = leeyang::DEFAULT_PRECISION_BITS)]
    pub precision_bits: u32,
    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Fail with exit code 2 instead of retrying at higher precision.
    #[arg(long, global = true)]
    pub no_escalate: bool,
}

impl GlobalArgs {
    pub fn cache_root(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineChoice {
    Auto,
    Brute,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Free,
    Periodic,
}

impl From<BoundaryArg> for leeyang::Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Free => leeyang::Boundary::Free,
            BoundaryArg::Periodic => leeyang::Boundary::Periodic,
        }
    }
}

/// Which finite system to build.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// Dimension; 0 means independent spins (the binomial spectrum).
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    /// Radius of the box [-n, n]^d.
    #[arg(long, conflicts_with = "sites")]
    pub n: Option<u32>,
    /// Number of sites, for d = 0 or a chain of any length.
    #[arg(long)]
    pub sites: Option<usize>,
    /// Inverse temperature as a decimal string.
    #[arg(long, default_value = "0")]
    pub beta: String,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Free)]
    pub boundary: BoundaryArg,
    #[arg(long, value_enum, default_value_t = EngineChoice::Auto)]
    pub engine: EngineChoice,
}

/// A system given either by parameters or by a spectrum file.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    /// Read the spectrum from this file instead of building it.
    #[arg(long, conflicts_with_all = ["n", "sites"])]
    pub spectrum: Option<PathBuf>,
    #[command(flatten)]
    pub system: SystemArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZeroArgs {
    /// Circle samples (default 64 per site).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Bisection tolerance on theta.
    #[arg(long, default_value_t = leeyang::zeros::DEFAULT_THETA_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Cw,
    Chain,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Build (or load from cache) an exact magnetization spectrum.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Locate the Lee-Yang zeros and check the MGF factorization.
    Zeros {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        zeros: ZeroArgs,
        /// Replica depth K of the MGF zero list (default: tail below 1e-10 at order 4).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Cumulants from the spectrum and from the zeros, with the scaling constants.
    Cumulants {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        zeros: ZeroArgs,
        /// Also report u6.
        #[arg(long)]
        u6: bool,
    },
    /// Tilt by exp(gamma Y^2) and write the resulting law of Y.
    Tilt {
        #[command(flatten)]
        source: SourceArgs,
        /// Coupling as a decimal string, or `auto` for 1 / (2 <Y^2>).
        #[arg(long, default_value = "auto")]
        gamma: String,
    },
    /// Density of d_n W_n on a grid with its two envelopes.
    Density {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long, default_value_t = 3.0)]
        xmax: f64,
    },
    /// Convergence table toward the quartic limit.
    Limitcheck {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value = "0")]
        beta: String,
        /// Comma-separated site counts.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Free)]
        boundary: BoundaryArg,
    },
    /// Metropolis estimates of <Y^k> under the perturbed measure.
    Mc {
        #[command(flatten)]
        system: SystemArgs,
        /// Explicit coupling as a decimal string.
        #[arg(long, conflicts_with_all = ["gamma_exact", "calibrate"])]
        gamma: Option<String>,
        /// Use gamma_n = 1 / (2 <Y^2>) from the exact spectrum.
        #[arg(long)]
        gamma_exact: bool,
        /// Use gamma_n from a gamma = 0 pre-run of this many sweeps.
        #[arg(long, conflicts_with = "gamma_exact")]
        calibrate: Option<usize>,
        #[arg(long, default_value_t = 20_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 1_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 1)]
        thinning: usize,
        #[arg(long, default_value_t = leeyang::montecarlo::MIN_BATCHES)]
        batches: usize,
        /// Histogram bins of Y / sqrt(<Y^2>).
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Herglotz function m(z) from the zeros, m(e^{-2h}) directly, and arc masses.
    Herglotz {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        zeros: ZeroArgs,
        /// Evaluation points `re` or `re,im` (repeatable).
        #[arg(long = "z", value_parser = parse_complex)]
        z: Vec<(f64, f64)>,
        /// Real fields h: compares m(e^{-2h}) from zeros and from the spectrum.
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
        /// Arc `a,b` whose zero mass is estimated by Stieltjes inversion.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        arc: Vec<f64>,
        /// Radii for the arc-mass extrapolation.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Free versus periodic alpha_j (-u4)^{1/4} side by side.
    CompareBc {
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value = "0")]
        beta: String,
        #[command(flatten)]
        zeros: ZeroArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Zeros { .. } => "zeros",
            Command::Cumulants { .. } => "cumulants",
            Command::Tilt { .. } => "tilt",
            Command::Density { .. } => "density",
            Command::Limitcheck { .. } => "limitcheck",
            Command::Mc { .. } => "mc",
            Command::Herglotz { .. } => "herglotz",
            Command::CompareBc { .. } => "compare-bc",
        }
    }
}

fn parse_complex(s: &str) -> Result<(f64, f64), String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    match s.split_once(',') {
        Some((re, im)) => Ok((parse(re)?, parse(im)?)),
        None => Ok((parse(s)?, 0.0)),
    }
}

/// Every argument as a flat `key -> string` map for the run manifest.
pub fn echo(cli: &Cli) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    flatten("", &serde_json::to_value(cli)?, &mut out);
    Ok(out)
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    use serde_json::Value;
    let key = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                // Grouping structs are transparent; their fields have distinct names.
                let transparent = matches!(k.as_str(), "global" | "source" | "system" | "zeros") || k == "command" && v.is_object();
                flatten(&if transparent { prefix.to_owned() } else { key(k) }, v, out);
            }
        }
        Value::Null => {}
        Value::String(s) => {
            out.insert(prefix.to_owned(), s.clone());
        }
        other => {
            out.insert(prefix.to_owned(), other.to_string());
        }
    }
}
