//! Command-line grammar.

use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::render::Format;

#[derive(Debug, Parser)]
#[command(
    name = "ecomp",
    version,
    about = "Extended COM-Poisson distributions, Bernstein-gamma functions and queue simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,

    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probability mass function and CDF over a range of states.
    Pmf {
        #[command(flatten)]
        dist: DistArgs,
        /// Inclusive state range `a..b`, or a single state.
        #[arg(long, value_parser = parse_range, default_value = "0..10")]
        n: RangeInclusive<usize>,
    },
    /// Raw and factorial moments.
    Moments {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        orders: Vec<usize>,
    },
    /// Over/under-dispersion report.
    Dispersion {
        #[command(flatten)]
        dist: DistArgs,
        /// Prefix length for the d(n) monotonicity check.
        #[arg(long, default_value_t = 200)]
        n_max: usize,
    },
    /// Bernstein-gamma values W and their log-derivative.
    Gamma {
        #[arg(long)]
        phi: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        x: Vec<f64>,
        /// Use the integer product (x must be positive integers); no psi column.
        #[arg(long)]
        integer: bool,
    },
    /// Inverse-CDF samples.
    Sample {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Event-driven simulation of the birth-death queue.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Every catalog rate function with its class flags and domain.
    Catalog,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// Distribution spec JSON file (replaces the other distribution flags).
    #[arg(long, conflicts_with_all = ["phi", "rho", "lambda_cap", "tol", "alpha", "beta", "gamma"])]
    pub spec: Option<PathBuf>,
    /// Rate function id, e.g. `id`, `power:2.0`, `rationalshift:2.0,1.0`, `inv:logcosh`.
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Support cap: a positive number or `inf`.
    #[arg(long, value_parser = parse_cap)]
    pub lambda_cap: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Index alpha of the generalized family (any of alpha/beta/gamma selects it).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file (replaces the other scenario flags).
    #[arg(long, conflicts_with_all = ["phi", "lambda", "mu", "lambda_cap", "horizon", "burn_in", "seed"])]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub phi: Option<String>,
    /// Arrival rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Service rate scale.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_parser = parse_cap)]
    pub lambda_cap: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Discarded initial time; defaults to 10% of the horizon.
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let bad = || format!("expected `a..b` or a single state, got {s:?}");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok(a..=b)
        }
        None => {
            let a: usize = s.trim().parse().map_err(|_| bad())?;
            Ok(a..=a)
        }
    }
}

pub fn parse_cap(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| format!("expected a number or `inf`, got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0..5").unwrap(), 0..=5);
        assert_eq!(parse_range("7").unwrap(), 7..=7);
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("a..2").is_err());
    }

    #[test]
    fn caps() {
        assert!(parse_cap("inf").unwrap().is_infinite());
        assert_eq!(parse_cap("12.5").unwrap(), 12.5);
        assert!(parse_cap("x").is_err());
    }
}
