//! Exponential-concavity and eventual log-convexity diagnostics.

use serde::Serialize;

use super::PhiFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpConvexity {
    /// `f'' + f'^2 <= 0` on every grid point.
    Concave,
    /// `f'' + f'^2 >= 0` on every grid point.
    Convex,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpConcavityReport {
    /// `(x, f''(x) + f'(x)^2)`
    pub points: Vec<(f64, f64)>,
    pub classification: ExpConvexity,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogConvexityReport {
    pub m: f64,
    /// `(s, h''(s) h(s) - h'(s)^2)`
    pub points: Vec<(f64, f64)>,
    pub holds: bool,
}

const REL_TOL: f64 = 1e-12;

/// Sign of `f'' + (f')^2` on `grid`. Exact zeros count as concave.
pub fn check_exp_concavity(f: &PhiFunction, grid: &[f64]) -> Result<ExpConcavityReport> {
    let mut points = Vec::with_capacity(grid.len());
    let (mut concave, mut convex) = (true, true);
    for &x in grid {
        let d = f.derivatives(x, 2)?;
        let v = d[2] + d[1] * d[1];
        let tol = REL_TOL * (d[2].abs() + d[1] * d[1]).max(1.0);
        concave &= v <= tol;
        convex &= v >= -tol;
        points.push((x, v));
    }
    let classification = if concave {
        ExpConvexity::Concave
    } else if convex {
        ExpConvexity::Convex
    } else {
        ExpConvexity::Mixed
    };
    Ok(ExpConcavityReport {
        points,
        classification,
    })
}

/// Whether `h'' h - (h')^2 >= -tol` at every grid point beyond `m`.
pub fn check_eventual_log_convexity(
    h: &PhiFunction,
    m: f64,
    grid: &[f64],
) -> Result<LogConvexityReport> {
    let mut points = Vec::with_capacity(grid.len());
    let mut holds = true;
    for &s in grid {
        if s <= m {
            return Err(Error::Domain(format!(
                "grid point {s} is not beyond m = {m}"
            )));
        }
        let d = h.derivatives(s, 2)?;
        let v = d[2] * d[0] - d[1] * d[1];
        let tol = REL_TOL * (d[2] * d[0]).abs().max(d[1] * d[1]).max(1.0);
        holds &= v >= -tol;
        points.push((s, v));
    }
    Ok(LogConvexityReport { m, points, holds })
}
