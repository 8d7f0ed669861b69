//! Over/under-dispersion verdicts from the shape of `φ`.
//!
//! The law is overdispersed when `d(λ) = λ / φ(λ)` is non-decreasing and
//! underdispersed when it is non-increasing. These are sufficient
//! conditions, so every structural verdict can be checked against the
//! numeric index `Var X / E X`.

use serde::Serialize;

use crate::ecom::EComPoisson;
use crate::error::{Error, Result};
use crate::phi::{ClassFlags, PhiFunction};

pub const DEFAULT_N_MAX: usize = 200;

/// Relative change below which successive values count as a tie.
const TIE_TOL: f64 = 1e-12;

/// Band around 1 for the numeric index to count as equidispersed.
const NUMERIC_EQUI_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Over,
    Under,
    Equi,
    Indeterminate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Over => "over",
            Classification::Under => "under",
            Classification::Equi => "equi",
            Classification::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DMonotone,
    DerivativeCondition,
    ClassFlag,
    Numeric,
}

/// One grid point: `x` and the compared quantity (`d(x)`, or `φ'(x) - φ(x)/x`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence {
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub classification: Classification,
    pub method: Method,
    pub evidence: Vec<Evidence>,
    /// `Var X / E X`, when a distribution was supplied.
    pub numeric_index: Option<f64>,
}

/// Verdict from the signs of successive changes, ties ignored.
fn classify_steps(steps: impl Iterator<Item = f64>, tie: f64) -> Classification {
    let (mut up, mut down) = (false, false);
    for s in steps {
        if s > tie {
            up = true;
        } else if s < -tie {
            down = true;
        }
    }
    match (up, down) {
        (false, false) => Classification::Equi,
        (true, false) => Classification::Over,
        (false, true) => Classification::Under,
        (true, true) => Classification::Indeterminate,
    }
}

/// Integer grid `1..=n_max+1`, clipped to `φ`'s domain.
fn integer_grid(phi: &PhiFunction, n_max: usize) -> Vec<f64> {
    let sup = phi.domain_sup();
    (1..=n_max + 1)
        .map(|n| n as f64)
        .take_while(|&x| x < sup)
        .collect()
}

/// Monotonicity of `d(n) = n / φ(n)` on `n = 1..=n_max+1`.
pub fn classify_by_d(phi: &PhiFunction, n_max: usize) -> Result<DispersionReport> {
    let grid = integer_grid(phi, n_max);
    if grid.len() < 2 {
        return Err(Error::Domain(format!(
            "{phi}: fewer than two integer grid points"
        )));
    }
    let evidence = grid
        .iter()
        .map(|&x| {
            Ok(Evidence {
                x,
                value: phi.dispersion_function(x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classification = classify_steps(
        evidence.windows(2).map(|w| w[1].value / w[0].value - 1.0),
        TIE_TOL,
    );
    Ok(DispersionReport {
        classification,
        method: Method::DMonotone,
        evidence,
        numeric_index: None,
    })
}

/// Compares `φ'(λ)` with `φ(λ)/λ` on `grid`: `≤` everywhere gives over, `≥` under.
pub fn classify_by_derivative(phi: &PhiFunction, grid: &[f64]) -> Result<DispersionReport> {
    if !phi.is_nondecreasing() {
        return Err(Error::Precondition(format!("{phi} is not non-decreasing")));
    }
    let mut evidence = Vec::with_capacity(grid.len());
    let mut rel = Vec::with_capacity(grid.len());
    for &x in grid {
        let d = phi.derivatives(x, 1)?;
        let slope = d[0] / x;
        evidence.push(Evidence {
            x,
            value: d[1] - slope,
        });
        // positive when φ' < φ/λ, which points to overdispersion
        rel.push((slope - d[1]) / slope.abs().max(d[1].abs()));
    }
    // looser ties: φ' and φ/λ carry independent round-off
    let classification = classify_steps(rel.into_iter(), 1e-10);
    Ok(DispersionReport {
        classification,
        method: Method::DerivativeCondition,
        evidence,
        numeric_index: None,
    })
}

/// SBF ⇒ over, ISBF ⇒ under (both: equi), otherwise indeterminate.
pub fn classify_by_flags(phi: &PhiFunction) -> DispersionReport {
    let f = phi.flags();
    let classification = match (f.contains(ClassFlags::SBF), f.contains(ClassFlags::ISBF)) {
        (true, true) => Classification::Equi,
        (true, false) => Classification::Over,
        (false, true) => Classification::Under,
        (false, false) => Classification::Indeterminate,
    };
    DispersionReport {
        classification,
        method: Method::ClassFlag,
        evidence: Vec::new(),
        numeric_index: None,
    }
}

/// `Var X / E X`.
pub fn numeric_dispersion(d: &EComPoisson) -> Result<f64> {
    let m1 = d.factorial_moment(1)?;
    let m2 = d.factorial_moment(2)?;
    Ok((m2 + m1 - m1 * m1) / m1)
}

fn classify_index(index: f64) -> Classification {
    if (index - 1.0).abs() <= NUMERIC_EQUI_BAND {
        Classification::Equi
    } else if index > 1.0 {
        Classification::Over
    } else {
        Classification::Under
    }
}

/// `Δ² ln w(n)` for `w(n) = n! / ∏_{k ≤ n} φ(k)`, `n = 0..n_max`:
/// `ln((n+2)/(n+1) · φ(n+1)/φ(n+2))`.
pub fn log_weight_second_differences(phi: &PhiFunction, n_max: usize) -> Result<Vec<f64>> {
    let sup = phi.domain_sup();
    (0..n_max)
        .take_while(|&n| ((n + 2) as f64) < sup)
        .map(|n| {
            let (a, b) = ((n + 1) as f64, (n + 2) as f64);
            Ok((b / a * phi.eval(a)? / phi.eval(b)?).ln())
        })
        .collect()
}

/// Structural and numeric verdicts for one distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullReport {
    pub phi: String,
    pub rho: f64,
    /// First decisive verdict among d-monotonicity, class flags and the numeric index.
    pub classification: Classification,
    pub method: Method,
    pub numeric_index: f64,
    pub numeric_classification: Classification,
    pub by_d: DispersionReport,
    pub by_flags: DispersionReport,
    pub by_derivative: Option<DispersionReport>,
}

pub fn report(d: &EComPoisson, n_max: usize) -> Result<FullReport> {
    let phi = d.phi();
    let index = numeric_dispersion(d)?;
    let mut by_d = classify_by_d(phi, n_max)?;
    by_d.numeric_index = Some(index);
    let mut by_flags = classify_by_flags(phi);
    by_flags.numeric_index = Some(index);
    let by_derivative = if phi.is_nondecreasing() {
        let grid: Vec<f64> = by_d.evidence.iter().map(|e| e.x).collect();
        let mut r = classify_by_derivative(phi, &grid)?;
        r.numeric_index = Some(index);
        Some(r)
    } else {
        None
    };
    let numeric_classification = classify_index(index);
    let (classification, method) = [&by_d, &by_flags]
        .into_iter()
        .find(|r| r.classification != Classification::Indeterminate)
        .map_or((numeric_classification, Method::Numeric), |r| {
            (r.classification, r.method)
        });
    Ok(FullReport {
        phi: phi.id(),
        rho: d.rho(),
        classification,
        method,
        numeric_index: index,
        numeric_classification,
        by_d,
        by_flags,
        by_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(id: &str) -> PhiFunction {
        id.parse().unwrap()
    }

    #[test]
    fn by_d_examples() {
        let c = |id| {
            classify_by_d(&phi(id), DEFAULT_N_MAX)
                .unwrap()
                .classification
        };
        assert_eq!(c("ratio:1.0"), Classification::Over);
        assert_eq!(c("id"), Classification::Equi);
        assert_eq!(c("power:2.0"), Classification::Under);
        // not a Bernstein function, yet d(n) = n(n²-n+1)/(n²+n+1) still increases
        assert_eq!(c("ratioquadratic"), Classification::Over);
    }

    #[test]
    fn by_derivative_examples() {
        let grid = [0.5, 1.0, 2.0, 5.0, 10.0];
        let c = |id| {
            classify_by_derivative(&phi(id), &grid)
                .unwrap()
                .classification
        };
        assert_eq!(c("power:0.5"), Classification::Over);
        assert_eq!(c("power:2.0"), Classification::Under);
        assert_eq!(c("id"), Classification::Equi);
        assert!(classify_by_derivative(&phi("ratioquadratic"), &grid).is_err());
    }

    #[test]
    fn by_flags_examples() {
        let c = |id| classify_by_flags(&phi(id)).classification;
        assert_eq!(c("ratio:1.0"), Classification::Over);
        assert_eq!(c("quadraticshift"), Classification::Under);
        assert_eq!(c("ratioquadratic"), Classification::Indeterminate);
    }

    #[test]
    fn numeric_examples() {
        let idx =
            |id: &str, rho| numeric_dispersion(&EComPoisson::new(phi(id), rho).unwrap()).unwrap();
        assert!((idx("ratio:1.0", 0.5) - 2.0).abs() < 1e-11);
        assert!((idx("id", 3.0) - 1.0).abs() < 1e-12);
        assert!(idx("power:2.0", 2.0) < 1.0);
    }

    #[test]
    fn log_weight_signs() {
        let over = log_weight_second_differences(&phi("ratio:1.0"), 50).unwrap();
        assert!(over.iter().all(|&v| v >= -1e-12));
        let under = log_weight_second_differences(&phi("power:2.0"), 50).unwrap();
        assert!(under.iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn full_report() {
        let d = EComPoisson::new(phi("ratioquadratic"), 0.7).unwrap();
        let r = report(&d, 50).unwrap();
        assert_eq!(r.by_flags.classification, Classification::Indeterminate);
        assert_eq!(r.method, Method::DMonotone);
        assert!(r.by_derivative.is_none());
        let d = EComPoisson::new(phi("power:2.0"), 2.0).unwrap();
        let r = report(&d, DEFAULT_N_MAX).unwrap();
        assert_eq!(r.classification, Classification::Under);
        assert_eq!(r.method, Method::DMonotone);
    }
}
