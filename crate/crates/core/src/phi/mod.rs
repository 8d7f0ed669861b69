//! Service-rate / weight functions `φ` and their compositional inverses.
//!
//! Every function is addressed by a string id (`"power:0.5"`, `"ratio:1.0"`,
//! `"inv:logshift:2.0"`, ...). The same grammar is used by the distribution
//! specs, the queue scenarios and the CLI.

pub mod bell;
pub mod catalog;
mod convexity;
mod invert;
pub mod jet;

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::special::ln_gamma;
use jet::{Jet, Real};

pub use convexity::{
    check_eventual_log_convexity, check_exp_concavity, ExpConcavityReport, ExpConvexity,
    LogConvexityReport,
};
pub use invert::{inverse_derivative, invert, invert_with, InversionOptions};

/// Highest derivative order served by [`PhiFunction::derivatives`].
pub const MAX_DERIVATIVE_ORDER: usize = 10;

bitflags! {
    /// Class membership declared per catalog entry. The empty set means
    /// "neither a Bernstein nor an inverse Bernstein function".
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct ClassFlags: u8 {
        const BF = 1;
        const BF0 = 1 << 1;
        const CBF = 1 << 2;
        const SBF = 1 << 3;
        const IBF = 1 << 4;
        const ISBF = 1 << 5;
    }
}

impl ClassFlags {
    pub fn names(&self) -> Vec<&'static str> {
        if self.is_empty() {
            return vec!["Neither"];
        }
        self.iter_names().map(|(n, _)| n).collect()
    }
}

/// The functional form of `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiKind {
    Identity,
    /// `λ^δ`
    Power {
        delta: f64,
    },
    /// `aλ / (λ + 1)`
    Ratio {
        a: f64,
    },
    /// `(λ + 1)^α - 1`
    ShiftedPower {
        alpha: f64,
    },
    /// `sqrt(aλ / (λ + 1))`
    SqrtRatio {
        a: f64,
    },
    /// `λ e^λ`, the inverse of the Lambert function.
    ExpLinear,
    /// `log(1 + λ^α)`
    LogPower {
        alpha: f64,
    },
    /// `log(cosh(sqrt(2λ)))`
    LogCosh,
    /// `log(1 + λ / a)`
    LogShift {
        a: f64,
    },
    /// `(λ + a) / (λ + b)`
    RationalShift {
        a: f64,
        b: f64,
    },
    /// `(λ² + λ + 1) / (λ² - λ + 1)`
    RatioQuadratic,
    /// `λ(λ + 2) = (λ + 1)² - 1`
    QuadraticShift,
    /// Compositional inverse of a strictly increasing function vanishing at `0+`,
    /// evaluated by root finding.
    NumericInverseOf(Box<PhiFunction>),
}

/// An immutable `φ` with its domain `(0, Λ)` and class metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    kind: PhiKind,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "parameter {name} must be positive, got {v}"
        )))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "parameter {name} must lie in (0, 1), got {v}"
        )))
    }
}

impl PhiFunction {
    pub fn new(kind: PhiKind) -> Result<Self> {
        match &kind {
            PhiKind::Power { delta } => check_positive("delta", *delta)?,
            PhiKind::Ratio { a } | PhiKind::SqrtRatio { a } | PhiKind::LogShift { a } => {
                check_positive("a", *a)?
            }
            PhiKind::ShiftedPower { alpha } | PhiKind::LogPower { alpha } => {
                check_unit("alpha", *alpha)?
            }
            PhiKind::RationalShift { a, b } => {
                check_positive("a", *a)?;
                check_positive("b", *b)?;
            }
            PhiKind::NumericInverseOf(inner) => {
                if let PhiKind::NumericInverseOf(g) = &inner.kind {
                    return Ok((**g).clone());
                }
                let f = inner.flags();
                if !(f.contains(ClassFlags::BF0) || f.contains(ClassFlags::IBF)) {
                    return Err(Error::Precondition(format!(
                        "{inner} is not a non-constant increasing function vanishing at 0+"
                    )));
                }
            }
            PhiKind::Identity
            | PhiKind::ExpLinear
            | PhiKind::LogCosh
            | PhiKind::RatioQuadratic
            | PhiKind::QuadraticShift => {}
        }
        Ok(PhiFunction { kind })
    }

    pub fn identity() -> Self {
        PhiFunction {
            kind: PhiKind::Identity,
        }
    }

    pub fn power(delta: f64) -> Result<Self> {
        Self::new(PhiKind::Power { delta })
    }

    pub fn ratio(a: f64) -> Result<Self> {
        Self::new(PhiKind::Ratio { a })
    }

    pub fn log_shift(a: f64) -> Result<Self> {
        Self::new(PhiKind::LogShift { a })
    }

    pub fn rational_shift(a: f64, b: f64) -> Result<Self> {
        Self::new(PhiKind::RationalShift { a, b })
    }

    pub fn quadratic_shift() -> Self {
        PhiFunction {
            kind: PhiKind::QuadraticShift,
        }
    }

    pub fn ratio_quadratic() -> Self {
        PhiFunction {
            kind: PhiKind::RatioQuadratic,
        }
    }

    /// The Lambert function on the positive half line, i.e. the numeric
    /// inverse of `λ e^λ`.
    pub fn lambert() -> Self {
        PhiFunction {
            kind: PhiKind::NumericInverseOf(Box::new(PhiFunction {
                kind: PhiKind::ExpLinear,
            })),
        }
    }

    /// The compositional inverse. Inverting a numeric inverse returns the inner function.
    pub fn inverse(&self) -> Result<Self> {
        Self::new(PhiKind::NumericInverseOf(Box::new(self.clone())))
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            PhiKind::Identity => "identity",
            PhiKind::Power { .. } => "power",
            PhiKind::Ratio { .. } => "ratio",
            PhiKind::ShiftedPower { .. } => "shiftedpower",
            PhiKind::SqrtRatio { .. } => "sqrtratio",
            PhiKind::ExpLinear => "explinear",
            PhiKind::LogPower { .. } => "logpower",
            PhiKind::LogCosh => "logcosh",
            PhiKind::LogShift { .. } => "logshift",
            PhiKind::RationalShift { .. } => "rationalshift",
            PhiKind::RatioQuadratic => "ratioquadratic",
            PhiKind::QuadraticShift => "quadraticshift",
            PhiKind::NumericInverseOf(inner) if inner.kind == PhiKind::ExpLinear => "lambert",
            PhiKind::NumericInverseOf(_) => "inverse",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            PhiKind::Power { delta } => vec![*delta],
            PhiKind::Ratio { a } | PhiKind::SqrtRatio { a } | PhiKind::LogShift { a } => vec![*a],
            PhiKind::ShiftedPower { alpha } | PhiKind::LogPower { alpha } => vec![*alpha],
            PhiKind::RationalShift { a, b } => vec![*a, *b],
            _ => Vec::new(),
        }
    }

    /// Canonical string id.
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Right end `Λ` of the domain `(0, Λ)`; infinite for unbounded domains.
    pub fn domain_sup(&self) -> f64 {
        match &self.kind {
            PhiKind::NumericInverseOf(inner) => inner.limit_at_sup(),
            _ => f64::INFINITY,
        }
    }

    /// `lim φ(x)` as `x → Λ-`.
    pub fn limit_at_sup(&self) -> f64 {
        match &self.kind {
            PhiKind::Ratio { a } => *a,
            PhiKind::SqrtRatio { a } => a.sqrt(),
            PhiKind::RationalShift { .. } | PhiKind::RatioQuadratic => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Whether `φ` stays bounded on its domain.
    pub fn is_bounded(&self) -> bool {
        self.limit_at_sup().is_finite()
    }

    pub fn flags(&self) -> ClassFlags {
        use ClassFlags as F;
        let bernstein = F::BF | F::BF0 | F::CBF | F::SBF;
        match &self.kind {
            PhiKind::Identity => bernstein | F::IBF | F::ISBF,
            PhiKind::Power { delta } if *delta == 1.0 => bernstein | F::IBF | F::ISBF,
            PhiKind::Power { delta } if *delta < 1.0 => bernstein,
            PhiKind::Power { .. } => F::IBF | F::ISBF,
            PhiKind::Ratio { .. }
            | PhiKind::ShiftedPower { .. }
            | PhiKind::SqrtRatio { .. }
            | PhiKind::LogPower { .. }
            | PhiKind::LogShift { .. } => bernstein,
            PhiKind::LogCosh => F::BF | F::BF0,
            PhiKind::ExpLinear | PhiKind::QuadraticShift => F::IBF | F::ISBF,
            PhiKind::RationalShift { a, b } if a <= b => F::BF | F::CBF | F::SBF,
            PhiKind::RationalShift { .. } | PhiKind::RatioQuadratic => F::empty(),
            PhiKind::NumericInverseOf(inner) => {
                let g = inner.flags();
                let mut out = F::empty();
                if g.contains(F::BF0) {
                    out |= F::IBF;
                }
                if g.contains(F::BF0) && g.contains(F::SBF) {
                    out |= F::ISBF;
                }
                if g.contains(F::IBF) {
                    out |= F::BF | F::BF0;
                }
                if g.contains(F::ISBF) {
                    out |= F::SBF;
                }
                out
            }
        }
    }

    /// Whether `φ` is non-decreasing on its whole domain.
    pub fn is_nondecreasing(&self) -> bool {
        match &self.kind {
            PhiKind::RationalShift { a, b } => a <= b,
            PhiKind::RatioQuadratic => false,
            _ => true,
        }
    }

    /// A lower bound for `φ(k)` valid for every integer `k > n` in the domain.
    /// Non-monotone catalog kinds decrease towards their limit beyond `k = 1`.
    pub fn tail_lower_bound(&self, n: usize) -> Result<f64> {
        if self.is_nondecreasing() {
            self.eval((n + 1) as f64)
        } else {
            Ok(self.limit_at_sup())
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let sup = self.domain_sup();
        if x.is_nan() || x <= 0.0 || x >= sup {
            Err(Error::Domain(format!(
                "{self} evaluated at {x}, outside (0, {sup})"
            )))
        } else {
            Ok(())
        }
    }

    /// `φ(x)` for `x` in `(0, Λ)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        match &self.kind {
            PhiKind::NumericInverseOf(inner) => invert(inner, x),
            _ => Ok(self.formula(&x)),
        }
    }

    /// `ln φ(x)`.
    pub fn ln_eval(&self, x: f64) -> Result<f64> {
        let v = self.eval(x)?;
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(Error::Domain(format!(
                "{self}({x}) = {v} is not a positive finite value"
            )))
        }
    }

    /// `[φ(x), φ'(x), ..., φ^(order)(x)]`.
    pub fn derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                order,
                phi: self.id(),
            });
        }
        self.check_domain(x)?;
        match &self.kind {
            PhiKind::NumericInverseOf(inner) => {
                let mut out = Vec::with_capacity(order + 1);
                out.push(invert(inner, x)?);
                for n in 1..=order {
                    out.push(inverse_derivative(inner, x, n)?);
                }
                Ok(out)
            }
            _ => Ok(self.formula(&Jet::variable(x, order)).derivatives()),
        }
    }

    /// `[ln φ(x), (ln φ)'(x), ..., (ln φ)^(order)(x)]`.
    pub fn ln_derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let jet = match &self.kind {
            PhiKind::NumericInverseOf(_) => Jet::from_derivatives(&self.derivatives(x, order)?),
            _ => {
                if order > MAX_DERIVATIVE_ORDER {
                    return Err(Error::UnsupportedOrder {
                        order,
                        phi: self.id(),
                    });
                }
                self.check_domain(x)?;
                self.formula(&Jet::variable(x, order))
            }
        };
        if !(jet.coefficients()[0] > 0.0) {
            return Err(Error::Domain(format!("{self}({x}) is not positive")));
        }
        Ok(jet.ln().derivatives())
    }

    /// `φ^(order)(x)`.
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        Ok(self.derivatives(x, order)?[order])
    }

    /// Closed-form expression shared by the value and Taylor paths.
    /// Never called for numeric inverses.
    pub(crate) fn formula<T: Real>(&self, x: &T) -> T {
        match &self.kind {
            PhiKind::Identity => x.clone(),
            PhiKind::Power { delta } => x.powf(*delta),
            PhiKind::Ratio { a } => x.mul_s(*a) / x.add_s(1.0),
            PhiKind::ShiftedPower { alpha } => x.add_s(1.0).powf(*alpha).add_s(-1.0),
            PhiKind::SqrtRatio { a } => (x.mul_s(*a) / x.add_s(1.0)).sqrt(),
            PhiKind::ExpLinear => x.clone() * x.exp(),
            PhiKind::LogPower { alpha } => x.powf(*alpha).ln_1p(),
            PhiKind::LogCosh => {
                let y = x.mul_s(2.0).sqrt();
                if y.value() < 1.0 {
                    // cosh y - 1 = expm1(y)^2 / (2 e^y)
                    let em1 = y.exp_m1();
                    (em1.clone() * em1 / y.exp().mul_s(2.0)).ln_1p()
                } else {
                    y.clone() + (-y.mul_s(2.0)).exp().ln_1p().add_s(-std::f64::consts::LN_2)
                }
            }
            PhiKind::LogShift { a } => x.mul_s(1.0 / *a).ln_1p(),
            PhiKind::RationalShift { a, b } => x.add_s(*a) / x.add_s(*b),
            PhiKind::RatioQuadratic => {
                let sq = x.clone() * x.clone();
                (sq.clone() + x.clone()).add_s(1.0) / (sq - x.clone()).add_s(1.0)
            }
            PhiKind::QuadraticShift => x.clone() * x.add_s(2.0),
            PhiKind::NumericInverseOf(_) => unreachable!("numeric inverse has no closed form"),
        }
    }

    /// Closed-form compositional inverse `h(s)`, when the catalog records one.
    pub fn closed_form_inverse(&self, s: f64) -> Option<f64> {
        let v = match &self.kind {
            PhiKind::Identity => s,
            PhiKind::Power { delta } => s.powf(1.0 / delta),
            PhiKind::Ratio { a } => s / (a - s),
            PhiKind::ShiftedPower { alpha } => ((1.0 / alpha) * s.ln_1p()).exp_m1(),
            PhiKind::SqrtRatio { a } => s * s / (a - s * s),
            PhiKind::LogPower { alpha } => s.exp_m1().powf(1.0 / alpha),
            PhiKind::LogCosh => {
                // (1/2) arccosh(e^s)^2 with arccosh(c) = ln1p((c-1) + sqrt((c-1)(c+1)))
                let em1 = s.exp_m1();
                let t = (em1 + (em1 * (em1 + 2.0)).sqrt()).ln_1p();
                0.5 * t * t
            }
            PhiKind::LogShift { a } => a * s.exp_m1(),
            PhiKind::QuadraticShift => s / ((1.0 + s).sqrt() + 1.0),
            PhiKind::NumericInverseOf(inner) => inner.eval(s).ok()?,
            PhiKind::ExpLinear | PhiKind::RationalShift { .. } | PhiKind::RatioQuadratic => {
                return None
            }
        };
        Some(v)
    }

    /// `ln ∏_{k=1}^{n} φ(k)` from a known closed form, when one exists.
    pub fn ln_closed_form_product(&self, n: u64) -> Option<f64> {
        let nf = n as f64;
        let lf = ln_gamma(nf + 1.0);
        match &self.kind {
            PhiKind::Identity => Some(lf),
            PhiKind::Power { delta } => Some(delta * lf),
            PhiKind::Ratio { a } => Some(nf * a.ln() - (nf + 1.0).ln()),
            PhiKind::QuadraticShift => Some(lf + ln_gamma(nf + 3.0) - std::f64::consts::LN_2),
            PhiKind::RationalShift { a, b } => Some(
                ln_gamma(a + 1.0 + nf) - ln_gamma(a + 1.0) - ln_gamma(b + 1.0 + nf)
                    + ln_gamma(b + 1.0),
            ),
            PhiKind::RatioQuadratic => Some((nf * nf + nf + 1.0).ln()),
            _ => None,
        }
    }

    /// `d(λ) = λ / φ(λ)`.
    pub fn dispersion_function(&self, x: f64) -> Result<f64> {
        Ok(x / self.eval(x)?)
    }
}

impl fmt::Display for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PhiKind::Identity => write!(f, "id"),
            PhiKind::ExpLinear => write!(f, "explinear"),
            PhiKind::LogCosh => write!(f, "logcosh"),
            PhiKind::RatioQuadratic => write!(f, "ratioquadratic"),
            PhiKind::QuadraticShift => write!(f, "quadraticshift"),
            PhiKind::RationalShift { a, b } => write!(f, "rationalshift:{a:?},{b:?}"),
            PhiKind::NumericInverseOf(inner) if inner.kind == PhiKind::ExpLinear => {
                write!(f, "lambert")
            }
            PhiKind::NumericInverseOf(inner) => write!(f, "inv:{inner}"),
            _ => write!(f, "{}:{:?}", self.kind_name(), self.params()[0]),
        }
    }
}

impl FromStr for PhiFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("inv:") {
            return rest.parse::<PhiFunction>()?.inverse();
        }
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let params: Vec<f64> = match args {
            Some(a) => a
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("parameter {p:?} in phi id {s:?}")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "phi id {s:?}: {name} takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "id" | "identity" => {
                want(0)?;
                PhiKind::Identity
            }
            "power" => {
                want(1)?;
                PhiKind::Power { delta: params[0] }
            }
            "ratio" => {
                want(1)?;
                PhiKind::Ratio { a: params[0] }
            }
            "shiftedpower" => {
                want(1)?;
                PhiKind::ShiftedPower { alpha: params[0] }
            }
            "sqrtratio" => {
                want(1)?;
                PhiKind::SqrtRatio { a: params[0] }
            }
            "explinear" => {
                want(0)?;
                PhiKind::ExpLinear
            }
            "lambert" => {
                want(0)?;
                return Ok(PhiFunction::lambert());
            }
            "logpower" => {
                want(1)?;
                PhiKind::LogPower { alpha: params[0] }
            }
            "logcosh" => {
                want(0)?;
                PhiKind::LogCosh
            }
            "logshift" => {
                want(1)?;
                PhiKind::LogShift { a: params[0] }
            }
            "rationalshift" => {
                want(2)?;
                PhiKind::RationalShift {
                    a: params[0],
                    b: params[1],
                }
            }
            "ratioquadratic" => {
                want(0)?;
                PhiKind::RatioQuadratic
            }
            "quadraticshift" => {
                want(0)?;
                PhiKind::QuadraticShift
            }
            other => return Err(Error::Parse(format!("unknown phi kind {other:?}"))),
        };
        PhiFunction::new(kind)
    }
}

impl Serialize for PhiFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for PhiFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Central finite-difference estimate of `g^(order)(x)` with an order-dependent
/// step `ε^(1/(order+2)) · max(1, |x|)` (`1e-6 · max(1, |x|)` for `order = 1`).
pub fn central_difference(g: impl Fn(f64) -> Result<f64>, x: f64, order: usize) -> Result<f64> {
    let scale = x.abs().max(1.0);
    let h = match order {
        1 => 1e-6 * scale,
        _ => f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale,
    };
    // Binomial stencil on the points x + (order/2 - i) h.
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=order {
        let offset = order as f64 / 2.0 - i as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * g(x + offset * h)?;
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    Ok(acc / h.powi(order as i32))
}
