//! The generalized eCOM-Poisson family
//!
//! ```text
//! P(X = n) = Γ(n + γ) ρ^n / (n! · V_φ(αn + β) · Z_{α,β,γ}(ρ, φ))
//! ```
//!
//! where `V_φ` solves `V(x + 1) = φ(x) V(x)` with `V(1) = 1` (the integer
//! product on integers, the Bernstein-gamma limit elsewhere). Special cases:
//! `α = β = γ = 1` is the eCOM-Poisson law; with `φ = id` and `γ = 1` the
//! normalizer is a Mittag-Leffler function.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::dispersion::Classification;
use crate::ecom::{default_tol, Truncation};
use crate::error::{Error, Result};
use crate::gamma::BernsteinGammaEvaluator;
use crate::phi::PhiFunction;
use crate::special::{ln_gamma, log_add_exp, trigamma};
use crate::stirling::StirlingTable;

/// Grid for the trigamma comparison test.
pub const PSI_GRID: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Relative band inside which the moment test reports equidispersion.
const EQUI_BAND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VMode {
    /// Exact products whenever `αn + β` is an integer, the limit otherwise.
    #[default]
    IntegerProductWhenAligned,
    /// Always route the fractional part through the limit formula.
    RealLimit,
}

fn one() -> f64 {
    1.0
}

/// JSON description of a generalized distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedSpec {
    pub phi: PhiFunction,
    pub rho: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl ExtendedSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("extended spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

type Key = (u64, u64, u64);

#[derive(Debug)]
pub struct ExtendedDist {
    phi: PhiFunction,
    rho: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    v_mode: VMode,
    trunc: Truncation,
    evaluator: OnceLock<std::result::Result<BernsteinGammaEvaluator, Error>>,
    /// `ln Z_{α', β', γ'}` for every index triple evaluated so far.
    z_cache: RwLock<HashMap<Key, f64>>,
}

/// Both readings of the Turán-type expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuranReport {
    /// `Z_{α,α+β,γ+1} + ρ Z_{2α,α+β,γ+2} - ρ Z_{α,α+β,γ+1}² / Z_{α,β,γ}`.
    pub printed: f64,
    /// The same with `Z_{α,2α+β,γ+2}` in the middle term; equals `Var·Z/ρ`.
    pub alternative: f64,
    pub printed_nonnegative: bool,
    pub alternative_nonnegative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentDispersion {
    pub classification: Classification,
    /// `(Z Z_{α,2α+β,γ+2} - Z_{α,α+β,γ+1}²) / Z_{α,α+β,γ+1}²`.
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiDispersion {
    pub grid: Vec<f64>,
    /// `ψ'(y + γ)` for the classical trigamma.
    pub lhs: Vec<f64>,
    /// `α ψ'_φ(αy + β)`.
    pub rhs: Vec<f64>,
    pub classification: Classification,
    /// `α² ψ'_φ(αy + β)`, the chain-rule reading.
    pub rhs_alpha_squared: Vec<f64>,
    pub classification_alpha_squared: Classification,
}

fn key(a: f64, b: f64, c: f64) -> Key {
    (a.to_bits(), b.to_bits(), c.to_bits())
}

/// Pointwise `lhs ≥ rhs` (over) or `≤` (under), with a relative tie band.
fn compare_on_grid(lhs: &[f64], rhs: &[f64]) -> Classification {
    let tol = 1e-8;
    let mut ge = true;
    let mut le = true;
    let mut all_equal = true;
    for (&l, &r) in lhs.iter().zip(rhs) {
        let band = tol * l.abs().max(r.abs());
        if (l - r).abs() > band {
            all_equal = false;
            ge &= l > r;
            le &= l < r;
        }
    }
    if all_equal {
        Classification::Equi
    } else if ge {
        Classification::Over
    } else if le {
        Classification::Under
    } else {
        Classification::Indeterminate
    }
}

impl ExtendedDist {
    pub fn new(phi: PhiFunction, rho: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::with_options(
            phi,
            rho,
            alpha,
            beta,
            gamma,
            VMode::default(),
            Truncation::default(),
        )
    }

    pub fn from_spec(spec: &ExtendedSpec) -> Result<Self> {
        let trunc = Truncation {
            tol: spec.tol,
            ..Truncation::default()
        };
        Self::with_options(
            spec.phi.clone(),
            spec.rho,
            spec.alpha,
            spec.beta,
            spec.gamma,
            VMode::default(),
            trunc,
        )
    }

    pub fn with_options(
        phi: PhiFunction,
        rho: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        v_mode: VMode,
        trunc: Truncation,
    ) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!(
                "rho must be finite and >= 0, got {rho}"
            )));
        }
        if !(trunc.tol > 0.0 && trunc.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                trunc.tol
            )));
        }
        if phi.domain_sup().is_finite() {
            return Err(Error::Precondition(format!(
                "{phi} is defined only on (0, {}); the generalized family needs (0, inf)",
                phi.domain_sup()
            )));
        }
        let d = ExtendedDist {
            phi,
            rho,
            alpha,
            beta,
            gamma,
            v_mode,
            trunc,
            evaluator: OnceLock::new(),
            z_cache: RwLock::new(HashMap::new()),
        };
        d.ln_z_general(alpha, beta, gamma)?;
        Ok(d)
    }

    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(α, β, γ)`.
    pub fn indices(&self) -> (f64, f64, f64) {
        (self.alpha, self.beta, self.gamma)
    }

    pub fn spec(&self) -> ExtendedSpec {
        ExtendedSpec {
            phi: self.phi.clone(),
            rho: self.rho,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            tol: self.trunc.tol,
        }
    }

    fn evaluator(&self) -> Result<&BernsteinGammaEvaluator> {
        self.evaluator
            .get_or_init(|| BernsteinGammaEvaluator::new(self.phi.clone()))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `ln V_φ(x)` via `V(x0 + m) = V(x0) φ(x0) ⋯ φ(x0 + m - 1)`, `x0 ∈ (0, 1]`.
    pub fn ln_v(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("V_phi needs x > 0, got {x}")));
        }
        let m = x.ceil() - 1.0;
        let x0 = x - m;
        let mut acc = 0.0;
        for i in 0..m as u64 {
            acc += self.phi.ln_eval(x0 + i as f64)?;
        }
        let aligned = x0 == 1.0;
        if !aligned || self.v_mode == VMode::RealLimit {
            acc += self.evaluator()?.ln_w_real(x0)?;
        }
        Ok(acc)
    }

    fn ln_term(&self, c: f64, k: usize, ln_v: f64) -> f64 {
        let kf = k as f64;
        let rho_part = if k == 0 { 0.0 } else { kf * self.rho.ln() };
        ln_gamma(kf + c) - ln_gamma(kf + 1.0) + rho_part - ln_v
    }

    /// `ln Z_{a,b,c}(ρ, φ) = ln Σ_k Γ(k + c) ρ^k / (k! V_φ(ak + b))`.
    pub fn ln_z_general(&self, a: f64, b: f64, c: f64) -> Result<f64> {
        let k3 = key(a, b, c);
        if let Some(&v) = self.z_cache.read().expect("cache poisoned").get(&k3) {
            return Ok(v);
        }
        let sup = self.phi.limit_at_sup();
        if sup.is_finite() && self.rho >= (1.0 - 1e-9) * sup.powf(a) {
            return Err(Error::Divergence(format!(
                "Z_{{{a},{b},{c}}} diverges: rho = {} is not below sup(phi)^alpha = {}",
                self.rho,
                sup.powf(a)
            )));
        }
        let integer_step = a.fract() == 0.0;
        let ln_tol = self.trunc.tol.ln();
        let mut ln_v = self.ln_v(b)?;
        let mut prev = self.ln_term(c, 0, ln_v);
        let mut ln_partial = prev;
        let mut prev_ratio = f64::INFINITY;
        let mut k = 0usize;
        loop {
            k += 1;
            if k > self.trunc.max_terms {
                let msg = format!(
                    "Z_{{{a},{b},{c}}}({}, {}) needs more than {} terms",
                    self.rho, self.phi, self.trunc.max_terms
                );
                return Err(if prev_ratio >= 1.0 {
                    Error::Divergence(msg)
                } else {
                    Error::Resource(msg)
                });
            }
            let x_prev = a * (k - 1) as f64 + b;
            let x = a * k as f64 + b;
            ln_v = if integer_step {
                let mut acc = ln_v;
                for i in 0..a as u64 {
                    acc += self.phi.ln_eval(x_prev + i as f64)?;
                }
                acc
            } else {
                self.ln_v(x)?
            };
            let t = self.ln_term(c, k, ln_v);
            ln_partial = log_add_exp(ln_partial, t);
            if t == f64::NEG_INFINITY {
                break;
            }
            let ratio = (t - prev).exp();
            // geometric bound once the term ratios are below 1 and non-increasing
            if ratio < 1.0 && ratio <= prev_ratio {
                let ln_tail = t + ratio.ln() - (-ratio).ln_1p();
                if ln_tail - ln_partial <= ln_tol {
                    break;
                }
            }
            prev_ratio = ratio;
            prev = t;
        }
        self.z_cache
            .write()
            .expect("cache poisoned")
            .insert(k3, ln_partial);
        Ok(ln_partial)
    }

    pub fn z_general(&self, a: f64, b: f64, c: f64) -> Result<f64> {
        Ok(self.ln_z_general(a, b, c)?.exp())
    }

    /// `Z_{α,β,γ}(ρ, φ)` of this distribution.
    pub fn normalizer(&self) -> Result<f64> {
        self.z_general(self.alpha, self.beta, self.gamma)
    }

    pub fn ln_pmf(&self, n: usize) -> Result<f64> {
        let ln_v = self.ln_v(self.alpha * n as f64 + self.beta)?;
        let t = self.ln_term(self.gamma, n, ln_v);
        Ok(t - self.ln_z_general(self.alpha, self.beta, self.gamma)?)
    }

    pub fn pmf(&self, n: usize) -> Result<f64> {
        Ok(self.ln_pmf(n)?.exp())
    }

    /// `m_s = ρ^s Z_{α, sα+β, γ+s} / Z_{α,β,γ}`.
    pub fn factorial_moment(&self, s: usize) -> Result<f64> {
        if s == 0 {
            return Err(Error::Domain("factorial moment order must be >= 1".into()));
        }
        let (a, b, c) = (self.alpha, self.beta, self.gamma);
        let sf = s as f64;
        let ln = sf * self.rho.ln() + self.ln_z_general(a, sf * a + b, c + sf)?
            - self.ln_z_general(a, b, c)?;
        Ok(ln.exp())
    }

    /// `E X^s = Σ_r {s over r} m_r`.
    pub fn moment(&self, s: usize) -> Result<f64> {
        if !(1..=crate::ecom::MAX_MOMENT_ORDER).contains(&s) {
            return Err(Error::Domain(format!(
                "moment order must lie in 1..=12, got {s}"
            )));
        }
        let table = StirlingTable::global();
        let mut acc = 0.0;
        for r in 1..=s {
            acc += table.get(s, r) as f64 * self.factorial_moment(r)?;
        }
        Ok(acc)
    }

    pub fn turan_check(&self) -> Result<TuranReport> {
        let (a, b, c) = (self.alpha, self.beta, self.gamma);
        let z = self.z_general(a, b, c)?;
        let z1 = self.z_general(a, a + b, c + 1.0)?;
        let printed_mid = self.z_general(2.0 * a, a + b, c + 2.0)?;
        let alt_mid = self.z_general(a, 2.0 * a + b, c + 2.0)?;
        let printed = z1 + self.rho * printed_mid - self.rho * z1 * z1 / z;
        let alternative = z1 + self.rho * alt_mid - self.rho * z1 * z1 / z;
        Ok(TuranReport {
            printed,
            alternative,
            printed_nonnegative: printed >= 0.0,
            alternative_nonnegative: alternative >= 0.0,
        })
    }

    /// Sign of `Z_{α,β,γ} Z_{α,2α+β,γ+2} - Z_{α,α+β,γ+1}²`, i.e. of `Var - E X`.
    pub fn moment_dispersion_test(&self) -> Result<MomentDispersion> {
        let (a, b, c) = (self.alpha, self.beta, self.gamma);
        let ln_z = self.ln_z_general(a, b, c)?;
        let ln_z1 = self.ln_z_general(a, a + b, c + 1.0)?;
        let ln_z2 = self.ln_z_general(a, 2.0 * a + b, c + 2.0)?;
        let rel = (ln_z + ln_z2 - 2.0 * ln_z1).exp_m1();
        let classification = if rel.abs() <= EQUI_BAND {
            Classification::Equi
        } else if rel > 0.0 {
            Classification::Over
        } else {
            Classification::Under
        };
        Ok(MomentDispersion {
            classification,
            relative_difference: rel,
        })
    }

    /// Compares `ψ'(y + γ)` with `α ψ'_φ(αy + β)` on [`PSI_GRID`].
    pub fn psi_dispersion_test(&self) -> Result<PsiDispersion> {
        let ev = self.evaluator()?;
        let grid = PSI_GRID.to_vec();
        let lhs: Vec<f64> = grid.iter().map(|&y| trigamma(y + self.gamma)).collect();
        let mut base = Vec::with_capacity(grid.len());
        for &y in &grid {
            base.push(ev.psi_prime(self.alpha * y + self.beta)?);
        }
        let rhs: Vec<f64> = base.iter().map(|v| self.alpha * v).collect();
        let rhs2: Vec<f64> = base.iter().map(|v| self.alpha * self.alpha * v).collect();
        Ok(PsiDispersion {
            classification: compare_on_grid(&lhs, &rhs),
            classification_alpha_squared: compare_on_grid(&lhs, &rhs2),
            grid,
            lhs,
            rhs,
            rhs_alpha_squared: rhs2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ext(id: &str, rho: f64, a: f64, b: f64, c: f64) -> ExtendedDist {
        ExtendedDist::new(id.parse().unwrap(), rho, a, b, c).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs()
    }

    #[test]
    fn reduces_to_poisson() {
        let d = ext("id", 1.0, 1.0, 1.0, 1.0);
        assert!(close(d.normalizer().unwrap(), std::f64::consts::E, 1e-14));
        assert!(close(d.pmf(1).unwrap(), (-1.0f64).exp(), 1e-13));
        let d = ext("id", 2.0, 1.0, 1.0, 1.0);
        assert!(close(d.factorial_moment(2).unwrap(), 4.0, 1e-12));
        let d = ext("id", 3.0, 1.0, 1.0, 1.0);
        assert!(close(d.moment(1).unwrap(), 3.0, 1e-12));
        assert!(close(d.moment(2).unwrap(), 12.0, 1e-12));
        assert_eq!(
            d.moment_dispersion_test().unwrap().classification,
            Classification::Equi
        );
    }

    #[test]
    fn half_alpha_uses_the_limit() {
        // Σ 0.5^k / Γ(k/2 + 1) = E_{1/2,1}(0.5) = e^{1/4} erfc(-1/2)
        let d = ext("id", 0.5, 0.5, 1.0, 1.0);
        let direct: f64 = (0..80)
            .map(|k| 0.5f64.powi(k) / ln_gamma(k as f64 / 2.0 + 1.0).exp())
            .sum();
        assert!(close(d.normalizer().unwrap(), direct, 1e-11));
    }

    #[test]
    fn psi_examples() {
        let p = ext("id", 1.0, 1.0, 2.0, 2.0).psi_dispersion_test().unwrap();
        assert_eq!(p.classification, Classification::Equi);
        let p = ext("power:2.0", 2.0, 1.0, 1.0, 1.0)
            .psi_dispersion_test()
            .unwrap();
        assert_eq!(p.classification, Classification::Under);
        let p = ext("id", 1.0, 1.0, 2.0, 1.0).psi_dispersion_test().unwrap();
        assert_eq!(p.classification, Classification::Over);
    }

    #[test]
    fn rejects_bad_input() {
        let id: PhiFunction = "id".parse().unwrap();
        assert!(matches!(
            ExtendedDist::new(id.clone(), 1.0, 0.0, 1.0, 1.0),
            Err(Error::Config(_))
        ));
        let capped: PhiFunction = "inv:ratio:20.0".parse().unwrap();
        assert!(matches!(
            ExtendedDist::new(capped, 0.1, 1.0, 1.0, 1.0),
            Err(Error::Precondition(_))
        ));
        let r: PhiFunction = "ratio:1.0".parse().unwrap();
        assert!(matches!(
            ExtendedDist::new(r, 1.5, 1.0, 1.0, 1.0),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn spec_defaults() {
        let s = ExtendedSpec::from_json(r#"{"phi":"id","rho":1.0,"beta":2.0}"#).unwrap();
        assert_eq!((s.alpha, s.beta, s.gamma), (1.0, 2.0, 1.0));
        assert_eq!(ExtendedSpec::from_json(&s.to_json()).unwrap(), s);
    }
}
