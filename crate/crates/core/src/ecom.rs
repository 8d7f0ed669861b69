//! The eCOM-Poisson distribution
//!
//! ```text
//! P(X = n) = ρ^n / (φ(1) ⋯ φ(n) · Z(ρ, φ)),   n ∈ ℕ, n < Λ,
//! ```
//!
//! with normalizer `Z(ρ, φ) = Σ_n ρ^n / ∏_{k ≤ n} φ(k)`. For `φ = id` this
//! is Poisson(ρ); for `φ(n) = n^δ` it is COM-Poisson.
//!
//! Infinite series are truncated with a certified ratio bound: once every
//! `φ(k)`, `k > n`, is at least `L_n > ρ`, the omitted terms are dominated by a
//! geometric series with ratio `ρ / L_n`.

use std::sync::RwLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phi::PhiFunction;
use crate::stirling::StirlingTable;

/// Highest moment order served by [`EComPoisson::moment`].
pub const MAX_MOMENT_ORDER: usize = 12;

/// Relative margin below `sup φ` required of `ρ` for bounded `φ`.
const BOUNDED_MARGIN: f64 = 1e-9;

pub fn default_tol() -> f64 {
    1e-14
}

/// Serde representation of a support cap: a positive number or `"inf"`.
pub mod cap_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            Repr::Str("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(f64::INFINITY)
            }
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "lambda_cap must be a number or \"inf\", got {s:?}"
            ))),
        }
    }

    pub fn infinite() -> f64 {
        f64::INFINITY
    }
}

/// JSON description of a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub phi: PhiFunction,
    pub rho: f64,
    #[serde(with = "cap_serde", default = "cap_serde::infinite")]
    pub lambda_cap: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl DistSpec {
    pub fn new(phi: PhiFunction, rho: f64) -> Self {
        DistSpec {
            phi,
            rho,
            lambda_cap: f64::INFINITY,
            tol: default_tol(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("distribution spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Series truncation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Certified omitted mass relative to the partial sum.
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            tol: default_tol(),
            max_terms: 100_000,
        }
    }
}

/// Lazily extended table of log-terms `ln(ρ^n / ∏ φ(k))` and the CDF.
#[derive(Debug, Clone)]
struct Table {
    /// `φ(1), φ(2), ...`
    phi_values: Vec<f64>,
    ln_terms: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Debug)]
pub struct EComPoisson {
    phi: PhiFunction,
    rho: f64,
    lambda_cap: f64,
    /// Largest admissible state, `None` for unbounded support.
    max_state: Option<usize>,
    trunc: Truncation,
    ln_z: f64,
    n_trunc: usize,
    /// Certified bound on the omitted mass relative to `Z`.
    tail_bound: f64,
    table: RwLock<Table>,
}

/// Result of [`EComPoisson::markov_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovBound {
    pub a: f64,
    pub bound: f64,
    pub exact_tail: f64,
    /// `exact_tail ≤ bound + 1e-12`; can fail when `φ` is not non-decreasing.
    pub holds: bool,
}

/// Serializable overview used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub phi: String,
    pub rho: f64,
    #[serde(with = "cap_serde")]
    pub lambda_cap: f64,
    pub z: f64,
    pub ln_z: f64,
    pub n_trunc: usize,
    pub tail_bound: f64,
}

/// Largest integer strictly below `cap`.
fn largest_state_below(cap: f64) -> Option<usize> {
    if cap.is_infinite() {
        None
    } else if cap.fract() == 0.0 {
        Some(cap as usize - 1)
    } else {
        Some(cap.floor() as usize)
    }
}

/// `n (n-1) ⋯ (n-j+1)` as a float.
pub fn falling_factorial(n: usize, j: usize) -> f64 {
    if j > n {
        return 0.0;
    }
    (n + 1 - j..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl EComPoisson {
    pub fn new(phi: PhiFunction, rho: f64) -> Result<Self> {
        Self::with_options(phi, rho, f64::INFINITY, Truncation::default())
    }

    pub fn from_spec(spec: &DistSpec) -> Result<Self> {
        let trunc = Truncation {
            tol: spec.tol,
            ..Truncation::default()
        };
        Self::with_options(spec.phi.clone(), spec.rho, spec.lambda_cap, trunc)
    }

    /// Builds the distribution with support `{n ∈ ℕ : n < min(lambda_cap, Λ_φ)}`.
    pub fn with_options(
        phi: PhiFunction,
        rho: f64,
        lambda_cap: f64,
        trunc: Truncation,
    ) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!(
                "rho must be finite and >= 0, got {rho}"
            )));
        }
        if !(lambda_cap > 0.0) {
            return Err(Error::Config(format!(
                "lambda_cap must be positive, got {lambda_cap}"
            )));
        }
        if !(trunc.tol > 0.0 && trunc.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                trunc.tol
            )));
        }
        let cap = lambda_cap.min(phi.domain_sup());
        let max_state = largest_state_below(cap);
        if max_state.is_none() {
            let sup = phi.limit_at_sup();
            if sup.is_finite() && rho > (1.0 - BOUNDED_MARGIN) * sup {
                return Err(Error::Divergence(format!(
                    "rho = {rho} must be below sup {phi} = {sup} for the series to converge"
                )));
            }
        }
        if let Some(m) = max_state {
            if m > trunc.max_terms {
                return Err(Error::Resource(format!(
                    "support of {m} states exceeds max_terms = {}",
                    trunc.max_terms
                )));
            }
        }

        let mut table = Table {
            phi_values: Vec::new(),
            ln_terms: vec![0.0],
            cdf: Vec::new(),
        };
        let ln_rho = rho.ln();
        let ln_tol = trunc.tol.ln();
        let nondecreasing = phi.is_nondecreasing();
        let mut ln_partial = 0.0;
        let mut n = 0;
        let tail_rel;
        loop {
            if Some(n) == max_state {
                tail_rel = 0.0;
                break;
            }
            let next = phi.eval((n + 1) as f64)?;
            let lower = if nondecreasing {
                next
            } else {
                phi.limit_at_sup()
            };
            let r = rho / lower;
            if r < 1.0 {
                let ln_tail = table.ln_terms[n] + r.ln() - (-r).ln_1p();
                if ln_tail - ln_partial <= ln_tol {
                    tail_rel = (ln_tail - ln_partial).exp();
                    break;
                }
            }
            if n + 1 > trunc.max_terms {
                return Err(Error::Resource(format!(
                    "Z({rho}, {phi}) needs more than {} terms",
                    trunc.max_terms
                )));
            }
            table.phi_values.push(next);
            let t = table.ln_terms[n] + ln_rho - next.ln();
            table.ln_terms.push(t);
            ln_partial = crate::special::log_add_exp(ln_partial, t);
            n += 1;
        }

        let ln_z = log_sum_exp(&table.ln_terms);
        let mut acc = 0.0;
        table.cdf = table
            .ln_terms
            .iter()
            .map(|&t| {
                acc += (t - ln_z).exp();
                acc
            })
            .collect();
        Ok(EComPoisson {
            phi,
            rho,
            lambda_cap,
            max_state,
            trunc,
            ln_z,
            n_trunc: n,
            tail_bound: tail_rel,
            table: RwLock::new(table),
        })
    }

    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The support cap as requested (before intersecting with `φ`'s domain).
    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }

    /// Largest state of a finite support.
    pub fn max_state(&self) -> Option<usize> {
        self.max_state
    }

    pub fn spec(&self) -> DistSpec {
        DistSpec {
            phi: self.phi.clone(),
            rho: self.rho,
            lambda_cap: self.lambda_cap,
            tol: self.trunc.tol,
        }
    }

    /// `Z(ρ, φ)` over the certified truncation; the true value lies in
    /// `[Z, Z·(1 + tail_bound)]`.
    pub fn z(&self) -> f64 {
        self.ln_z.exp()
    }

    pub fn ln_z(&self) -> f64 {
        self.ln_z
    }

    /// Index of the last term in the certified partial sum.
    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn summary(&self) -> Summary {
        Summary {
            phi: self.phi.id(),
            rho: self.rho,
            lambda_cap: self.lambda_cap,
            z: self.z(),
            ln_z: self.ln_z,
            n_trunc: self.n_trunc,
            tail_bound: self.tail_bound,
        }
    }

    fn in_support(&self, n: usize) -> bool {
        self.max_state.is_none_or(|m| n <= m)
    }

    /// Extends the table so that index `n` exists (clamped to the support).
    fn ensure(&self, n: usize) -> Result<()> {
        let n = self.max_state.map_or(n, |m| n.min(m));
        if self.table.read().expect("table poisoned").ln_terms.len() > n {
            return Ok(());
        }
        if n > self.trunc.max_terms {
            return Err(Error::Resource(format!(
                "state {n} is beyond max_terms = {}",
                self.trunc.max_terms
            )));
        }
        let mut t = self.table.write().expect("table poisoned");
        let ln_rho = self.rho.ln();
        while t.ln_terms.len() <= n {
            let k = t.ln_terms.len();
            let v = self.phi.eval(k as f64)?;
            let ln_t = t.ln_terms[k - 1] + ln_rho - v.ln();
            let p = (ln_t - self.ln_z).exp();
            let c = t.cdf[k - 1] + p;
            t.phi_values.push(v);
            t.ln_terms.push(ln_t);
            t.cdf.push(c);
        }
        Ok(())
    }

    /// `ln P(X = n)`.
    pub fn ln_pmf(&self, n: usize) -> Result<f64> {
        if !self.in_support(n) {
            return Err(Error::Domain(format!(
                "state {n} lies outside the support n < {}",
                self.lambda_cap.min(self.phi.domain_sup())
            )));
        }
        self.ensure(n)?;
        Ok(self.table.read().expect("table poisoned").ln_terms[n] - self.ln_z)
    }

    pub fn pmf(&self, n: usize) -> Result<f64> {
        Ok(self.ln_pmf(n)?.exp())
    }

    /// `P(X ≤ n)`.
    pub fn cdf(&self, n: usize) -> Result<f64> {
        let n = self.max_state.map_or(n, |m| n.min(m));
        self.ensure(n)?;
        Ok(self.table.read().expect("table poisoned").cdf[n].min(1.0))
    }

    /// Smallest `n` with `P(X ≤ n) ≥ q`.
    pub fn quantile(&self, q: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "quantile level must lie in [0, 1], got {q}"
            )));
        }
        self.search_cdf(q, |c, q| c >= q)
    }

    fn search_cdf(&self, q: f64, hit: impl Fn(f64, f64) -> bool) -> Result<usize> {
        loop {
            {
                let t = self.table.read().expect("table poisoned");
                let idx = t.cdf.partition_point(|&c| !hit(c, q));
                if idx < t.cdf.len() {
                    return Ok(idx);
                }
                let len = t.cdf.len();
                if self.max_state.is_some_and(|m| len > m) {
                    // rounding left the finite CDF a hair below q
                    return Ok(len - 1);
                }
                if q >= 1.0 && self.max_state.is_none() {
                    return Err(Error::Domain("quantile(1) of an unbounded support".into()));
                }
            }
            let len = self.table.read().expect("table poisoned").cdf.len();
            self.ensure(2 * len)?;
        }
    }

    /// `E u^X = Z(uρ, φ)/Z(ρ, φ)` for `|u| ≤ 1`.
    pub fn pgf(&self, u: f64) -> Result<f64> {
        if !(u.abs() <= 1.0) {
            return Err(Error::Domain(format!("pgf needs |u| <= 1, got {u}")));
        }
        let t = self.table.read().expect("table poisoned");
        let mut pow = 1.0;
        let mut acc = 0.0;
        for &ln_t in &t.ln_terms[..=self.n_trunc] {
            acc += pow * (ln_t - self.ln_z).exp();
            pow *= u;
        }
        Ok(acc)
    }

    /// Inverse-CDF draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<usize>> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                self.search_cdf(u, |c, u| c > u)
            })
            .collect()
    }

    /// `Σ_n w(n) P(X = n)`, extending the table until the tail is certified.
    /// `growth(n)` must bound `w(k+1)/w(k)` for every `k ≥ n` where it is finite.
    fn weighted_sum(&self, w: impl Fn(usize) -> f64, growth: impl Fn(usize) -> f64) -> Result<f64> {
        let nondecreasing = self.phi.is_nondecreasing();
        let mut acc = 0.0;
        let mut n = 0;
        loop {
            self.ensure(n + 1)?;
            let (p, next_phi) = {
                let t = self.table.read().expect("table poisoned");
                let p = (t.ln_terms[n] - self.ln_z).exp();
                (p, t.phi_values.get(n).copied())
            };
            let term = w(n) * p;
            acc += term;
            let Some(next_phi) = next_phi.filter(|_| self.in_support(n + 1)) else {
                return Ok(acc);
            };
            if n >= self.n_trunc {
                let lower = if nondecreasing {
                    next_phi
                } else {
                    self.phi.limit_at_sup()
                };
                let q = growth(n) * self.rho / lower;
                if q < 1.0 && term * q / (1.0 - q) <= self.trunc.tol * acc.abs() {
                    return Ok(acc);
                }
            }
            n += 1;
            if n > self.trunc.max_terms {
                return Err(Error::Resource(format!(
                    "weighted series needs more than {} terms",
                    self.trunc.max_terms
                )));
            }
        }
    }

    fn check_order(s: usize) -> Result<()> {
        if (1..=MAX_MOMENT_ORDER).contains(&s) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "moment order must lie in 1..={MAX_MOMENT_ORDER}, got {s}"
            )))
        }
    }

    /// `m_s = E[X (X-1) ⋯ (X-s+1)] = ρ^s D^s Z / Z`, summed termwise.
    pub fn factorial_moment(&self, s: usize) -> Result<f64> {
        Self::check_order(s)?;
        self.falling_sum(s)
    }

    fn falling_sum(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Ok(1.0);
        }
        self.weighted_sum(
            |n| falling_factorial(n, j),
            |n| {
                if n + 1 > j {
                    (n + 1) as f64 / (n + 1 - j) as f64
                } else {
                    f64::INFINITY
                }
            },
        )
    }

    /// `ρ^j D^j Z(ρ, φ)`, i.e. `Z · m_j`.
    pub fn rho_pow_d_z(&self, j: usize) -> Result<f64> {
        Ok(self.falling_sum(j)? * self.z())
    }

    /// `D^j Z(ρ, φ)`, the `j`-th derivative of the normalizer in `ρ`.
    pub fn d_z(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Ok(self.z());
        }
        Ok(self.rho_pow_d_z(j)? / self.rho.powi(j as i32))
    }

    /// `E X^s = Σ_j {s over j} m_j`.
    pub fn moment(&self, s: usize) -> Result<f64> {
        Self::check_order(s)?;
        let table = StirlingTable::global();
        let mut acc = 0.0;
        for j in 1..=s {
            acc += table.get(s, j) as f64 * self.falling_sum(j)?;
        }
        Ok(acc)
    }

    pub fn mean(&self) -> Result<f64> {
        self.factorial_moment(1)
    }

    pub fn variance(&self) -> Result<f64> {
        let m1 = self.falling_sum(1)?;
        Ok(self.falling_sum(2)? + m1 - m1 * m1)
    }

    /// `E[φ(X) φ(X-1) ⋯ φ(X-s+1)]`, summed directly over `n ≥ s`.
    ///
    /// States `n < s` would need `φ` at non-positive arguments and are
    /// dropped. Over an unbounded support the result is `ρ^s`.
    pub fn phi_factorial_moment(&self, s: usize) -> Result<f64> {
        if s == 0 {
            return Err(Error::Domain("phi-factorial moment needs s >= 1".into()));
        }
        let end = match self.max_state {
            Some(m) => m,
            None => self.n_trunc + s,
        };
        self.ensure(end)?;
        let t = self.table.read().expect("table poisoned");
        let mut acc = 0.0;
        for n in s..=end {
            let prod: f64 = (0..s).map(|i| t.phi_values[n - i - 1]).product();
            acc += prod * (t.ln_terms[n] - self.ln_z).exp();
        }
        Ok(acc)
    }

    /// `P(X ≥ a)` against `ρ/φ(a)`.
    pub fn markov_bound(&self, a: f64) -> Result<MarkovBound> {
        let bound = self.rho / self.phi.eval(a)?;
        let first = a.ceil() as usize;
        let exact_tail = if !self.in_support(first) {
            0.0
        } else {
            // 1 - cdf(first - 1), summed from the small side
            let head = if first == 0 {
                0.0
            } else {
                self.cdf(first - 1)?
            };
            if head > 0.5 {
                self.weighted_sum(|n| if n >= first { 1.0 } else { 0.0 }, |_| 1.0)?
            } else {
                1.0 - head
            }
        };
        let holds = exact_tail <= bound + 1e-12;
        if !holds {
            log::warn!(
                "Markov bound fails for {} at a = {a}: {exact_tail} > {bound}",
                self.phi
            );
        }
        Ok(MarkovBound {
            a,
            bound,
            exact_tail,
            holds,
        })
    }

    /// `P(X = n)` for `n = 0..=n_trunc`.
    pub fn pmf_table(&self) -> Vec<f64> {
        let t = self.table.read().expect("table poisoned");
        t.ln_terms[..=self.n_trunc]
            .iter()
            .map(|&l| (l - self.ln_z).exp())
            .collect()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let v = (x - m).exp();
        let t = sum + v;
        comp += if sum >= v {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    m + (sum + comp).ln()
}
