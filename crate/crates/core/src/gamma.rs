//! Bernstein-gamma functions.
//!
//! `W_φ(n) = φ(1) ⋯ φ(n-1)` on the positive integers, and on the positive
//! reals the limit
//!
//! ```text
//! W̃_φ(x) = lim_n φ(1) ⋯ φ(n) φ(n)^x / (φ(x) φ(x+1) ⋯ φ(x+n))
//! ```
//!
//! which satisfies `W̃(x + 1) = φ(x) W̃(x)` with `W̃(1) = 1`. For `φ = id`
//! this is Gauss's product for `Γ`. The limit converges like `1/n`; it is
//! evaluated in log scale on a doubling schedule and Richardson-extrapolated.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phi::PhiFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    IntegerProduct,
    RealLimit,
}

/// Doubling schedule `n = 2^min_log2, ..., 2^max_log2` and extrapolation settings.
#[derive(Debug, Clone, Copy)]
pub struct LimitSchedule {
    pub min_log2: u32,
    pub max_log2: u32,
    /// Number of Richardson eliminations (powers of `1/n` removed).
    pub depth: usize,
    /// Maximum disagreement between the last two extrapolants (log scale).
    pub tol: f64,
    /// Bound on `|φ(n)/φ(n+1) - 1|` at the schedule tail.
    pub ratio_tol: f64,
}

impl Default for LimitSchedule {
    fn default() -> Self {
        Self {
            min_log2: 6,
            max_log2: 14,
            depth: 0,
            tol: 1e-6,
            ratio_tol: 0.01,
        }
    }
}

impl LimitSchedule {
    fn sizes(&self) -> Vec<usize> {
        (self.min_log2..=self.max_log2)
            .map(|p| 1usize << p)
            .collect()
    }
}

/// Evaluator for `W_φ` / `W̃_φ` with a shared, thread-safe cache of log values.
#[derive(Debug)]
pub struct BernsteinGammaEvaluator {
    phi: PhiFunction,
    mode: GammaMode,
    schedule: LimitSchedule,
    /// Outcome of the tail log-convexity probe; `None` if derivatives were unavailable.
    log_convex_tail: Option<bool>,
    cache: RwLock<HashMap<u64, f64>>,
    /// `φ(1), ..., φ(n_max)`, shared by every real argument.
    integer_values: OnceLock<Vec<f64>>,
}

/// Neumaier-compensated running sum.
/// Positive nodes and weights of 8-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Repeated Richardson extrapolation for a sequence sampled at `n, 2n, 4n, ...`
/// whose error expands in integer powers of `1/n`. Returns the extrapolant of
/// the requested depth at the finest level and the gap to the previous level.
fn richardson(values: &[f64], depth: usize) -> (f64, f64) {
    let depth = depth.min(values.len().saturating_sub(2));
    let mut col: Vec<f64> = values.to_vec();
    for j in 1..=depth {
        let factor = (1u64 << j) as f64 - 1.0;
        col = col
            .windows(2)
            .map(|w| w[1] + (w[1] - w[0]) / factor)
            .collect();
    }
    let last = col[col.len() - 1];
    let prev = col[col.len() - 2];
    (last, (last - prev).abs())
}

impl BernsteinGammaEvaluator {
    /// Real-argument evaluator with the default schedule.
    pub fn new(phi: PhiFunction) -> Result<Self> {
        Self::with_schedule(phi, GammaMode::RealLimit, LimitSchedule::default())
    }

    pub fn integer(phi: PhiFunction) -> Self {
        BernsteinGammaEvaluator {
            phi,
            mode: GammaMode::IntegerProduct,
            schedule: LimitSchedule::default(),
            log_convex_tail: None,
            cache: RwLock::new(HashMap::new()),
            integer_values: OnceLock::new(),
        }
    }

    pub fn with_schedule(
        phi: PhiFunction,
        mode: GammaMode,
        schedule: LimitSchedule,
    ) -> Result<Self> {
        let mut log_convex_tail = None;
        if mode == GammaMode::RealLimit {
            if phi.domain_sup().is_finite() {
                return Err(Error::Precondition(format!(
                    "{phi} is only defined on (0, {}); the limit needs (0, inf)",
                    phi.domain_sup()
                )));
            }
            // phi must be finite along the whole schedule, with ratio -> 1 at the tail
            let mut ratio = f64::NAN;
            let mut n = 0.0;
            for size in schedule.sizes() {
                n = size as f64;
                ratio = phi
                    .eval(n)
                    .and_then(|a| Ok(a / phi.eval(n + 1.0)?))
                    .map_err(|e| Error::Precondition(format!("{phi} at n = {n}: {e}")))?;
            }
            if !((ratio - 1.0).abs() <= schedule.ratio_tol) {
                return Err(Error::Precondition(format!(
                    "{phi}: phi(n)/phi(n+1) = {ratio} at n = {n}, not close to 1"
                )));
            }
            log_convex_tail = probe_log_convexity(&phi, n);
        }
        Ok(BernsteinGammaEvaluator {
            phi,
            mode,
            schedule,
            log_convex_tail,
            cache: RwLock::new(HashMap::new()),
            integer_values: OnceLock::new(),
        })
    }

    pub fn phi(&self) -> &PhiFunction {
        &self.phi
    }

    pub fn mode(&self) -> GammaMode {
        self.mode
    }

    /// Whether `ln φ` looked convex on the schedule tail. Diagnostic only:
    /// the limit also converges for log-concave `φ` such as the identity.
    pub fn log_convex_tail(&self) -> Option<bool> {
        self.log_convex_tail
    }

    /// `ln W_φ(n) = Σ_{k=1}^{n-1} ln φ(k)`.
    pub fn ln_w_integer(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("W_phi is defined for n >= 1".into()));
        }
        let mut acc = CompensatedSum::default();
        for k in 1..n {
            acc.add(self.phi.ln_eval(k as f64)?);
        }
        Ok(acc.value())
    }

    pub fn w_integer(&self, n: u64) -> Result<f64> {
        Ok(self.ln_w_integer(n)?.exp())
    }

    /// `ln W̃_φ(x)` with the extrapolation error estimate.
    pub fn ln_w_real_with_error(&self, x: f64) -> Result<(f64, f64)> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("W_phi needs x > 0, got {x}")));
        }
        if self.mode == GammaMode::IntegerProduct {
            if x.fract() != 0.0 {
                return Err(Error::Domain(format!(
                    "integer-product mode cannot evaluate at non-integer {x}"
                )));
            }
            return Ok((self.ln_w_integer(x as u64)?, 0.0));
        }
        let sizes = self.schedule.sizes();
        let n_max = *sizes.last().expect("non-empty schedule");

        // Σ_{k=1}^{n} ln(φ(k)/φ(x+k)) accumulated once, sampled at each n.
        let mut partial = CompensatedSum::default();
        let mut sums = Vec::with_capacity(sizes.len());
        let mut next = 0;
        let at_integers = self.integer_values(n_max)?;
        for k in 1..=n_max {
            let r = at_integers[k - 1] / self.phi.eval(x + k as f64)?;
            partial.add(r.ln());
            if k == sizes[next] {
                sums.push(partial.value());
                next += 1;
            }
        }
        let head = self.phi.ln_eval(x)?;
        let mut estimates = Vec::with_capacity(sizes.len());
        for (&n, &sum) in sizes.iter().zip(&sums) {
            estimates.push(sum - head + self.tail_correction(n as f64, x)?);
        }
        let (est, err) = self.settle(&estimates);
        if !(err <= self.schedule.tol) || !est.is_finite() {
            return Err(Error::Convergence(format!(
                "W̃ limit for {} at x = {x}: successive estimates differ by {err:e}",
                self.phi
            )));
        }
        Ok((est, err))
    }

    fn integer_values(&self, n_max: usize) -> Result<&[f64]> {
        if let Some(v) = self.integer_values.get() {
            return Ok(v);
        }
        let v = (1..=n_max)
            .map(|k| self.phi.eval(k as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.integer_values.get_or_init(|| v))
    }

    /// Euler-Maclaurin remainder of the truncated log-product at `n`.
    /// With `g = ln φ` it is `∫_n^{n+x} g(t) dt - (g(n) - g(n+x))/2
    /// - (g'(n) - g'(n+x))/12 + (g'''(n) - g'''(n+x))/720`; the integral is
    /// taken relative to `g(n)` to avoid cancellation.
    fn tail_correction(&self, n: f64, x: f64) -> Result<f64> {
        let gn = self.phi.ln_derivatives(n, 3)?;
        let gx = self.phi.ln_derivatives(n + x, 3)?;
        let phi_n = self.phi.eval(n)?;
        let panels = x.ceil().max(1.0) as usize;
        let width = x / panels as f64;
        let mut integral = CompensatedSum::default();
        for p in 0..panels {
            let mid = n + (p as f64 + 0.5) * width;
            for (&node, &weight) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                for sign in [-1.0, 1.0] {
                    let t = mid + sign * node * 0.5 * width;
                    let r = self.phi.eval(t)? / phi_n;
                    integral.add(0.5 * width * weight * r.ln());
                }
            }
        }
        Ok(
            integral.value() + x * gn[0] - 0.5 * (gn[0] - gx[0]) - (gn[1] - gx[1]) / 12.0
                + (gn[3] - gx[3]) / 720.0,
        )
    }

    /// Final estimate and its error from the corrected sequence.
    fn settle(&self, estimates: &[f64]) -> (f64, f64) {
        richardson(estimates, self.schedule.depth)
    }

    /// `ln W̃_φ(x)`, cached.
    pub fn ln_w_real(&self, x: f64) -> Result<f64> {
        let key = x.to_bits();
        if let Some(&v) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(v);
        }
        let (v, _) = self.ln_w_real_with_error(x)?;
        self.cache.write().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    pub fn w_real(&self, x: f64) -> Result<f64> {
        Ok(self.ln_w_real(x)?.exp())
    }

    /// `ψ_φ(y) = d/dy ln W̃_φ(y)` by a central difference with step `1e-4·max(1, y)`.
    pub fn psi(&self, y: f64) -> Result<f64> {
        let h = 1e-4 * y.max(1.0);
        if y - h <= 0.0 {
            return Err(Error::Domain(format!("psi needs y > {h}, got {y}")));
        }
        Ok((self.ln_w_real(y + h)? - self.ln_w_real(y - h)?) / (2.0 * h))
    }

    /// `ψ'_φ(y) = -lim_n Σ_{k=0}^{n} (ln φ)''(y + k)`, extrapolated on the
    /// same schedule. Uses analytic second derivatives of `φ`.
    pub fn psi_prime(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!("psi' needs y > 0, got {y}")));
        }
        if self.mode == GammaMode::IntegerProduct {
            return Err(Error::Domain(
                "psi' needs the real-argument evaluator".into(),
            ));
        }
        let sizes = self.schedule.sizes();
        let n_max = *sizes.last().expect("non-empty schedule");
        let mut partial = CompensatedSum::default();
        partial.add(-self.phi.ln_derivatives(y, 2)?[2]);
        let mut estimates = Vec::with_capacity(sizes.len());
        let mut next = 0;
        for k in 1..=n_max {
            let t = y + k as f64;
            if k == sizes[next] {
                // Σ_{j>k} g''(y+j) ≈ -g'(t) - g''(t)/2 - g'''(t)/12 + g^(5)(t)/720
                let g = self.phi.ln_derivatives(t, 5)?;
                partial.add(-g[2]);
                let tail = -g[1] - 0.5 * g[2] - g[3] / 12.0 + g[5] / 720.0;
                estimates.push(partial.value() - tail);
                next += 1;
            } else {
                partial.add(-self.phi.ln_derivatives(t, 2)?[2]);
            }
        }
        let (est, err) = self.settle(&estimates);
        if !(err <= self.schedule.tol * est.abs().max(1.0)) {
            return Err(Error::Convergence(format!(
                "psi' limit for {} at y = {y}: estimates differ by {err:e}",
                self.phi
            )));
        }
        Ok(est)
    }
}

/// Sign of `(ln φ)''` at a few tail points, or `None` if derivatives fail.
fn probe_log_convexity(phi: &PhiFunction, n: f64) -> Option<bool> {
    let mut convex = true;
    for t in [n / 4.0, n / 2.0, n] {
        match phi.derivatives(t, 2) {
            Ok(d) => convex &= d[2] * d[0] - d[1] * d[1] >= -1e-12 * (d[1] * d[1]),
            Err(e) => {
                log::warn!("log-convexity probe skipped for {phi}: {e}");
                return None;
            }
        }
    }
    Some(convex)
}

/// `W_φ(n) = ∏_{k=1}^{n-1} φ(k)`.
pub fn w_integer(phi: &PhiFunction, n: u64) -> Result<f64> {
    BernsteinGammaEvaluator::integer(phi.clone()).w_integer(n)
}

/// `W̃_φ(x)` from the limit formula.
pub fn w_real(phi: &PhiFunction, x: f64) -> Result<f64> {
    BernsteinGammaEvaluator::new(phi.clone())?.w_real(x)
}

/// `ψ_φ(y)`.
pub fn psi(phi: &PhiFunction, y: f64) -> Result<f64> {
    BernsteinGammaEvaluator::new(phi.clone())?.psi(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(id: &str) -> PhiFunction {
        id.parse().unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn integer_examples() {
        assert_eq!(w_integer(&phi("id"), 1).unwrap(), 1.0);
        assert!(rel(w_integer(&phi("id"), 5).unwrap(), 24.0) < 1e-14);
        assert!(rel(w_integer(&phi("ratio:1.0"), 4).unwrap(), 0.25) < 1e-14);
        assert!(rel(w_integer(&phi("quadraticshift"), 4).unwrap(), 360.0) < 1e-14);
        assert!(matches!(w_integer(&phi("id"), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn real_examples() {
        let id = BernsteinGammaEvaluator::new(phi("id")).unwrap();
        assert!(rel(id.w_real(4.0).unwrap(), 6.0) < 1e-10);
        let half = std::f64::consts::PI.sqrt() / 2.0;
        assert!(rel(id.w_real(1.5).unwrap(), half) < 1e-10);
        assert!(rel(w_real(&phi("power:2.0"), 3.0).unwrap(), 4.0) < 1e-9);
    }

    #[test]
    fn psi_examples() {
        let euler = 0.577_215_664_901_532_9;
        let id = BernsteinGammaEvaluator::new(phi("id")).unwrap();
        assert!((id.psi(1.0).unwrap() + euler).abs() < 1e-6);
        assert!((id.psi(2.0).unwrap() - (1.0 - euler)).abs() < 1e-6);
        let p2 = psi(&phi("power:2.0"), 2.0).unwrap();
        assert!((p2 - 2.0 * (1.0 - euler)).abs() < 1e-6);
    }

    #[test]
    fn psi_prime_is_trigamma_for_identity() {
        let id = BernsteinGammaEvaluator::new(phi("id")).unwrap();
        for &y in &[0.5, 1.0, 3.0, 9.0] {
            let v = id.psi_prime(y).unwrap();
            assert!(rel(v, crate::special::trigamma(y)) < 1e-9, "y={y}");
        }
    }

    #[test]
    fn preconditions() {
        // exponential growth violates phi(n)/phi(n+1) -> 1
        assert!(matches!(
            BernsteinGammaEvaluator::new(phi("inv:logshift:1.0")),
            Err(Error::Precondition(_))
        ));
        // bounded domain
        assert!(matches!(
            BernsteinGammaEvaluator::new(phi("inv:ratio:3.0")),
            Err(Error::Precondition(_))
        ));
        let int = BernsteinGammaEvaluator::integer(phi("id"));
        assert!(int.ln_w_real_with_error(1.5).is_err());
        assert_eq!(int.ln_w_real_with_error(3.0).unwrap().0, 2f64.ln());
    }

    #[test]
    fn richardson_removes_polynomial_error() {
        let vals: Vec<f64> = (0..6)
            .map(|i| {
                let n = (8u64 << i) as f64;
                1.0 + 3.0 / n - 2.0 / (n * n)
            })
            .collect();
        let (est, err) = richardson(&vals, 2);
        assert!((est - 1.0).abs() < 1e-14);
        assert!(err < 1e-14);
    }
}
