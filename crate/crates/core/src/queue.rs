//! Birth-death queue with state-dependent service.
//!
//! Customers arrive at rate `λ`; in state `n` the server completes work at
//! rate `μ φ(n)`. The stationary occupancy law is eCOM-Poisson with
//! `ρ = λ / μ`, which [`compare_to_theory`] checks against a time-weighted
//! histogram of one exact (event-driven) trajectory.
//!
//! With a finite cap `Λ` the states are `0..=N`, `N` the largest integer
//! below `Λ`, and arrivals in state `N` are lost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::ecom::{cap_serde, EComPoisson, Truncation};
use crate::error::{Error, Result};
use crate::phi::PhiFunction;

/// Fraction of the horizon discarded when `burn_in` is not given.
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.1;

/// JSON description of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueScenario {
    pub phi: PhiFunction,
    pub lambda: f64,
    pub mu: f64,
    #[serde(with = "cap_serde", default = "cap_serde::infinite")]
    pub lambda_cap: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl QueueScenario {
    pub fn new(phi: PhiFunction, lambda: f64, mu: f64, horizon: f64, seed: u64) -> Self {
        QueueScenario {
            phi,
            lambda,
            mu,
            lambda_cap: f64::INFINITY,
            horizon,
            burn_in: None,
            seed,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("queue scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
            .unwrap_or(DEFAULT_BURN_IN_FRACTION * self.horizon)
    }

    /// Largest reachable state, `None` without a cap.
    pub fn max_state(&self) -> Option<usize> {
        let cap = self.lambda_cap.min(self.phi.domain_sup());
        if cap.is_infinite() {
            None
        } else if cap.fract() == 0.0 {
            Some(cap as usize - 1)
        } else {
            Some(cap.floor() as usize)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let b = self.burn_in();
        if !(b >= 0.0 && b < self.horizon) {
            return Err(Error::Config(format!(
                "burn_in must lie in [0, horizon), got {b}"
            )));
        }
        if !(self.lambda_cap > 0.0) {
            return Err(Error::Config(format!(
                "lambda_cap must be positive, got {}",
                self.lambda_cap
            )));
        }
        let sup = self.phi.limit_at_sup();
        if self.max_state().is_none() && sup.is_finite() && self.rho() > (1.0 - 1e-9) * sup {
            return Err(Error::Divergence(format!(
                "rho = {} must be below sup {} = {sup}; the queue is not positive recurrent",
                self.rho(),
                self.phi
            )));
        }
        Ok(())
    }

    /// The stationary law predicted for this scenario.
    pub fn distribution(&self) -> Result<EComPoisson> {
        EComPoisson::with_options(
            self.phi.clone(),
            self.rho(),
            self.lambda_cap,
            Truncation::default(),
        )
    }
}

/// Time-weighted occupancy of one or more trajectories after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub phi: String,
    #[serde(with = "cap_serde")]
    pub lambda_cap: f64,
    /// Fraction of observed time spent in state `n`, indexed by `n`.
    pub histogram: Vec<f64>,
    /// Observed (post burn-in) time.
    pub observed_time: f64,
    pub jumps: u64,
    pub final_state: usize,
}

impl SimResult {
    pub fn mean(&self) -> f64 {
        self.histogram
            .iter()
            .enumerate()
            .map(|(n, f)| n as f64 * f)
            .sum()
    }

    /// `state,fraction` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,fraction\n");
        for (n, f) in self.histogram.iter().enumerate() {
            out.push_str(&format!("{n},{f:?}\n"));
        }
        out
    }

    /// Pools runs by observed time; the final state is that of the last run.
    pub fn merge(runs: &[SimResult]) -> Result<SimResult> {
        let first = runs
            .first()
            .ok_or_else(|| Error::Config("nothing to merge".into()))?;
        if runs
            .iter()
            .any(|r| r.phi != first.phi || r.lambda_cap != first.lambda_cap)
        {
            return Err(Error::Mismatch("runs simulate different queues".into()));
        }
        let len = runs.iter().map(|r| r.histogram.len()).max().unwrap_or(0);
        let total: f64 = runs.iter().map(|r| r.observed_time).sum();
        let mut hist = vec![0.0; len];
        for r in runs {
            for (h, f) in hist.iter_mut().zip(&r.histogram) {
                *h += f * r.observed_time / total;
            }
        }
        Ok(SimResult {
            phi: first.phi.clone(),
            lambda_cap: first.lambda_cap,
            histogram: hist,
            observed_time: total,
            jumps: runs.iter().map(|r| r.jumps).sum(),
            final_state: runs.last().map_or(0, |r| r.final_state),
        })
    }
}

/// The generator shared by every run: ChaCha8 seeded from the scenario seed,
/// one stream per replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// One trajectory on stream 0.
pub fn simulate(sc: &QueueScenario) -> Result<SimResult> {
    simulate_replicate(sc, 0)
}

pub fn simulate_replicate(sc: &QueueScenario, replicate: u64) -> Result<SimResult> {
    sc.validate()?;
    let mut rng = replicate_rng(sc.seed, replicate);
    let max_state = sc.max_state();
    let burn_in = sc.burn_in();
    let mut service = vec![0.0];
    let mut occupancy: Vec<f64> = vec![0.0];
    let mut t = 0.0;
    let mut n = 0usize;
    let mut jumps = 0u64;

    let record = |n: usize, from: f64, to: f64, occupancy: &mut Vec<f64>| {
        let lo = from.max(burn_in);
        let hi = to.min(sc.horizon);
        if hi > lo {
            if occupancy.len() <= n {
                occupancy.resize(n + 1, 0.0);
            }
            occupancy[n] += hi - lo;
        }
    };

    while t < sc.horizon {
        if service.len() <= n {
            service.push(sc.mu * sc.phi.eval(n as f64)?);
        }
        let up = if max_state.is_some_and(|m| n >= m) {
            0.0
        } else {
            sc.lambda
        };
        let down = service[n];
        let total = up + down;
        if total == 0.0 {
            record(n, t, sc.horizon, &mut occupancy);
            break;
        }
        let e: f64 = rng.sample(Exp1);
        let next = t + e / total;
        record(n, t, next, &mut occupancy);
        if next >= sc.horizon {
            break;
        }
        t = next;
        let u: f64 = rng.random();
        if u * total < up {
            n += 1;
        } else {
            n -= 1;
        }
        jumps += 1;
    }

    let observed: f64 = occupancy.iter().sum();
    Ok(SimResult {
        phi: sc.phi.id(),
        lambda_cap: sc.lambda_cap,
        histogram: occupancy.iter().map(|x| x / observed).collect(),
        observed_time: observed,
        jumps,
        final_state: n,
    })
}

/// `k` independent replicates on streams `0..k`, run on scoped threads.
pub fn simulate_replicates(sc: &QueueScenario, k: usize) -> Result<Vec<SimResult>> {
    sc.validate()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k as u64)
            .map(|r| scope.spawn(move || simulate_replicate(sc, r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub tv_distance: f64,
    pub mean_gap: f64,
    pub empirical_mean: f64,
    pub theoretical_mean: f64,
}

/// Total variation (untabulated tail mass counted in full) and mean gap.
pub fn compare_to_theory(res: &SimResult, d: &EComPoisson) -> Result<Comparison> {
    if res.phi != d.phi().id() {
        return Err(Error::Mismatch(format!(
            "simulated {} but compared with {}",
            res.phi,
            d.phi()
        )));
    }
    let same_cap = res.lambda_cap == d.lambda_cap()
        || res.lambda_cap.min(d.phi().domain_sup()) == d.lambda_cap().min(d.phi().domain_sup());
    if !same_cap {
        return Err(Error::Mismatch(format!(
            "support cap {} differs from the distribution's {}",
            res.lambda_cap,
            d.lambda_cap()
        )));
    }
    let top = res.histogram.len().max(d.n_trunc() + 1);
    let top = d.max_state().map_or(top, |m| top.min(m + 1));
    let mut l1 = 0.0;
    for n in 0..top {
        let h = res.histogram.get(n).copied().unwrap_or(0.0);
        l1 += (h - d.pmf(n)?).abs();
    }
    let theoretical_mean = d.mean()?;
    let empirical_mean = res.mean();
    Ok(Comparison {
        tv_distance: 0.5 * l1 + 0.5 * d.tail_bound(),
        mean_gap: (empirical_mean - theoretical_mean).abs(),
        empirical_mean,
        theoretical_mean,
    })
}

/// `max_n |λ P_{n-1} - μ φ(n) P_n| / (λ P_{n-1})` over `n = 1..=n_max` in the support.
pub fn detailed_balance_residual(sc: &QueueScenario, d: &EComPoisson, n_max: usize) -> Result<f64> {
    let top = d.max_state().map_or(n_max, |m| m.min(n_max));
    let mut worst: f64 = 0.0;
    for n in 1..=top {
        let inflow = sc.lambda * d.pmf(n - 1)?;
        let outflow = sc.mu * sc.phi.eval(n as f64)? * d.pmf(n)?;
        if inflow > 0.0 {
            worst = worst.max((inflow - outflow).abs() / inflow);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(id: &str, lambda: f64, horizon: f64) -> QueueScenario {
        QueueScenario::new(id.parse().unwrap(), lambda, 1.0, horizon, 42)
    }

    #[test]
    fn no_arrivals_stays_empty() {
        let r = simulate(&scenario("id", 0.0, 100.0)).unwrap();
        assert_eq!(r.histogram, vec![1.0]);
        assert_eq!(r.jumps, 0);
    }

    #[test]
    fn reproducible() {
        let sc = scenario("power:2.0", 2.0, 2_000.0);
        assert_eq!(simulate(&sc).unwrap(), simulate(&sc).unwrap());
        let reps = simulate_replicates(&sc, 3).unwrap();
        assert_ne!(reps[0], reps[1]);
        assert_eq!(reps[0], simulate(&sc).unwrap());
    }

    #[test]
    fn histogram_normalized() {
        let r = simulate(&scenario("ratio:1.0", 0.5, 5_000.0)).unwrap();
        assert!((r.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.observed_time - 4_500.0).abs() < 1e-6);
    }

    #[test]
    fn capped_queue_blocks_arrivals() {
        let mut sc = scenario("id", 5.0, 5_000.0);
        sc.lambda_cap = 3.0;
        let r = simulate(&sc).unwrap();
        assert!(r.histogram.len() <= 3);
        let d = sc.distribution().unwrap();
        let c = compare_to_theory(&r, &d).unwrap();
        assert!(c.tv_distance < 0.05, "{c:?}");
        assert!(detailed_balance_residual(&sc, &d, 10).unwrap() < 1e-12);
    }

    #[test]
    fn comparison_perfect_match_and_mismatch() {
        let d = EComPoisson::new("id".parse().unwrap(), 0.5).unwrap();
        let fake = SimResult {
            phi: "id".into(),
            lambda_cap: f64::INFINITY,
            histogram: d.pmf_table(),
            observed_time: 1.0,
            jumps: 0,
            final_state: 0,
        };
        assert!(compare_to_theory(&fake, &d).unwrap().tv_distance < 1e-14);
        let other = EComPoisson::new("power:2.0".parse().unwrap(), 0.5).unwrap();
        assert!(matches!(
            compare_to_theory(&fake, &other),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn invalid_scenarios() {
        assert!(matches!(
            scenario("id", -1.0, 10.0).validate(),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            scenario("ratio:1.0", 1.5, 10.0).validate(),
            Err(Error::Divergence(_))
        ));
        let json = r#"{"phi":"id","lambda":0.5,"mu":1,"lambda_cap":"inf","horizon":100,"seed":3}"#;
        let sc = QueueScenario::from_json(json).unwrap();
        assert_eq!(sc.burn_in(), 10.0);
        assert_eq!(QueueScenario::from_json(&sc.to_json()).unwrap(), sc);
    }
}
