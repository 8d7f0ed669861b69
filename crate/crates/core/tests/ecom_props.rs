mod common;

use common::{phi, rel_err};
use ecomp::ecom::{DistSpec, EComPoisson};
use ecomp::phi::catalog;
use ecomp::Error;
use proptest::prelude::*;

/// Catalog entries at ρ ∈ {0.3, 0.8, 2} where the series converges.
fn cases() -> Vec<EComPoisson> {
    let mut out = Vec::new();
    for e in catalog::entries() {
        for rho in [0.3, 0.8, 2.0] {
            match EComPoisson::new(e.phi.clone(), rho) {
                Ok(d) => out.push(d),
                Err(Error::Divergence(_)) => {}
                Err(err) => panic!("{} rho={rho}: {err}", e.phi),
            }
        }
    }
    out
}

fn brute_pmf(d: &EComPoisson) -> Vec<f64> {
    common::normalize(&common::ecom_ln_terms(d.phi(), d.rho(), d.max_state()))
}

#[test]
fn normalization() {
    for d in cases() {
        let total: f64 = d.pmf_table().iter().sum();
        assert!(
            (total - 1.0).abs() <= 1e-10 + d.tail_bound(),
            "{} rho={}",
            d.phi(),
            d.rho()
        );
    }
}

#[test]
fn successive_ratio_identity() {
    for d in cases() {
        let last = d.n_trunc().min(40);
        for n in 0..last {
            let ratio = d.pmf(n + 1).unwrap() / d.pmf(n).unwrap();
            let expect = d.rho() / d.phi().eval((n + 1) as f64).unwrap();
            assert!(rel_err(ratio, expect) <= 1e-12, "{} n={n}", d.phi());
        }
    }
}

#[test]
fn pmf_matches_direct_summation() {
    for d in cases() {
        let p = brute_pmf(&d);
        for (n, &q) in p.iter().enumerate().take(30) {
            if q > 1e-280 {
                assert!(
                    rel_err(d.pmf(n).unwrap(), q) <= 1e-10,
                    "{} rho={} n={n}",
                    d.phi(),
                    d.rho()
                );
            }
        }
    }
}

#[test]
fn pgf_slope_at_one_is_mean() {
    for d in cases() {
        let h = 1e-4;
        let p = |u: f64| d.pgf(u).unwrap();
        // second-order one-sided difference
        let slope = (3.0 * p(1.0) - 4.0 * p(1.0 - h) + p(1.0 - 2.0 * h)) / (2.0 * h);
        let m1 = d.factorial_moment(1).unwrap();
        assert!(
            rel_err(slope, m1) <= 1e-5,
            "{} rho={} slope={slope} m1={m1}",
            d.phi(),
            d.rho()
        );
    }
}

#[test]
fn moments_match_brute_force() {
    for d in cases() {
        let p = brute_pmf(&d);
        for s in 1..=6 {
            let e = rel_err(d.moment(s).unwrap(), common::raw_moment(&p, s as u32));
            assert!(e <= 1e-8, "{} rho={} s={s} err={e}", d.phi(), d.rho());
            let e = rel_err(
                d.factorial_moment(s).unwrap(),
                common::falling_moment(&p, s),
            );
            assert!(
                e <= 1e-8,
                "{} rho={} factorial s={s} err={e}",
                d.phi(),
                d.rho()
            );
        }
    }
}

#[test]
fn phi_factorial_identity() {
    for e in catalog::entries() {
        let d = EComPoisson::new(e.phi.clone(), e.rho).unwrap();
        for s in 1..=3 {
            let v = d.phi_factorial_moment(s).unwrap();
            let err = rel_err(v, e.rho.powi(s as i32));
            assert!(err <= 1e-8, "{} s={s} got {v}", e.phi);
        }
    }
}

#[test]
fn geometric_closed_forms() {
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let d = EComPoisson::new(phi("ratio:1.0"), rho).unwrap();
        assert!(rel_err(d.mean().unwrap(), 2.0 * rho / (1.0 - rho)) <= 1e-10);
        assert!(rel_err(d.variance().unwrap(), 2.0 * rho / (1.0 - rho).powi(2)) <= 1e-10);
        for n in 0..20 {
            let expect = (n as f64 + 1.0) * rho.powi(n) * (1.0 - rho).powi(2);
            assert!(rel_err(d.pmf(n as usize).unwrap(), expect) <= 1e-12);
        }
    }
}

#[test]
fn poisson_reduction() {
    for rho in [0.5, 1.0, 5.0] {
        let d = EComPoisson::new(phi("id"), rho).unwrap();
        for n in 0..=40 {
            assert!(
                rel_err(d.pmf(n).unwrap(), common::poisson_pmf(rho, n)) <= 1e-12,
                "rho={rho} n={n}"
            );
        }
        assert!(rel_err(d.mean().unwrap(), rho) <= 1e-12);
        assert!(rel_err(d.variance().unwrap(), rho) <= 1e-12);
        assert!(rel_err(d.moment(2).unwrap(), rho * rho + rho) <= 1e-12);
    }
}

#[test]
fn com_poisson_normalizer_is_le_roy() {
    for (delta, rho) in [(2.0, 2.0), (0.5, 0.8), (3.0, 5.0)] {
        let d = EComPoisson::new(ecomp::PhiFunction::power(delta).unwrap(), rho).unwrap();
        assert!(rel_err(d.z(), common::le_roy(delta, rho)) <= 1e-12);
    }
}

/// `ρ² S'' + 4ρ S' + 2S = 2 C₀(ρ)`, with `S` the quadratic-shift normalizer.
#[test]
fn euler_ode() {
    for rho in [0.2, 0.7, 1.5, 4.0] {
        let d = EComPoisson::new(phi("quadraticshift"), rho).unwrap();
        let lhs = rho * rho * d.d_z(2).unwrap() + 4.0 * rho * d.d_z(1).unwrap() + 2.0 * d.z();
        let c0 = common::le_roy(2.0, rho);
        let r = (lhs - 2.0 * c0).abs() / (2.0 * c0);
        assert!(r <= 1e-8, "rho={rho} residual={r}");
    }
}

pub fn mathieu_integral(rho: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let f = move |x: f64| (0.5 * x).exp() / (x.exp() - rho) * (0.5 * s3 * x).sin();
    2.0 / s3 * common::integrate(&f, 0.0, 100.0, 1e-13)
}

#[test]
fn mathieu_identity() {
    for rho in [0.3, 0.7] {
        let d = EComPoisson::new(phi("ratioquadratic"), rho).unwrap();
        let q = mathieu_integral(rho);
        assert!(rel_err(d.z(), q) <= 1e-6, "rho={rho} z={} q={q}", d.z());
    }
}

#[test]
fn rational_shift_is_hypergeometric() {
    for (a, b) in [(2.0, 1.0), (1.0, 2.0), (3.0, 0.5), (0.5, 1.5)] {
        for rho in [0.3, 0.5, 0.9] {
            let d =
                EComPoisson::new(ecomp::PhiFunction::rational_shift(a, b).unwrap(), rho).unwrap();
            let f = common::hyp2f1(1.0, b + 1.0, a + 1.0, rho);
            assert!(
                rel_err(d.z(), f) <= 1e-9,
                "a={a} b={b} rho={rho} z={} f={f}",
                d.z()
            );
        }
    }
}

#[test]
fn markov_bound_grid() {
    for d in cases() {
        for a in 1..=10 {
            let a = a as f64;
            if a >= d.phi().domain_sup() {
                continue;
            }
            let m = d.markov_bound(a).unwrap();
            if d.phi().is_nondecreasing() {
                assert!(m.holds, "{} rho={} a={a}: {m:?}", d.phi(), d.rho());
            }
        }
    }
}

#[test]
fn finite_cap_is_truncated_law() {
    let d = EComPoisson::with_options(phi("power:2.0"), 2.0, 5.0, Default::default()).unwrap();
    assert_eq!(d.max_state(), Some(4));
    let p = common::normalize(&common::ecom_ln_terms(&phi("power:2.0"), 2.0, Some(4)));
    for (n, &q) in p.iter().enumerate() {
        assert!(rel_err(d.pmf(n).unwrap(), q) <= 1e-13);
    }
    assert!(d.pmf(5).is_err());
    assert_eq!(d.cdf(100).unwrap(), 1.0);
    assert_eq!(d.quantile(1.0).unwrap(), 4);
}

#[test]
fn spec_json_round_trip() {
    let spec = DistSpec::new(phi("rationalshift:2.0,1.0"), 0.5);
    let back = DistSpec::from_json(&spec.to_json()).unwrap();
    assert_eq!(back.to_json(), spec.to_json());
    let d = EComPoisson::from_spec(&back).unwrap();
    assert!((d.z() - 1.5451774444795624).abs() < 1e-12);
    assert!(DistSpec::from_json(r#"{"phi": "id"}"#).is_err());
    assert!(DistSpec::from_json(r#"{"phi": "id", "rho": 1, "extra": 2}"#).is_err());
}

#[test]
fn samples_follow_pmf() {
    use rand::SeedableRng;
    let d = EComPoisson::new(phi("ratio:1.0"), 0.5).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let xs = d.sample(&mut rng, 200_000).unwrap();
    let mut counts = vec![0usize; 64];
    for x in xs {
        counts[x.min(63)] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .enumerate()
            .map(|(n, &c)| (c as f64 / 200_000.0 - d.pmf(n).unwrap()).abs())
            .sum::<f64>();
    assert!(tv < 0.01, "tv={tv}");
}

#[test]
fn concurrent_table_extension() {
    let d = EComPoisson::new(phi("lambert"), 1.0).unwrap();
    let expect: Vec<f64> = {
        let fresh = EComPoisson::new(phi("lambert"), 1.0).unwrap();
        (0..60).map(|n| fresh.cdf(n).unwrap()).collect()
    };
    std::thread::scope(|s| {
        for k in 0..4 {
            let (d, expect) = (&d, &expect);
            s.spawn(move || {
                for n in (0..60).rev().skip(k) {
                    assert_eq!(d.cdf(n).unwrap(), expect[n]);
                }
            });
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantile_inverts_cdf(idx in 0usize..22, q in 0.0f64..0.999) {
        let e = &catalog::entries()[idx];
        let d = EComPoisson::new(e.phi.clone(), e.rho).unwrap();
        let n = d.quantile(q).unwrap();
        prop_assert!(d.cdf(n).unwrap() >= q);
        if n > 0 {
            prop_assert!(d.cdf(n - 1).unwrap() < q);
        }
    }

    #[test]
    fn com_poisson_moments(delta in 0.3f64..3.0, rho in 0.1f64..6.0) {
        let f = ecomp::PhiFunction::power(delta).unwrap();
        let d = EComPoisson::new(f.clone(), rho).unwrap();
        let p = common::ecom_pmf(&f, rho);
        for s in 1..=4u32 {
            let e = rel_err(d.moment(s as usize).unwrap(), common::raw_moment(&p, s));
            prop_assert!(e <= 1e-8, "s={} err={}", s, e);
        }
    }

    #[test]
    fn variance_from_moments(idx in 0usize..22) {
        let e = &catalog::entries()[idx];
        let d = EComPoisson::new(e.phi.clone(), e.rho).unwrap();
        let m1 = d.moment(1).unwrap();
        let v = d.moment(2).unwrap() - m1 * m1;
        prop_assert!((v - d.variance().unwrap()).abs() <= 1e-9 * d.moment(2).unwrap());
    }
}
