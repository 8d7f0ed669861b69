//! Independent reference implementations shared by the integration tests.
//!
//! None of these call into the library's numerics; only `PhiFunction::eval`
//! is used to obtain raw φ values.
#![allow(dead_code)]

use ecomp::PhiFunction;

pub fn phi(id: &str) -> PhiFunction {
    id.parse().unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` by the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Digamma by upward recurrence and the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + x.ln()
        - 0.5 / x
        - x2 * (1.0 / 12.0
            - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 * (1.0 / 240.0 - x2 / 132.0))))
}

/// Trigamma by upward recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + 0.5 * x2
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

/// Sum of positive terms given by their logs, stopping once the terms are
/// negligible and decreasing.
pub fn log_series(ln_term: impl Fn(usize) -> f64, max: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    for n in 0..max {
        let t = ln_term(n);
        peak = peak.max(t);
        out.push(t);
        if n > 20 && t < peak - 80.0 && t < out[n - 1] {
            break;
        }
    }
    out
}

/// `Σ exp(ln_terms)` with a common shift.
pub fn sum_exp(ln_terms: &[f64]) -> f64 {
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m.exp() * ln_terms.iter().map(|t| (t - m).exp()).sum::<f64>()
}

/// Normalized probabilities from log weights.
pub fn normalize(ln_terms: &[f64]) -> Vec<f64> {
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_terms.iter().map(|t| (t - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `ln(ρ^n / ∏_{k≤n} φ(k))` for `n = 0..`, summed directly from φ values.
pub fn ecom_ln_terms(phi: &PhiFunction, rho: f64, cap: Option<usize>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    let limit = cap.map_or(5000, |c| c + 1);
    let mut peak = 0.0f64;
    for n in 1..limit {
        acc += rho.ln() - phi.eval(n as f64).unwrap().ln();
        out.push(acc);
        peak = peak.max(acc);
        if cap.is_none() && n > 20 && acc < peak - 80.0 && acc < out[n - 1] {
            break;
        }
    }
    out
}

/// Brute-force eCOM pmf.
pub fn ecom_pmf(phi: &PhiFunction, rho: f64) -> Vec<f64> {
    normalize(&ecom_ln_terms(phi, rho, None))
}

pub fn raw_moment(pmf: &[f64], s: u32) -> f64 {
    pmf.iter()
        .enumerate()
        .map(|(n, p)| (n as f64).powi(s as i32) * p)
        .sum()
}

pub fn falling_moment(pmf: &[f64], s: usize) -> f64 {
    pmf.iter()
        .enumerate()
        .map(|(n, p)| (0..s).map(|j| n as f64 - j as f64).product::<f64>() * p)
        .sum()
}

pub fn poisson_pmf(rho: f64, n: usize) -> f64 {
    (n as f64 * rho.ln() - rho - ln_gamma(n as f64 + 1.0)).exp()
}

/// `Σ ρ^n / n!^δ`.
pub fn le_roy(delta: f64, rho: f64) -> f64 {
    sum_exp(&log_series(
        |n| n as f64 * rho.ln() - delta * ln_gamma(n as f64 + 1.0),
        10_000,
    ))
}

/// `E_{α,β}(ρ) = Σ ρ^k / Γ(αk + β)`.
pub fn mittag_leffler(alpha: f64, beta: f64, rho: f64) -> f64 {
    sum_exp(&log_series(
        |k| k as f64 * rho.ln() - ln_gamma(alpha * k as f64 + beta),
        10_000,
    ))
}

/// `₂F₁(a, b; c; z)` by its power series, `|z| < 1`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..100_000 {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    fn gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let (mut k, mut g) = (0.0, 0.0);
        for i in 0..8 {
            let v = if i == 7 {
                f(c)
            } else {
                f(c - h * XK[i]) + f(c + h * XK[i])
            };
            k += WK[i] * v;
            if i % 2 == 1 {
                g += WG[i / 2] * v;
            }
        }
        (k * h, (k - g).abs() * h)
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 30)
}
