//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] holds the normalized Taylor coefficients `c[k] = g^(k)(x0) / k!`
//! of some function `g` around a point `x0`. Every closed-form catalog entry
//! is written once against the [`Real`] trait, so the same expression yields
//! plain values (`f64`) and exact high-order derivatives (`Jet`).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal field-like interface shared by `f64` and [`Jet`].
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same shape as `self`.
    fn lift(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn exp_m1(&self) -> Self;
    fn ln(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn powf(&self, r: f64) -> Self;

    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    fn add_s(&self, v: f64) -> Self {
        self.clone() + self.lift(v)
    }

    fn mul_s(&self, v: f64) -> Self {
        self.clone() * self.lift(v)
    }
}

impl Real for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn powf(&self, r: f64) -> Self {
        f64::powf(*self, r)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

/// Taylor coefficients up to a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// The identity function expanded at `x0`, carrying `order` derivatives.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order > 0 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet { c }
    }

    /// Jet with the given derivatives `g(x0), g'(x0), ...`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut fact = 1.0;
        let c = d
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if k > 1 {
                    fact *= k as f64;
                }
                v / fact
            })
            .collect();
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// `g^(k)(x0)`, i.e. the coefficient rescaled by `k!`.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.c[k] * fact
    }

    /// All derivatives `g(x0), g'(x0), ..., g^(order)(x0)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.c.len()).map(|k| self.derivative(k)).collect()
    }

    fn zip_with(self, rhs: Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.c.len(), rhs.c.len());
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(&a, &b)| op(a, b)).collect(),
        }
    }

    /// Shared recurrence for `exp` and `exp_m1`; only the constant term differs.
    fn exp_with_head(&self, head: f64) -> Jet {
        let n = self.c.len();
        let a = &self.c;
        let mut e = vec![0.0; n];
        e[0] = head;
        let e0 = a[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                let ekj = if k == j { e0 } else { e[k - j] };
                acc += j as f64 * a[j] * ekj;
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e }
    }

    /// Logarithm of `shift + self` with a precomputed constant term.
    fn ln_with_head(&self, shift: f64, head: f64) -> Jet {
        let n = self.c.len();
        let a = &self.c;
        let b0 = a[0] + shift;
        let mut l = vec![0.0; n];
        l[0] = head;
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - acc / k as f64) / b0;
        }
        Jet { c: l }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            c: self.c.into_iter().map(|a| -a).collect(),
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.c.len();
        let mut out = vec![0.0; n];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in rhs.c.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Jet { c: out }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let n = self.c.len();
        let b = &rhs.c;
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= b[j] * q[k - j];
            }
            q[k] = acc / b[0];
        }
        Jet { c: q }
    }
}

impl Real for Jet {
    fn lift(&self, v: f64) -> Self {
        Jet::constant(v, self.order())
    }

    fn value(&self) -> f64 {
        self.c[0]
    }

    fn exp(&self) -> Self {
        self.exp_with_head(self.c[0].exp())
    }

    fn exp_m1(&self) -> Self {
        self.exp_with_head(self.c[0].exp_m1())
    }

    fn ln(&self) -> Self {
        self.ln_with_head(0.0, self.c[0].ln())
    }

    fn ln_1p(&self) -> Self {
        self.ln_with_head(1.0, self.c[0].ln_1p())
    }

    fn powf(&self, r: f64) -> Self {
        let n = self.c.len();
        let a = &self.c;
        let mut p = vec![0.0; n];
        p[0] = a[0].powf(r);
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (r * j as f64 - (k - j) as f64) * a[j] * p[k - j];
            }
            p[k] = acc / (k as f64 * a[0]);
        }
        Jet { c: p }
    }
}
