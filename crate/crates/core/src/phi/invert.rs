//! Numerical compositional inverses and their high-order derivatives.

use super::bell::BellPolynomialTable;
use super::jet::Jet;
use super::{ClassFlags, PhiFunction, PhiKind, MAX_DERIVATIVE_ORDER};
use crate::error::{Error, Result};

/// Root-finding controls for [`invert_with`].
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// Residual tolerance on `|f(x) - s|`, scaled by `max(1, s)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

fn require_invertible(f: &PhiFunction) -> Result<()> {
    if matches!(f.kind(), PhiKind::NumericInverseOf(_)) {
        return Ok(());
    }
    let flags = f.flags();
    if flags.contains(ClassFlags::BF0) || flags.contains(ClassFlags::IBF) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{f} must be non-constant, increasing and vanish at 0+"
        )))
    }
}

/// `h(s) = inf { x > 0 : f(x) > s }` with default options.
pub fn invert(f: &PhiFunction, s: f64) -> Result<f64> {
    invert_with(f, s, InversionOptions::default())
}

/// Bracket by doubling, then safeguarded Newton with bisection fallback.
pub fn invert_with(f: &PhiFunction, s: f64, opts: InversionOptions) -> Result<f64> {
    require_invertible(f)?;
    let image_sup = f.limit_at_sup();
    if !(s > 0.0 && s < image_sup) {
        return Err(Error::Domain(format!(
            "cannot invert {f} at {s}: outside (0, {image_sup})"
        )));
    }
    let domain_sup = f.domain_sup();
    let tol = opts.tol * s.abs().max(1.0);

    // f(0+) = 0 <= s, so lo = 0 is always a valid lower bracket.
    let mut lo = 0.0;
    let mut hi = if domain_sup.is_finite() {
        0.5 * domain_sup
    } else {
        1.0
    };
    let mut iter = 0;
    loop {
        let fh = f.eval(hi)?;
        if fh > s {
            break;
        }
        if (fh - s).abs() <= tol {
            return Ok(hi);
        }
        lo = hi;
        hi = if domain_sup.is_finite() {
            0.5 * (hi + domain_sup)
        } else {
            2.0 * hi
        };
        iter += 1;
        // doubling may run through the whole f64 range; halving toward a
        // finite sup is capped by max_iter
        if !hi.is_finite() || (domain_sup.is_finite() && iter >= opts.max_iter) {
            return Err(Error::Convergence(format!(
                "could not bracket {f}^-1({s}) after {iter} steps"
            )));
        }
    }

    let step = |x: f64| -> Result<(f64, f64)> {
        let d = derivative_pair(f, x)?;
        Ok((d.0 - s, d.1))
    };

    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..opts.max_iter {
        let (r, slope) = step(x)?;
        if r.abs() <= tol {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x);
        }
        // Newton only while its steps shrink geometrically; otherwise bisect
        let newton = x - r / slope;
        let fast = (newton - x).abs() <= 0.5 * dx_old.abs();
        dx_old = dx;
        let next = if fast && slope > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        dx = next - x;
        x = next;
    }
    Err(Error::Convergence(format!(
        "inversion of {f} at {s} did not converge in {} iterations",
        opts.max_iter
    )))
}

/// `(f(x), f'(x))`.
fn derivative_pair(f: &PhiFunction, x: f64) -> Result<(f64, f64)> {
    match f.kind() {
        PhiKind::NumericInverseOf(_) => {
            let d = f.derivatives(x, 1)?;
            Ok((d[0], d[1]))
        }
        _ => {
            let j = f.formula(&Jet::variable(x, 1));
            let c = j.coefficients();
            Ok((c[0], c[1]))
        }
    }
}

/// `h^(n)(s)` for the inverse `h` of `f`:
///
/// ```text
/// h^(n)(s) = f'(h)^(-n) * C_{2n-2, n-1}(1, -f''(h)/f'(h), ..., -f^(n)(h)/f'(h))
/// ```
///
/// which is the explicit partition sum over `s_1 + ... + s_n = n - 1`,
/// `s_1 + 2 s_2 + ... + n s_n = 2n - 2` written in Bell-polynomial form.
pub fn inverse_derivative(f: &PhiFunction, s: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return invert(f, s);
    }
    if n > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n,
            phi: format!("inv:{f}"),
        });
    }
    let x = invert(f, s)?;
    let d = f.derivatives(x, n)?;
    let f1 = d[1];
    if !(f1 > 0.0) {
        return Err(Error::Domain(format!("{f}'({x}) = {f1} is not positive")));
    }
    if n == 1 {
        return Ok(1.0 / f1);
    }
    let mut args = Vec::with_capacity(n);
    args.push(1.0);
    args.extend(d[2..=n].iter().map(|&dk| -dk / f1));
    let c = BellPolynomialTable::global().eval(2 * n - 2, n - 1, &args);
    Ok(c / f1.powi(n as i32))
}
