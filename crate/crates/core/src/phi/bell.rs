//! Weighted exponential Bell polynomials.
//!
//! `C_{h,k}(x_1, ..., x_{h-k+1})` sums, over all `(j_1, ..., j_m)` with
//! `m = h - k + 1`, `sum j_i = k` and `sum i * j_i = h`, the terms
//!
//! ```text
//! binom(h, j_1)^-1 * h! / (j_1! ... j_m!) * prod (x_i / i!)^(j_i)
//! ```

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Largest factorial argument kept in the memo table.
pub const MAX_FACTORIAL: usize = 20;

fn factorials() -> &'static [f64; MAX_FACTORIAL + 1] {
    static TABLE: OnceLock<[f64; MAX_FACTORIAL + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; MAX_FACTORIAL + 1];
        for i in 1..=MAX_FACTORIAL {
            t[i] = t[i - 1] * i as f64;
        }
        t
    })
}

/// `n!` for `n <= MAX_FACTORIAL`, exact in double precision.
pub fn factorial(n: usize) -> f64 {
    factorials()[n]
}

#[derive(Debug, Clone)]
struct Term {
    exponents: Vec<u32>,
    coefficient: f64,
}

type TermCache = HashMap<(usize, usize), Arc<Vec<Term>>>;

/// Memoized partition sums for `C_{h,k}`. Safe to share between threads.
#[derive(Debug, Default)]
pub struct BellPolynomialTable {
    terms: RwLock<TermCache>,
}

impl BellPolynomialTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide table.
    pub fn global() -> &'static BellPolynomialTable {
        static GLOBAL: OnceLock<BellPolynomialTable> = OnceLock::new();
        GLOBAL.get_or_init(BellPolynomialTable::new)
    }

    /// Exponent vectors `(j_1, ..., j_{h-k+1})` admissible for `(h, k)`.
    pub fn partitions(&self, h: usize, k: usize) -> Vec<Vec<u32>> {
        self.terms_for(h, k)
            .iter()
            .map(|t| t.exponents.clone())
            .collect()
    }

    /// Evaluates `C_{h,k}` at `args`, which must hold at least `h - k + 1` values.
    pub fn eval(&self, h: usize, k: usize, args: &[f64]) -> f64 {
        assert!(h <= MAX_FACTORIAL, "order {h} exceeds factorial table");
        if k > h {
            return 0.0;
        }
        let m = h - k + 1;
        assert!(args.len() >= m, "need {m} arguments, got {}", args.len());
        self.terms_for(h, k)
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(args)
                    .filter(|(&j, _)| j > 0)
                    .fold(t.coefficient, |acc, (&j, &x)| acc * x.powi(j as i32))
            })
            .sum()
    }

    fn terms_for(&self, h: usize, k: usize) -> Arc<Vec<Term>> {
        if let Some(t) = self.terms.read().expect("bell table poisoned").get(&(h, k)) {
            return Arc::clone(t);
        }
        let built = Arc::new(build_terms(h, k));
        self.terms
            .write()
            .expect("bell table poisoned")
            .entry((h, k))
            .or_insert(built)
            .clone()
    }
}

fn build_terms(h: usize, k: usize) -> Vec<Term> {
    if k > h {
        return Vec::new();
    }
    let m = h - k + 1;
    let fact = factorials();
    enumerate(h, k, m)
        .into_iter()
        .map(|exponents| {
            let j1 = exponents[0] as usize;
            // binom(h, j1)^-1 * h! / j1! == (h - j1)!
            let mut coefficient = fact[h - j1];
            for (i, &j) in exponents.iter().enumerate().skip(1) {
                let j = j as usize;
                coefficient /= fact[j] * fact[i + 1].powi(j as i32);
            }
            Term {
                exponents,
                coefficient,
            }
        })
        .collect()
}

/// All `j` in N^m with `sum j_i = k` and `sum i * j_i = h` (1-based `i`),
/// generated without recursion by walking positions from `m` down to `1`.
fn enumerate(h: usize, k: usize, m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    // Frame: (position index, remaining count, remaining weight).
    let mut current = vec![0u32; m];
    let mut stack: Vec<(usize, usize, usize, usize)> = Vec::new();
    // (pos, count_left, weight_left, next_j_to_try)
    stack.push((m, k, h, 0));
    while let Some((pos, count_left, weight_left, j)) = stack.pop() {
        if pos == 1 {
            // j_1 is forced.
            if count_left == weight_left {
                current[0] = count_left as u32;
                out.push(current.clone());
            }
            continue;
        }
        let max_j = count_left.min(weight_left / pos);
        if j > max_j {
            current[pos - 1] = 0;
            continue;
        }
        current[pos - 1] = j as u32;
        stack.push((pos, count_left, weight_left, j + 1));
        stack.push((pos - 1, count_left - j, weight_left - j * pos, 0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_zero_is_one() {
        let t = BellPolynomialTable::new();
        assert_eq!(t.eval(0, 0, &[7.0]), 1.0);
    }

    #[test]
    fn partitions_respect_both_constraints() {
        let t = BellPolynomialTable::new();
        for h in 0..=12 {
            for k in 0..=h {
                for p in t.partitions(h, k) {
                    assert_eq!(p.len(), h - k + 1);
                    let count: u32 = p.iter().sum();
                    let weight: u32 = p.iter().enumerate().map(|(i, &j)| (i as u32 + 1) * j).sum();
                    assert_eq!(count as usize, k);
                    assert_eq!(weight as usize, h);
                }
            }
        }
    }

    #[test]
    fn partition_counts_match_brute_force() {
        let t = BellPolynomialTable::new();
        for h in 1..=9usize {
            for k in 1..=h {
                let m = h - k + 1;
                // brute force over bounded boxes
                let mut count = 0;
                let mut idx = vec![0usize; m];
                loop {
                    let c: usize = idx.iter().sum();
                    let w: usize = idx.iter().enumerate().map(|(i, &j)| (i + 1) * j).sum();
                    if c == k && w == h {
                        count += 1;
                    }
                    let mut p = 0;
                    loop {
                        if p == m {
                            break;
                        }
                        idx[p] += 1;
                        if idx[p] <= k {
                            break;
                        }
                        idx[p] = 0;
                        p += 1;
                    }
                    if p == m {
                        break;
                    }
                }
                assert_eq!(t.partitions(h, k).len(), count, "h={h} k={k}");
            }
        }
    }

    #[test]
    fn low_order_closed_forms() {
        let t = BellPolynomialTable::new();
        // C_{2,1}(x1, x2) = x2
        assert_eq!(t.eval(2, 1, &[3.0, 5.0]), 5.0);
        // C_{4,2}(x1, x2, x3) = 3 x2^2 + x1 x3
        let v = t.eval(4, 2, &[2.0, 5.0, 7.0]);
        assert!((v - (3.0 * 25.0 + 14.0)).abs() < 1e-12);
    }
}
