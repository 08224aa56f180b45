//! Concentration and confidence bounds used by the validators.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{invalid, Result};

/// Inputs of a one-sided concentration bound on an empirical mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    /// Empirical mean (or rate) being bounded.
    pub value: f64,
    /// Effective sample size.
    pub n: f64,
    /// Failure probability of the bound.
    pub eta: f64,
    /// Range bound `B` of the per-sample metric.
    pub range_b: f64,
}

impl BoundQuery {
    pub fn new(value: f64, n: f64, eta: f64, range_b: f64) -> Result<Self> {
        let q = BoundQuery { value, n, eta, range_b };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0) {
            return Err(invalid(format!("n must be > 0, got {}", self.n)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        if !(self.range_b > 0.0) {
            return Err(invalid(format!("range bound must be > 0, got {}", self.range_b)));
        }
        Ok(())
    }
}

/// Bernstein upper bound on the expected value of a `[0, B]` metric:
/// `value + sqrt(2 B value ln(1/eta) / n) + 4 B ln(1/eta) / n`.
///
/// Negative `value` (possible after adding noise) is treated as zero.
pub fn bernstein_upper_bound(q: &BoundQuery) -> f64 {
    let value = q.value.max(0.0);
    let log_term = (1.0 / q.eta).ln();
    value + (2.0 * q.range_b * value * log_term / q.n).sqrt() + 4.0 * q.range_b * log_term / q.n
}

/// Hoeffding deviation `B sqrt(ln(1/eta) / n)`. Callers fold any union-bound
/// factor into `eta` beforehand.
pub fn hoeffding_term(n: f64, eta: f64, range_b: f64) -> f64 {
    range_b * ((1.0 / eta).ln() / n).sqrt()
}

const BISECTION_STEPS: usize = 200;

fn bisect(mut lo: f64, mut hi: f64, mut too_low: impl FnMut(f64) -> bool) -> f64 {
    // Finds the boundary of a predicate that is true on [lo, x) and false on [x, hi].
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if too_low(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn binomial(p: f64, n: u64) -> Binomial {
    Binomial::new(p.clamp(0.0, 1.0), n).expect("p clamped into [0, 1]")
}

/// Lower confidence bound on a binomial proportion: the `p` at which seeing
/// at least `k` successes out of `n` has probability `eta`.
pub fn binomial_lower(k: u64, n: u64, eta: f64) -> f64 {
    if k == 0 || n == 0 {
        return 0.0;
    }
    let k = k.min(n);
    // P(X >= k | p) = sf(k - 1) increases with p.
    bisect(0.0, 1.0, |p| binomial(p, n).sf(k - 1) < eta)
}

/// Upper confidence bound: the `p` at which seeing at most `k` successes out
/// of `n` has probability `eta`.
pub fn binomial_upper(k: u64, n: u64, eta: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // P(X <= k | p) decreases with p.
    bisect(0.0, 1.0, |p| binomial(p, n).cdf(k) > eta)
}

/// Clopper-Pearson style interval `(BinLB, BinUB)` for possibly noised,
/// real-valued `k` and `n`.
///
/// `k` is clamped to `[0, n]`. The lower bound uses `floor(k)` successes out
/// of `ceil(n)` trials and the upper bound `ceil(k)` out of `floor(n)`; both
/// roundings move the bound in the conservative direction.
pub fn binomial_ci(k: f64, n: f64, eta: f64) -> Result<(f64, f64)> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid(format!("n must be > 0, got {n}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must be in (0, 1), got {eta}")));
    }
    let k = if k.is_nan() { 0.0 } else { k.clamp(0.0, n) };
    let n_hi = n.ceil() as u64;
    let n_lo = n.floor() as u64;
    let lower = binomial_lower(k.floor() as u64, n_hi, eta);
    let upper = if n_lo == 0 {
        1.0
    } else {
        binomial_upper((k.ceil() as u64).min(n_lo), n_lo, eta)
    };
    Ok((lower, upper))
}
