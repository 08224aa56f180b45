use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// An `(epsilon, delta)` pair. Used both for budget requests and for
/// recording what a computation actually spent.
///
/// `epsilon == 0` is only meaningful as the "nothing spent" value in
/// accounting; requests must carry a strictly positive epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub const ZERO: PrivacyParams = PrivacyParams { epsilon: 0.0, delta: 0.0 };

    /// Builds a spend request. Rejects non-positive epsilon and delta outside `[0, 1)`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let p = PrivacyParams { epsilon, delta };
        p.validate_request()?;
        Ok(p)
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    /// Accepts the zero sentinel in addition to valid requests.
    pub fn validate_accounting(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must be in [0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn validate_request(&self) -> Result<()> {
        self.validate_accounting()?;
        if self.epsilon <= 0.0 {
            return Err(invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Componentwise `self <= other` up to an absolute tolerance.
    pub fn within(&self, other: &PrivacyParams, tol: f64) -> bool {
        self.epsilon <= other.epsilon + tol && self.delta <= other.delta + tol
    }
}

impl std::ops::Add for PrivacyParams {
    type Output = PrivacyParams;

    fn add(self, rhs: Self) -> Self {
        PrivacyParams {
            epsilon: self.epsilon + rhs.epsilon,
            delta: self.delta + rhs.delta,
        }
    }
}

impl std::ops::AddAssign for PrivacyParams {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl fmt::Display for PrivacyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.epsilon, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_rejects_zero_epsilon() {
        assert!(PrivacyParams::new(0.0, 0.0).is_err());
        assert!(PrivacyParams::ZERO.validate_accounting().is_ok());
    }

    #[test]
    fn delta_range() {
        assert!(PrivacyParams::new(1.0, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, -1e-9).is_err());
        assert!(PrivacyParams::new(1.0, 0.999).is_ok());
    }

    #[test]
    fn nan_rejected() {
        assert!(PrivacyParams::new(f64::NAN, 0.0).is_err());
        assert!(PrivacyParams::new(f64::INFINITY, 0.0).is_err());
    }
}
