//! Composition rules mapping a list of spends on one block to the total
//! privacy loss of that block.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::privacy::PrivacyParams;

/// Constant of the adaptive (filter) strong-composition bound.
pub const ADAPTIVE_BOUND_CONSTANT: f64 = 28.04;

/// Running sums over a block's spends, enough to evaluate every accountant
/// in constant time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpendSummary {
    pub count: usize,
    pub sum_epsilon: f64,
    pub sum_delta: f64,
    pub sum_sq_epsilon: f64,
    /// `sum (e^eps_i - 1) eps_i`.
    pub drift: f64,
}

impl SpendSummary {
    pub fn of(spends: &[PrivacyParams]) -> Self {
        let mut s = SpendSummary::default();
        for p in spends {
            s.push(*p);
        }
        s
    }

    pub fn push(&mut self, p: PrivacyParams) {
        self.count += 1;
        self.sum_epsilon += p.epsilon;
        self.sum_delta += p.delta;
        self.sum_sq_epsilon += p.epsilon * p.epsilon;
        self.drift += p.epsilon.exp_m1() * p.epsilon;
    }

    pub fn with(&self, p: PrivacyParams) -> Self {
        let mut s = *self;
        s.push(p);
        s
    }
}

fn check_delta_tilde(delta_tilde: f64) -> Result<()> {
    if delta_tilde > 0.0 && delta_tilde < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta_tilde must be in (0, 1), got {delta_tilde}")))
    }
}

/// Sums epsilons and deltas.
pub fn basic_compose(spends: &[PrivacyParams]) -> PrivacyParams {
    basic_from_summary(&SpendSummary::of(spends))
}

fn basic_from_summary(s: &SpendSummary) -> PrivacyParams {
    PrivacyParams {
        epsilon: s.sum_epsilon,
        delta: s.sum_delta,
    }
}

/// Strong composition for spends whose parameters were fixed in advance:
/// `sum (e^eps_i - 1) eps_i + sqrt(sum 2 eps_i^2 ln(1/delta_tilde))`,
/// with delta `delta_tilde + sum delta_i`.
pub fn strong_compose_fixed(spends: &[PrivacyParams], delta_tilde: f64) -> Result<PrivacyParams> {
    check_delta_tilde(delta_tilde)?;
    Ok(fixed_from_summary(&SpendSummary::of(spends), delta_tilde))
}

fn fixed_from_summary(s: &SpendSummary, delta_tilde: f64) -> PrivacyParams {
    let log_term = (1.0 / delta_tilde).ln();
    PrivacyParams {
        epsilon: s.drift + (2.0 * s.sum_sq_epsilon * log_term).sqrt(),
        delta: delta_tilde + s.sum_delta,
    }
}

/// Left-hand side of the adaptive strong-composition filter condition.
/// Spends may depend on earlier outputs; the value must stay `<= eps_g`.
///
/// Unlike the fixed bound this is positive even with no spends, since the
/// `eps_g^2 / (c ln(1/delta_tilde))` slack term is always present.
pub fn strong_compose_adaptive(
    spends: &[PrivacyParams],
    eps_g: f64,
    delta_tilde: f64,
) -> Result<PrivacyParams> {
    check_delta_tilde(delta_tilde)?;
    if !(eps_g > 0.0) {
        return Err(invalid(format!("eps_g must be > 0, got {eps_g}")));
    }
    Ok(adaptive_from_summary(&SpendSummary::of(spends), eps_g, delta_tilde))
}

fn adaptive_from_summary(s: &SpendSummary, eps_g: f64, delta_tilde: f64) -> PrivacyParams {
    let log_term = (1.0 / delta_tilde).ln();
    let c = ADAPTIVE_BOUND_CONSTANT * log_term;
    let eg2 = eps_g * eps_g;
    let spread = (2.0 * (s.sum_sq_epsilon + eg2 / c)).sqrt();
    let log_factor = ((1.0 + 0.5 * (c * s.sum_sq_epsilon / eg2 + 1.0).ln()) * log_term).sqrt();
    PrivacyParams {
        epsilon: s.drift / 2.0 + spread * log_factor,
        delta: delta_tilde + s.sum_delta,
    }
}

/// Which composition rule a ledger enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Accountant {
    #[default]
    Basic,
    StrongFixed,
    StrongAdaptive,
}

impl Accountant {
    /// Composed spend of `spends` under this rule. `delta_tilde` is ignored by
    /// the basic accountant.
    pub fn compose(&self, spends: &[PrivacyParams], eps_g: f64, delta_tilde: f64) -> Result<PrivacyParams> {
        match self {
            Accountant::Basic => Ok(basic_compose(spends)),
            Accountant::StrongFixed => strong_compose_fixed(spends, delta_tilde),
            Accountant::StrongAdaptive => strong_compose_adaptive(spends, eps_g, delta_tilde),
        }
    }

    /// Same as [`Accountant::compose`] on pre-summed spends. Arguments are
    /// assumed valid.
    pub fn evaluate(&self, summary: &SpendSummary, eps_g: f64, delta_tilde: f64) -> PrivacyParams {
        match self {
            Accountant::Basic => basic_from_summary(summary),
            Accountant::StrongFixed => fixed_from_summary(summary, delta_tilde),
            Accountant::StrongAdaptive => adaptive_from_summary(summary, eps_g, delta_tilde),
        }
    }

    pub fn uses_delta_tilde(&self) -> bool {
        !matches!(self, Accountant::Basic)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Accountant::Basic => "basic",
            Accountant::StrongFixed => "strong_fixed",
            Accountant::StrongAdaptive => "strong_adaptive",
        }
    }

    pub fn all() -> [Accountant; 3] {
        [Accountant::Basic, Accountant::StrongFixed, Accountant::StrongAdaptive]
    }
}

impl std::str::FromStr for Accountant {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Accountant::Basic),
            "strong_fixed" => Ok(Accountant::StrongFixed),
            "strong_adaptive" => Ok(Accountant::StrongAdaptive),
            other => Err(invalid(format!("unknown accountant {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(e: f64, d: f64) -> PrivacyParams {
        PrivacyParams { epsilon: e, delta: d }
    }

    #[test]
    fn basic_examples() {
        let c = basic_compose(&[pp(0.3, 0.0), pp(0.4, 0.0)]);
        assert!((c.epsilon - 0.7).abs() < 1e-15 && c.delta == 0.0);
        assert_eq!(basic_compose(&[]), PrivacyParams::ZERO);
        let c = basic_compose(&[pp(0.5, 1e-6), pp(0.5, 1e-6)]);
        assert_eq!(c.epsilon, 1.0);
        assert!((c.delta - 2e-6).abs() < 1e-20);
    }

    #[test]
    fn strong_fixed_ten_spends() {
        // Frozen from an independent evaluation of the closed form.
        let c = strong_compose_fixed(&vec![pp(0.1, 0.0); 10], 1e-6).unwrap();
        assert!((c.epsilon - 1.767_429_054_344_757_7).abs() < 1e-12);
        assert_eq!(c.delta, 1e-6);
    }

    #[test]
    fn strong_fixed_single_and_empty() {
        let (e, dt): (f64, f64) = (0.3, 1e-5);
        let c = strong_compose_fixed(&[pp(e, 0.0)], dt).unwrap();
        let expect = e.exp_m1() * e + e * (2.0 * (1.0 / dt).ln()).sqrt();
        assert!((c.epsilon - expect).abs() < 1e-14);
        let c = strong_compose_fixed(&[], 1e-6).unwrap();
        assert_eq!(c, pp(0.0, 1e-6));
    }

    #[test]
    fn strong_rejects_bad_delta_tilde() {
        assert!(strong_compose_fixed(&[], 0.0).is_err());
        assert!(strong_compose_fixed(&[], 1.0).is_err());
        assert!(strong_compose_adaptive(&[], 1.0, 1.5).is_err());
        assert!(strong_compose_adaptive(&[], 0.0, 1e-6).is_err());
    }

    #[test]
    fn adaptive_values() {
        let empty = strong_compose_adaptive(&[], 1.0, 1e-6).unwrap();
        assert!((empty.epsilon - 0.267_070_545_318_816_74).abs() < 1e-12);
        assert!((empty.epsilon - (2.0 / ADAPTIVE_BOUND_CONSTANT).sqrt()).abs() < 1e-12);
        assert_eq!(empty.delta, 1e-6);
        let ten = strong_compose_adaptive(&vec![pp(0.1, 0.0); 10], 1.0, 1e-6).unwrap();
        assert!((ten.epsilon - 2.890_379_183_726_099_5).abs() < 1e-12);
    }

    #[test]
    fn strong_beats_basic_for_many_small_spends() {
        let spends = vec![pp(0.01, 0.0); 100];
        let strong = strong_compose_fixed(&spends, 1e-6).unwrap();
        let basic = basic_compose(&spends);
        assert!(strong.epsilon < basic.epsilon);
        assert!((strong.epsilon - 0.535_702_344_059_861_5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn basic_is_permutation_invariant(mut v in prop::collection::vec((0.0f64..2.0, 0.0f64..1e-3), 0..20), seed in any::<u64>()) {
            let spends: Vec<_> = v.iter().map(|&(e, d)| pp(e, d)).collect();
            let a = basic_compose(&spends);
            // deterministic shuffle
            let n = v.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    v.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            let shuffled: Vec<_> = v.iter().map(|&(e, d)| pp(e, d)).collect();
            let b = basic_compose(&shuffled);
            prop_assert!((a.epsilon - b.epsilon).abs() < 1e-12);
            prop_assert!((a.delta - b.delta).abs() < 1e-15);
            // associativity: split anywhere
            let k = n / 2;
            let c = basic_compose(&spends[..k]) + basic_compose(&spends[k..]);
            prop_assert!((a.epsilon - c.epsilon).abs() < 1e-12);
        }

        #[test]
        fn adaptive_monotone_in_appended_spend(v in prop::collection::vec(0.001f64..0.5, 0..30), extra in 0.001f64..0.5) {
            let spends: Vec<_> = v.iter().map(|&e| pp(e, 0.0)).collect();
            let before = strong_compose_adaptive(&spends, 1.0, 1e-6).unwrap();
            let mut more = spends.clone();
            more.push(pp(extra, 0.0));
            let after = strong_compose_adaptive(&more, 1.0, 1e-6).unwrap();
            prop_assert!(after.epsilon >= before.epsilon);
            let f0 = strong_compose_fixed(&spends, 1e-6).unwrap();
            let f1 = strong_compose_fixed(&more, 1e-6).unwrap();
            prop_assert!(f1.epsilon >= f0.epsilon);
        }
    }
}
