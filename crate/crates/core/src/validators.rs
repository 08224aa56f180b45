//! High-confidence ACCEPT / REJECT / RETRY decisions on a model's quality
//! target, with explicit corrections for the Laplace noise
//! the test itself injects.
//!
//! Every test touches the data only through Laplace-noised counts and sums
//! (sensitivity 1 for counts, `B` for clipped metric sums), each released at
//! half of the test's epsilon. All remaining arithmetic is post-processing.
//! Degenerate noised quantities (e.g. a noised count at or below zero) give
//! RETRY, never an error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{bernstein_upper_bound, binomial_ci, hoeffding_term, BoundQuery};
use crate::error::{invalid, Result};
use crate::mechanism::NoiseSource;
use crate::privacy::PrivacyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Loss,
    Accuracy,
    SumStat,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Loss => "loss",
            Metric::Accuracy => "accuracy",
            Metric::SumStat => "sum_stat",
        })
    }
}

/// Concentration inequality used by the loss ACCEPT test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcceptBound {
    #[default]
    Bernstein,
    /// Maurer-Pontil empirical Bernstein, with a third noised release for the
    /// second moment. Tighter when the loss variance is small.
    EmpiricalBernstein,
    Hoeffding,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    pub metric: Metric,
    /// `tau_loss`, `tau_acc` or `tau_err` depending on the metric.
    pub target: f64,
    pub eta: f64,
    /// Range bound `B` of per-record metric values.
    #[serde(default = "one")]
    pub range_b: f64,
    /// Budget of one test (ACCEPT or REJECT).
    pub epsilon: f64,
    #[serde(default)]
    pub accept_bound: AcceptBound,
    /// Turning this off drops the DP-noise corrections and voids the
    /// guarantees. Only for measuring what the corrections buy.
    #[serde(default = "default_true")]
    pub dp_corrections: bool,
}

fn one() -> f64 {
    1.0
}

impl ValidatorConfig {
    pub fn new(metric: Metric, target: f64, eta: f64, range_b: f64, epsilon: f64) -> Result<Self> {
        let cfg = ValidatorConfig {
            metric,
            target,
            eta,
            range_b,
            epsilon,
            accept_bound: AcceptBound::default(),
            dp_corrections: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        if !(self.range_b > 0.0 && self.range_b.is_finite()) {
            return Err(invalid(format!("range bound must be > 0, got {}", self.range_b)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("validation epsilon must be > 0, got {}", self.epsilon)));
        }
        let ok = match self.metric {
            Metric::Loss | Metric::SumStat => self.target > 0.0,
            Metric::Accuracy => self.target > 0.0 && self.target < 1.0,
        };
        if !ok || !self.target.is_finite() {
            return Err(invalid(format!("target {} out of range for {}", self.target, self.metric)));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn expect(&self, metric: Metric) -> Result<()> {
        self.validate()?;
        if self.metric != metric {
            return Err(invalid(format!("validator for {metric} given a {} config", self.metric)));
        }
        Ok(())
    }

    /// DP correction `(2/eps) ln(1/q)`, or zero when corrections are off.
    fn correction(&self, q: f64) -> f64 {
        if self.dp_corrections {
            2.0 / self.epsilon * (1.0 / q).ln()
        } else {
            0.0
        }
    }
}

/// Sufficient statistics of an evaluation sample: record count, sum and sum
/// of squares of per-record values already clipped to `[0, B]` (losses,
/// correctness indicators, or contributions).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl SampleStats {
    /// Clips every value into `[0, range_b]` before summing.
    pub fn from_values(values: &[f64], range_b: f64) -> Self {
        let mut s = SampleStats::default();
        for &v in values {
            let c = if v.is_nan() { range_b } else { v.clamp(0.0, range_b) };
            s.n += 1.0;
            s.sum += c;
            s.sum_sq += c * c;
        }
        s
    }

    pub fn from_correct(correct: &[bool]) -> Self {
        let k = correct.iter().filter(|&&c| c).count() as f64;
        SampleStats {
            n: correct.len() as f64,
            sum: k,
            sum_sq: k,
        }
    }

    /// Stats assembled from pre-aggregated sums; the sums are clamped into
    /// the range implied by `n` and `range_b`.
    pub fn from_sums(n: f64, sum: f64, sum_sq: f64, range_b: f64) -> Self {
        let n = n.max(0.0);
        SampleStats {
            n,
            sum: sum.clamp(0.0, n * range_b),
            sum_sq: sum_sq.clamp(0.0, n * range_b * range_b),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0.0).then(|| self.sum / self.n)
    }

    pub fn merge(&self, other: &SampleStats) -> SampleStats {
        SampleStats {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Accept,
    Reject,
    Retry,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "ACCEPT",
            Verdict::Reject => "REJECT",
            Verdict::Retry => "RETRY",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetryReason {
    /// Noise swamped the count; no bound could be formed.
    InsufficientSamples,
    /// The bound was formed but did not clear the target.
    Inconclusive,
}

/// Result of one validation. Serialized as one event-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub metric: Metric,
    pub target: f64,
    pub eta: f64,
    pub verdict: Verdict,
    /// The corrected bound compared against the target; absent when the
    /// noised sample size left nothing to bound.
    pub dp_bound: Option<f64>,
    pub spent: PrivacyParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<RetryReason>,
    /// Set when a REJECT verdict rests on an approximate training-loss
    /// minimizer and therefore carries no guarantee.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub approximate: bool,
}

impl ValidationOutcome {
    fn new(cfg: &ValidatorConfig, verdict: Verdict, dp_bound: Option<f64>, spent_eps: f64) -> Self {
        ValidationOutcome {
            metric: cfg.metric,
            target: cfg.target,
            eta: cfg.eta,
            verdict,
            dp_bound,
            spent: PrivacyParams {
                epsilon: spent_eps,
                delta: 0.0,
            },
            reason: match verdict {
                Verdict::Retry if dp_bound.is_none() => Some(RetryReason::InsufficientSamples),
                Verdict::Retry => Some(RetryReason::Inconclusive),
                _ => None,
            },
            approximate: false,
        }
    }

    fn decide(cfg: &ValidatorConfig, pass: bool, pass_verdict: Verdict, bound: f64, spent_eps: f64) -> Self {
        let verdict = if pass { pass_verdict } else { Verdict::Retry };
        Self::new(cfg, verdict, Some(bound), spent_eps)
    }

    pub(crate) fn insufficient(cfg: &ValidatorConfig, spent_eps: f64) -> Self {
        Self::new(cfg, Verdict::Retry, None, spent_eps)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcomes serialize")
    }
}

/// Loss ACCEPT test on a held-out test split: accepts only if, with
/// probability at least `1 - eta`, the expected loss of the model is at
/// most the target.
pub fn loss_accept(test: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    cfg.expect(Metric::Loss)?;
    let b = cfg.range_b;
    match cfg.accept_bound {
        AcceptBound::EmpiricalBernstein => return loss_accept_empirical(test, cfg, noise),
        AcceptBound::Bernstein | AcceptBound::Hoeffding => {}
    }
    let half = cfg.epsilon / 2.0;
    let c = cfg.correction(2.0 * cfg.eta / 3.0);
    let n_lb = test.n + noise.laplace(1.0, half)? - c;
    let sum_ub = test.sum + noise.laplace(b, half)? + b * c;
    if !(n_lb > 0.0) {
        return Ok(ValidationOutcome::insufficient(cfg, cfg.epsilon));
    }
    let loss_ub = sum_ub / n_lb;
    let bound = match cfg.accept_bound {
        AcceptBound::Bernstein => bernstein_upper_bound(&BoundQuery {
            value: loss_ub,
            n: n_lb,
            eta: cfg.eta / 3.0,
            range_b: b,
        }),
        _ => loss_ub.max(0.0) + hoeffding_term(n_lb, cfg.eta / 3.0, b),
    };
    Ok(ValidationOutcome::decide(cfg, bound <= cfg.target, Verdict::Accept, bound, cfg.epsilon))
}

fn loss_accept_empirical(test: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    // Four events share eta: count, sum, second moment and the inequality itself.
    let b = cfg.range_b;
    let third = cfg.epsilon / 3.0;
    let q = cfg.eta / 4.0;
    let c = if cfg.dp_corrections {
        3.0 / cfg.epsilon * (1.0 / (2.0 * q)).ln()
    } else {
        0.0
    };
    let n_lb = test.n + noise.laplace(1.0, third)? - c;
    let sum_ub = test.sum + noise.laplace(b, third)? + b * c;
    let sq_ub = test.sum_sq + noise.laplace(b * b, third)? + b * b * c;
    if !(n_lb > 1.0) {
        return Ok(ValidationOutcome::insufficient(cfg, cfg.epsilon));
    }
    let mean_ub = (sum_ub / n_lb).max(0.0);
    let var_ub = (sq_ub / (n_lb - 1.0)).clamp(0.0, b * b);
    let log_term = (2.0 / q).ln();
    let bound = mean_ub + (2.0 * var_ub * log_term / n_lb).sqrt() + 7.0 * b * log_term / (3.0 * (n_lb - 1.0));
    Ok(ValidationOutcome::decide(cfg, bound <= cfg.target, Verdict::Accept, bound, cfg.epsilon))
}

/// Loss REJECT test on the training split, evaluated with the training-loss
/// minimizer of the model class. Rejects only if, with probability at least
/// `1 - eta`, no model of the class reaches the target.
pub fn loss_reject(train: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    cfg.expect(Metric::Loss)?;
    let b = cfg.range_b;
    let half = cfg.epsilon / 2.0;
    let c_n = cfg.correction(cfg.eta / 3.0);
    let c_s = cfg.correction(2.0 * cfg.eta / 3.0);
    let n_dp = train.n + noise.laplace(1.0, half)?;
    let sum_lb = train.sum + noise.laplace(b, half)? - b * c_s;
    let n_lb = n_dp - c_n;
    let n_ub = n_dp + c_n;
    if !(n_lb > 0.0) {
        return Ok(ValidationOutcome::insufficient(cfg, cfg.epsilon));
    }
    let loss_lb = sum_lb / n_ub;
    let bound = loss_lb - hoeffding_term(n_lb, cfg.eta / 3.0, b);
    Ok(ValidationOutcome::decide(cfg, bound > cfg.target, Verdict::Reject, bound, cfg.epsilon))
}

/// Accuracy ACCEPT test: Clopper-Pearson lower bound on the noised,
/// corrected number of correct predictions.
pub fn accuracy_accept(test: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    cfg.expect(Metric::Accuracy)?;
    let half = cfg.epsilon / 2.0;
    let c = cfg.correction(cfg.eta / 3.0);
    let k_dp = test.sum + noise.laplace(1.0, half)?;
    let n_dp = test.n + noise.laplace(1.0, half)?;
    let (k, n) = (k_dp - c, n_dp + c);
    if k < 0.0 || !(n > 0.0) {
        return Ok(ValidationOutcome::insufficient(cfg, cfg.epsilon));
    }
    let (lower, _) = binomial_ci(k, n, cfg.eta / 3.0)?;
    Ok(ValidationOutcome::decide(cfg, lower >= cfg.target, Verdict::Accept, lower, cfg.epsilon))
}

/// Accuracy REJECT test on training predictions of the best in-class model.
pub fn accuracy_reject(train: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    cfg.expect(Metric::Accuracy)?;
    let half = cfg.epsilon / 2.0;
    let c = cfg.correction(cfg.eta / 3.0);
    let k_dp = train.sum + noise.laplace(1.0, half)?;
    let n_dp = train.n + noise.laplace(1.0, half)?;
    let (k, n) = (k_dp + c, n_dp - c);
    if !(n > 0.0) {
        return Ok(ValidationOutcome::insufficient(cfg, cfg.epsilon));
    }
    let (_, upper) = binomial_ci(k, n, cfg.eta / 3.0)?;
    Ok(ValidationOutcome::decide(cfg, upper < cfg.target, Verdict::Reject, upper, cfg.epsilon))
}

/// Error bound of a sum-based statistic released at `cfg.epsilon`, given the
/// statistic's own noised record count. Pure post-processing.
pub fn sum_stat_bound(noised_count: f64, cfg: &ValidatorConfig) -> Option<f64> {
    let log_term = (2.0 / cfg.eta).ln();
    let c = cfg.correction(cfg.eta / 2.0);
    let n_dp = noised_count - c;
    if !(n_dp > 0.0) {
        return None;
    }
    Some((2.0 / cfg.epsilon) * log_term / n_dp + cfg.range_b * (log_term / n_dp).sqrt())
}

/// ACCEPT test for the additive error of a sum-based statistic computed on
/// the training data. There is no REJECT: more data always helps.
///
/// Draws its own noised count at `epsilon / 2`. Pipelines that already hold
/// the statistic's noised count should call [`sum_stat_bound`] instead.
pub fn sum_stat_accept(train: &SampleStats, cfg: &ValidatorConfig, noise: &mut NoiseSource) -> Result<ValidationOutcome> {
    cfg.expect(Metric::SumStat)?;
    let half = cfg.epsilon / 2.0;
    let noised = train.n + noise.laplace(1.0, half)?;
    Ok(sum_stat_decision(noised, cfg, half))
}

pub(crate) fn sum_stat_decision(noised_count: f64, cfg: &ValidatorConfig, spent_eps: f64) -> ValidationOutcome {
    match sum_stat_bound(noised_count, cfg) {
        None => ValidationOutcome::insufficient(cfg, spent_eps),
        Some(bound) => ValidationOutcome::decide(cfg, bound <= cfg.target, Verdict::Accept, bound, spent_eps),
    }
}

/// How the REJECT test's training-set statistics were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Minimizer {
    /// The exact training-loss minimizer over the model class.
    Exact,
    /// A stand-in such as the DP model itself. REJECT verdicts built on it
    /// carry no guarantee.
    Approximate,
}

/// Full validation: run ACCEPT on the test split; if it does not pass
/// and minimizer statistics on the disjoint training split are supplied, run
/// REJECT; otherwise RETRY. The two tests read disjoint splits, so the
/// recorded spend is one test's epsilon.
pub fn validate(
    cfg: &ValidatorConfig,
    test: &SampleStats,
    minimizer: Option<(&SampleStats, Minimizer)>,
    noise: &mut NoiseSource,
) -> Result<ValidationOutcome> {
    let accept = match cfg.metric {
        Metric::Loss => loss_accept(test, cfg, noise)?,
        Metric::Accuracy => accuracy_accept(test, cfg, noise)?,
        Metric::SumStat => return sum_stat_accept(test, cfg, noise),
    };
    if accept.verdict == Verdict::Accept {
        return Ok(accept);
    }
    let Some((train, kind)) = minimizer else {
        return Ok(accept);
    };
    let mut reject = match cfg.metric {
        Metric::Loss => loss_reject(train, cfg, noise)?,
        Metric::Accuracy => accuracy_reject(train, cfg, noise)?,
        Metric::SumStat => unreachable!(),
    };
    reject.spent = accept.spent;
    if reject.verdict == Verdict::Reject {
        reject.approximate = kind == Minimizer::Approximate;
        Ok(reject)
    } else {
        Ok(accept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_cfg(target: f64) -> ValidatorConfig {
        ValidatorConfig::new(Metric::Loss, target, 0.05, 1.0, 1.0).unwrap()
    }

    fn acc_cfg(target: f64) -> ValidatorConfig {
        ValidatorConfig::new(Metric::Accuracy, target, 0.05, 1.0, 1.0).unwrap()
    }

    fn const_stats(n: f64, v: f64) -> SampleStats {
        SampleStats { n, sum: n * v, sum_sq: n * v * v }
    }

    #[test]
    fn loss_accept_zero_losses() {
        let mut noise = NoiseSource::noise_off();
        let out = loss_accept(&const_stats(1e6, 0.0), &loss_cfg(0.01), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Accept);
        // Frozen from a hand evaluation with the Laplace draws set to zero.
        assert!((out.dp_bound.unwrap() - 3.064_340_534_115_842e-5).abs() < 1e-15);
        assert_eq!(out.spent.epsilon, 1.0);
        assert!((noise.audited_epsilon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_accept_empty_is_retry() {
        let mut noise = NoiseSource::noise_off();
        let out = loss_accept(&SampleStats::default(), &loss_cfg(0.5), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Retry);
        assert_eq!(out.reason, Some(RetryReason::InsufficientSamples));
    }

    #[test]
    fn loss_accept_below_floor_never_accepts() {
        let mut noise = NoiseSource::noise_off();
        for n in [1e2, 1e3, 1e4, 1e5, 1e6] {
            let out = loss_accept(&const_stats(n, 0.5), &loss_cfg(0.499), &mut noise).unwrap();
            assert_eq!(out.verdict, Verdict::Retry);
        }
    }

    #[test]
    fn loss_reject_cases() {
        let mut noise = NoiseSource::noise_off();
        let out = loss_reject(&const_stats(1e5, 0.0), &loss_cfg(0.01), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Retry);
        let out = loss_reject(&const_stats(1e5, 0.9), &loss_cfg(0.5), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Reject);
        // hand evaluation: (0.9e5 - 2 ln 30) / (1e5 + 2 ln 60) - sqrt(ln 60 / (1e5 - 2 ln 60))
        let expect = (0.9e5 - 2.0 * 30f64.ln()) / (1e5 + 2.0 * 60f64.ln()) - (60f64.ln() / (1e5 - 2.0 * 60f64.ln())).sqrt();
        assert!((out.dp_bound.unwrap() - expect).abs() < 1e-12);
        let out = loss_reject(&const_stats(1e5, 1.0), &loss_cfg(1.0), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Retry);
        let out = loss_reject(&SampleStats::default(), &loss_cfg(0.1), &mut noise).unwrap();
        assert_eq!(out.reason, Some(RetryReason::InsufficientSamples));
    }

    #[test]
    fn accuracy_cases() {
        let mut noise = NoiseSource::noise_off();
        let all = SampleStats::from_correct(&vec![true; 100_000]);
        assert_eq!(accuracy_accept(&all, &acc_cfg(0.99), &mut noise).unwrap().verdict, Verdict::Accept);
        let none = SampleStats::from_correct(&vec![false; 1000]);
        let out = accuracy_accept(&none, &acc_cfg(0.01), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Retry);
        assert_eq!(accuracy_reject(&all, &acc_cfg(0.999), &mut noise).unwrap().verdict, Verdict::Retry);
        let half = SampleStats { n: 1e4, sum: 5e3, sum_sq: 5e3 };
        let out = accuracy_reject(&half, &acc_cfg(0.9), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Reject);
        assert!(out.dp_bound.unwrap() < 0.52);
        let out = accuracy_reject(&SampleStats::default(), &acc_cfg(0.9), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Retry);
    }

    #[test]
    fn sum_stat_cases() {
        let cfg = ValidatorConfig::new(Metric::SumStat, 0.05, 0.05, 1.0, 1.0).unwrap();
        let mut noise = NoiseSource::noise_off();
        assert_eq!(
            sum_stat_accept(&const_stats(1e7, 0.3), &cfg, &mut noise).unwrap().verdict,
            Verdict::Accept
        );
        assert_eq!(sum_stat_accept(&SampleStats::default(), &cfg, &mut noise).unwrap().verdict, Verdict::Retry);
        assert_eq!(sum_stat_accept(&const_stats(10.0, 0.3), &cfg, &mut noise).unwrap().verdict, Verdict::Retry);
        assert!((noise.audited_epsilon() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_metric_is_an_error() {
        let mut noise = NoiseSource::noise_off();
        assert!(accuracy_accept(&SampleStats::default(), &loss_cfg(0.1), &mut noise).is_err());
        assert!(ValidatorConfig::new(Metric::Accuracy, 1.2, 0.05, 1.0, 1.0).is_err());
        assert!(ValidatorConfig::new(Metric::Loss, 0.1, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn corrections_are_conservative() {
        let mut noise = NoiseSource::noise_off();
        for &(n, v) in &[(200.0, 0.1), (5000.0, 0.3), (1e5, 0.02)] {
            let s = const_stats(n, v);
            let raw = bernstein_upper_bound(&BoundQuery { value: v, n, eta: 0.05 / 3.0, range_b: 1.0 });
            let out = loss_accept(&s, &loss_cfg(0.5), &mut noise).unwrap();
            assert!(out.dp_bound.unwrap() >= raw);
        }
    }

    #[test]
    fn validate_dispatch() {
        let mut noise = NoiseSource::noise_off();
        let out = validate(&loss_cfg(0.1), &const_stats(1e6, 0.01), None, &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Accept);
        let train = const_stats(1e5, 0.4);
        let out = validate(&loss_cfg(0.2), &const_stats(1e5, 0.4), Some((&train, Minimizer::Exact)), &mut noise).unwrap();
        assert_eq!(out.verdict, Verdict::Reject);
        assert!(!out.approximate);
        assert_eq!(out.spent.epsilon, 1.0);
        let out = validate(&loss_cfg(0.2), &const_stats(1e5, 0.4), Some((&train, Minimizer::Approximate)), &mut noise).unwrap();
        assert!(out.approximate);
        let cfg = ValidatorConfig::new(Metric::SumStat, 0.01, 0.05, 1.0, 1.0).unwrap();
        assert_eq!(validate(&cfg, &const_stats(5.0, 0.5), None, &mut noise).unwrap().verdict, Verdict::Retry);
    }

    #[test]
    fn accept_bound_variants() {
        let mut noise = NoiseSource::noise_off();
        let mut cfg = loss_cfg(0.5);
        let s = const_stats(1e5, 0.2);
        let bern = loss_accept(&s, &cfg, &mut noise).unwrap().dp_bound.unwrap();
        cfg.accept_bound = AcceptBound::Hoeffding;
        let hoef = loss_accept(&s, &cfg, &mut noise).unwrap().dp_bound.unwrap();
        assert!(hoef > bern);
        cfg.accept_bound = AcceptBound::EmpiricalBernstein;
        let tight = SampleStats { n: 1e5, sum: 1e5 * 0.2, sum_sq: 1e5 * 0.04 };
        let eb = loss_accept(&tight, &cfg, &mut noise).unwrap();
        assert!(eb.dp_bound.unwrap() > 0.2 && eb.dp_bound.unwrap() < hoef);
        assert!(noise.calls().len() >= 3);
    }

    #[test]
    fn outcome_record_format() {
        let mut noise = NoiseSource::noise_off();
        let out = loss_accept(&const_stats(1e6, 0.0), &loss_cfg(0.01), &mut noise).unwrap();
        let line = out.to_json_line();
        assert!(line.contains("\"verdict\":\"ACCEPT\""));
        assert!(line.contains("\"metric\":\"loss\""));
        let back: ValidationOutcome = serde_json::from_str(&line).unwrap();
        assert_eq!(back, out);
    }
}
