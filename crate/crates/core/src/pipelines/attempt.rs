use serde::{Deserialize, Serialize};

use super::source::Record;
use super::trainers::{
    dp_linreg, group_means_from_stats, predict_linear, scalar_from_stats, ArtifactKind, LinregClip, TrainedArtifact,
    DEFAULT_RIDGE,
};
use crate::error::{invalid, Error, Result};
use crate::mechanism::NoiseSource;
use crate::privacy::PrivacyParams;
use crate::validators::{self, Metric, Minimizer, SampleStats, ValidationOutcome, ValidatorConfig};

/// Every tenth record (by arrival index) is held out for testing.
pub const TEST_EVERY: u64 = 10;

pub fn is_test_record(r: &Record) -> bool {
    r.arrival_index % TEST_EVERY == TEST_EVERY - 1
}

/// Power sums of clipped labels for one key.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KeyMoments {
    pub n: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl KeyMoments {
    pub fn push(&mut self, y: f64) {
        let y2 = y * y;
        self.n += 1.0;
        self.s1 += y;
        self.s2 += y2;
        self.s3 += y2 * y;
        self.s4 += y2 * y2;
    }

    pub fn merge(&mut self, o: &KeyMoments) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
        self.s4 += o.s4;
    }

    pub fn label_stats(&self) -> SampleStats {
        SampleStats {
            n: self.n,
            sum: self.s1,
            sum_sq: self.s2,
        }
    }

    /// Squared-error stats of the constant prediction `m`.
    pub fn squared_error(&self, m: f64, range_b: f64) -> SampleStats {
        let sum = self.s2 - 2.0 * m * self.s1 + self.n * m * m;
        let m2 = m * m;
        let sum_sq = self.s4 - 4.0 * m * self.s3 + 6.0 * m2 * self.s2 - 4.0 * m2 * m * self.s1 + self.n * m2 * m2;
        SampleStats::from_sums(self.n, sum, sum_sq, range_b)
    }
}

/// Aggregates of one split of the data; raw records are kept only when a
/// trainer needs them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    pub keys: Vec<KeyMoments>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<Record>,
}

impl SplitData {
    pub fn total(&self) -> KeyMoments {
        let mut t = KeyMoments::default();
        for k in &self.keys {
            t.merge(k);
        }
        t
    }

    pub fn n(&self) -> f64 {
        self.keys.iter().map(|k| k.n).sum()
    }

    fn merge(&mut self, o: &SplitData) {
        if self.keys.len() < o.keys.len() {
            self.keys.resize(o.keys.len(), KeyMoments::default());
        }
        for (a, b) in self.keys.iter_mut().zip(&o.keys) {
            a.merge(b);
        }
        self.records.extend_from_slice(&o.records);
    }
}

/// The data of one block split into disjoint train and test parts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockData {
    pub train: SplitData,
    pub test: SplitData,
}

impl BlockData {
    /// Labels are clipped to `[0, label_max]` before aggregation.
    pub fn from_records(records: &[Record], nkeys: usize, label_max: f64, keep_records: bool) -> Result<Self> {
        if nkeys == 0 {
            return Err(invalid("nkeys must be > 0"));
        }
        let mut data = BlockData {
            train: SplitData {
                keys: vec![KeyMoments::default(); nkeys],
                records: Vec::new(),
            },
            test: SplitData {
                keys: vec![KeyMoments::default(); nkeys],
                records: Vec::new(),
            },
        };
        for r in records {
            let k = r.key as usize;
            if k >= nkeys {
                return Err(invalid(format!("record key {k} outside [0, {nkeys})")));
            }
            let split = if is_test_record(r) { &mut data.test } else { &mut data.train };
            let y = if r.label.is_nan() { 0.0 } else { r.label.clamp(0.0, label_max) };
            split.keys[k].push(y);
            if keep_records {
                split.records.push(r.clone());
            }
        }
        Ok(data)
    }

    pub fn merge(&mut self, o: &BlockData) {
        self.train.merge(&o.train);
        self.test.merge(&o.test);
    }

    pub fn merged<'a>(blocks: impl IntoIterator<Item = &'a BlockData>) -> BlockData {
        let mut out = BlockData::default();
        for b in blocks {
            out.merge(b);
        }
        out
    }
}

/// Trainer of a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainerKind {
    /// Per-key label means, validated on squared error.
    GroupMeans,
    /// Mean label, validated on its own additive error.
    ScalarStat,
    /// Thresholded mean of binary labels, validated on accuracy.
    Majority,
    /// Ridge regression on noised sufficient statistics, validated on
    /// squared error. Needs raw records.
    LinearModel {
        #[serde(default = "default_rho")]
        rho: f64,
    },
}

fn default_rho() -> f64 {
    DEFAULT_RIDGE
}

impl TrainerKind {
    pub fn metric(&self) -> Metric {
        match self {
            TrainerKind::GroupMeans | TrainerKind::LinearModel { .. } => Metric::Loss,
            TrainerKind::ScalarStat => Metric::SumStat,
            TrainerKind::Majority => Metric::Accuracy,
        }
    }

    pub fn needs_records(&self) -> bool {
        matches!(self, TrainerKind::LinearModel { .. })
    }
}

fn default_label_max() -> f64 {
    1.0
}

fn default_train_share() -> f64 {
    0.5
}

/// What a pipeline trains and how it is validated. The validator's epsilon
/// is overwritten per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub trainer: TrainerKind,
    pub validator: ValidatorConfig,
    #[serde(default = "default_label_max")]
    pub label_max: f64,
    /// Fraction of an attempt's epsilon given to training; the rest goes to
    /// validation. Scalar statistics ignore it: their validation reuses the
    /// training release.
    #[serde(default = "default_train_share")]
    pub train_share: f64,
}

impl PipelineSpec {
    pub fn new(trainer: TrainerKind, validator: ValidatorConfig) -> Self {
        PipelineSpec {
            trainer,
            validator,
            label_max: 1.0,
            train_share: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validator.validate()?;
        if self.validator.metric != self.trainer.metric() {
            return Err(invalid(format!(
                "trainer {:?} is validated on {}, not {}",
                self.trainer,
                self.trainer.metric(),
                self.validator.metric
            )));
        }
        if !(self.label_max > 0.0 && self.label_max.is_finite()) {
            return Err(invalid("label_max must be positive"));
        }
        if !(self.train_share > 0.0 && self.train_share < 1.0) {
            return Err(invalid("train_share must lie in (0, 1)"));
        }
        let needed = match self.trainer.metric() {
            Metric::Loss => self.label_max * self.label_max,
            Metric::SumStat => self.label_max,
            Metric::Accuracy => 1.0,
        };
        if self.validator.range_b < needed {
            return Err(invalid(format!("validator range_b must be at least {needed}")));
        }
        if let TrainerKind::LinearModel { rho } = self.trainer {
            if !(rho >= 0.0) {
                return Err(invalid("ridge rho must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Result of one train-then-validate attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub artifact: Option<TrainedArtifact>,
    pub outcome: ValidationOutcome,
    /// Total mechanism spend of the attempt.
    pub spent: PrivacyParams,
}

/// Trains on `data.train` and validates on `data.test` within `epsilon`.
/// Training failures come back as RETRY with insufficient samples.
pub fn run_attempt(spec: &PipelineSpec, data: &BlockData, epsilon: f64, noise: &mut NoiseSource) -> Result<Attempt> {
    spec.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("attempt epsilon must be positive"));
    }
    let total = PrivacyParams { epsilon, delta: 0.0 };
    let eps_train = epsilon * spec.train_share;
    let vcfg = spec.validator.with_epsilon(epsilon - eps_train);
    let lmax = spec.label_max;
    let failed = |cfg: &ValidatorConfig| Attempt {
        artifact: None,
        outcome: ValidationOutcome::insufficient(cfg, cfg.epsilon),
        spent: total,
    };

    match spec.trainer {
        TrainerKind::ScalarStat => {
            let cfg = spec.validator.with_epsilon(epsilon);
            let stats = data.train.total().label_stats();
            match scalar_from_stats(&stats, epsilon, lmax, noise) {
                Ok(rel) => Ok(Attempt {
                    artifact: Some(TrainedArtifact {
                        kind: ArtifactKind::ScalarStat,
                        parameters: vec![rel.mean],
                        training_spend: rel.spend,
                        data_window: None,
                    }),
                    outcome: validators::sum_stat_decision(rel.noised_count, &cfg, epsilon),
                    spent: total,
                }),
                Err(Error::TrainingFailure(_)) => Ok(failed(&cfg)),
                Err(e) => Err(e),
            }
        }
        TrainerKind::GroupMeans => {
            let stats: Vec<SampleStats> = data.train.keys.iter().map(KeyMoments::label_stats).collect();
            let means = group_means_from_stats(&stats, eps_train, lmax, noise)?;
            let fallback = lmax / 2.0;
            let means: Vec<f64> = means.into_iter().map(|m| m.unwrap_or(fallback).clamp(0.0, lmax)).collect();
            let test = data
                .test
                .keys
                .iter()
                .zip(&means)
                .fold(SampleStats::default(), |acc, (k, &m)| acc.merge(&k.squared_error(m, vcfg.range_b)));
            let best = data.train.keys.iter().fold(SampleStats::default(), |acc, k| {
                let m = if k.n > 0.0 { k.s1 / k.n } else { fallback };
                acc.merge(&k.squared_error(m, vcfg.range_b))
            });
            let outcome = validators::validate(&vcfg, &test, Some((&best, Minimizer::Exact)), noise)?;
            Ok(Attempt {
                artifact: Some(TrainedArtifact {
                    kind: ArtifactKind::GroupMeans,
                    parameters: means,
                    training_spend: PrivacyParams { epsilon: eps_train, delta: 0.0 },
                    data_window: None,
                }),
                outcome,
                spent: total,
            })
        }
        TrainerKind::Majority => {
            let train = data.train.total();
            let stats = SampleStats::from_sums(train.n, train.s1, train.s1, 1.0);
            let rel = match scalar_from_stats(&stats, eps_train, 1.0, noise) {
                Ok(rel) => rel,
                Err(Error::TrainingFailure(_)) => return Ok(failed(&vcfg)),
                Err(e) => return Err(e),
            };
            let predict_one = rel.mean >= 0.5;
            let test = data.test.total();
            let k = if predict_one { test.s1 } else { test.n - test.s1 };
            let test_stats = SampleStats::from_sums(test.n, k, k, 1.0);
            let best_k = train.s1.max(train.n - train.s1);
            let best = SampleStats::from_sums(train.n, best_k, best_k, 1.0);
            let outcome = validators::validate(&vcfg, &test_stats, Some((&best, Minimizer::Exact)), noise)?;
            Ok(Attempt {
                artifact: Some(TrainedArtifact {
                    kind: ArtifactKind::ScalarStat,
                    parameters: vec![rel.mean],
                    training_spend: rel.spend,
                    data_window: None,
                }),
                outcome,
                spent: total,
            })
        }
        TrainerKind::LinearModel { rho } => {
            if data.train.n() > 0.0 && data.train.records.is_empty() {
                return Err(invalid("linear model pipelines need blocks built with raw records"));
            }
            let model = match dp_linreg(&data.train.records, eps_train, LinregClip { label_max: lmax }, rho, noise) {
                Ok(m) => m,
                Err(Error::TrainingFailure(_)) => return Ok(failed(&vcfg)),
                Err(e) => return Err(e),
            };
            let losses = |recs: &[Record]| {
                let v: Vec<f64> = recs
                    .iter()
                    .map(|r| {
                        let e = r.label.clamp(0.0, lmax) - predict_linear(&model.parameters, &r.features, lmax);
                        e * e
                    })
                    .collect();
                SampleStats::from_values(&v, vcfg.range_b)
            };
            let test = losses(&data.test.records);
            let approx = losses(&data.train.records);
            let outcome = validators::validate(&vcfg, &test, Some((&approx, Minimizer::Approximate)), noise)?;
            Ok(Attempt {
                artifact: Some(model),
                outcome,
                spent: total,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipelines::source::{generate_stream, SyntheticSource};
    use crate::validators::Verdict;

    fn spec(trainer: TrainerKind, target: f64) -> PipelineSpec {
        let cfg = ValidatorConfig::new(trainer.metric(), target, 0.05, 1.0, 1.0).unwrap();
        PipelineSpec::new(trainer, cfg)
    }

    #[test]
    fn split_is_one_in_ten() {
        let recs = generate_stream(&SyntheticSource::grouped(1, vec![0.5; 3], 0.1), 1000).unwrap();
        let d = BlockData::from_records(&recs, 3, 1.0, false).unwrap();
        assert_eq!(d.test.n(), 100.0);
        assert_eq!(d.train.n(), 900.0);
    }

    #[test]
    fn squared_error_matches_direct() {
        let ys = [0.1, 0.4, 0.9, 0.3];
        let mut k = KeyMoments::default();
        ys.iter().for_each(|&y| k.push(y));
        let m = 0.35;
        let direct: Vec<f64> = ys.iter().map(|y| (y - m) * (y - m)).collect();
        let s = k.squared_error(m, 1.0);
        let d = SampleStats::from_values(&direct, 1.0);
        assert!((s.sum - d.sum).abs() < 1e-12 && (s.sum_sq - d.sum_sq).abs() < 1e-12);
    }

    #[test]
    fn scalar_attempt_spends_once() {
        let recs = generate_stream(&SyntheticSource::grouped(2, vec![0.3], 0.1), 20_000).unwrap();
        let d = BlockData::from_records(&recs, 1, 1.0, false).unwrap();
        let mut noise = NoiseSource::new(3, "t");
        let a = run_attempt(&spec(TrainerKind::ScalarStat, 0.05), &d, 0.5, &mut noise).unwrap();
        assert_eq!(a.outcome.verdict, Verdict::Accept);
        assert!((noise.audited_epsilon() - 0.5).abs() < 1e-12);
        assert_eq!(a.spent.epsilon, 0.5);
    }

    #[test]
    fn group_means_attempt_audit_matches_spend() {
        let recs = generate_stream(&SyntheticSource::grouped(4, vec![0.2, 0.8], 0.05), 50_000).unwrap();
        let d = BlockData::from_records(&recs, 2, 1.0, false).unwrap();
        let mut noise = NoiseSource::new(5, "t");
        let a = run_attempt(&spec(TrainerKind::GroupMeans, 0.02), &d, 1.0, &mut noise).unwrap();
        assert_eq!(a.outcome.verdict, Verdict::Accept);
        // training eps/2 plus one validation test at eps/2
        assert!((noise.audited_epsilon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn majority_rejects_unreachable_target() {
        let recs = generate_stream(&SyntheticSource::binary(6, 0.743), 50_000).unwrap();
        let d = BlockData::from_records(&recs, 1, 1.0, false).unwrap();
        let mut noise = NoiseSource::new(7, "t");
        let a = run_attempt(&spec(TrainerKind::Majority, 0.9), &d, 1.0, &mut noise).unwrap();
        assert_eq!(a.outcome.verdict, Verdict::Reject);
        assert!(!a.outcome.approximate);
        let a = run_attempt(&spec(TrainerKind::Majority, 0.7), &d, 1.0, &mut noise).unwrap();
        assert_eq!(a.outcome.verdict, Verdict::Accept);
    }

    #[test]
    fn linear_attempt_needs_records() {
        let src = SyntheticSource::linear(8, vec![0.8], 0.05);
        let recs = generate_stream(&src, 20_000).unwrap();
        let lin = spec(TrainerKind::LinearModel { rho: 0.1 }, 0.03);
        let d = BlockData::from_records(&recs, 1, 1.0, false).unwrap();
        let mut noise = NoiseSource::new(9, "t");
        assert!(run_attempt(&lin, &d, 1.0, &mut noise).is_err());
        let d = BlockData::from_records(&recs, 1, 1.0, true).unwrap();
        let a = run_attempt(&lin, &d, 1.0, &mut noise).unwrap();
        assert_eq!(a.outcome.verdict, Verdict::Accept);
    }

    #[test]
    fn empty_data_is_retry() {
        let d = BlockData::from_records(&[], 1, 1.0, false).unwrap();
        let mut noise = NoiseSource::noise_off();
        for t in [TrainerKind::ScalarStat, TrainerKind::Majority, TrainerKind::GroupMeans] {
            let a = run_attempt(&spec(t, 0.1), &d, 1.0, &mut noise).unwrap();
            assert_eq!(a.outcome.verdict, Verdict::Retry);
        }
    }

    #[test]
    fn spec_checks_metric() {
        let cfg = ValidatorConfig::new(Metric::Accuracy, 0.5, 0.05, 1.0, 1.0).unwrap();
        assert!(PipelineSpec::new(TrainerKind::ScalarStat, cfg).validate().is_err());
    }
}
