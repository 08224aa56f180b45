use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::source::Record;
use crate::error::{invalid, Error, Result};
use crate::ledger::BlockId;
use crate::mechanism::NoiseSource;
use crate::privacy::PrivacyParams;
use crate::validators::SampleStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    GroupMeans,
    ScalarStat,
    LinearModel,
}

/// Output of a DP training pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedArtifact {
    pub kind: ArtifactKind,
    pub parameters: Vec<f64>,
    pub training_spend: PrivacyParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data_window: Option<Range<BlockId>>,
}

/// Which record value a statistic reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    #[default]
    Label,
    Feature(usize),
}

impl Field {
    pub fn get(&self, r: &Record) -> f64 {
        match self {
            Field::Label => r.label,
            Field::Feature(i) => r.features.get(*i).copied().unwrap_or(0.0),
        }
    }
}

fn clip(v: f64, hi: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, hi)
    }
}

/// Per-key count, sum and sum of squares of a clipped field.
pub fn key_stats(records: &[Record], nkeys: usize, field: Field, value_range: f64) -> Result<Vec<SampleStats>> {
    let mut stats = vec![SampleStats::default(); nkeys];
    for r in records {
        let k = r.key as usize;
        if k >= nkeys {
            return Err(invalid(format!("record key {k} outside [0, {nkeys})")));
        }
        let v = clip(field.get(r), value_range);
        let s = &mut stats[k];
        s.n += 1.0;
        s.sum += v;
        s.sum_sq += v * v;
    }
    Ok(stats)
}

/// Noised per-key means from per-key stats. Counts get `Lap(2/eps)`, sums
/// `Lap(2 * value_range / eps)`; keys partition the records, so the whole
/// release costs `eps`. Keys whose noised count is not positive are absent.
pub fn group_means_from_stats(
    stats: &[SampleStats],
    epsilon: f64,
    value_range: f64,
    noise: &mut NoiseSource,
) -> Result<Vec<Option<f64>>> {
    if stats.is_empty() {
        return Err(invalid("nkeys must be > 0"));
    }
    let half = epsilon / 2.0;
    let count_noise = noise.laplace_vec(1.0, half, stats.len())?;
    let sum_noise = noise.laplace_vec(value_range, half, stats.len())?;
    Ok(stats
        .iter()
        .zip(count_noise.iter().zip(&sum_noise))
        .map(|(s, (nc, ns))| {
            let count = s.n + nc;
            (count > 0.0).then(|| (s.sum + ns) / count)
        })
        .collect())
}

/// DP mean of the label per key.
pub fn dp_group_by_mean(
    records: &[Record],
    nkeys: usize,
    epsilon: f64,
    value_range: f64,
    noise: &mut NoiseSource,
) -> Result<Vec<Option<f64>>> {
    if nkeys == 0 {
        return Err(invalid("nkeys must be > 0"));
    }
    if !(value_range > 0.0) {
        return Err(invalid("value_range must be > 0"));
    }
    let stats = key_stats(records, nkeys, Field::Label, value_range)?;
    group_means_from_stats(&stats, epsilon, value_range, noise)
}

/// A released DP mean along with its noised count, which downstream
/// validation may reuse as post-processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRelease {
    pub mean: f64,
    pub noised_count: f64,
    pub spend: PrivacyParams,
}

pub fn scalar_from_stats(stats: &SampleStats, epsilon: f64, range_b: f64, noise: &mut NoiseSource) -> Result<ScalarRelease> {
    let half = epsilon / 2.0;
    let noised_count = stats.n + noise.laplace(1.0, half)?;
    let noised_sum = stats.sum + noise.laplace(range_b, half)?;
    if !(noised_count > 0.0) {
        return Err(Error::TrainingFailure("noised count is not positive".into()));
    }
    Ok(ScalarRelease {
        mean: noised_sum / noised_count,
        noised_count,
        spend: PrivacyParams { epsilon, delta: 0.0 },
    })
}

/// Noised sum over noised count of one field, `epsilon` split evenly.
pub fn dp_scalar_stat(
    records: &[Record],
    field: Field,
    epsilon: f64,
    range_b: f64,
    noise: &mut NoiseSource,
) -> Result<(f64, PrivacyParams)> {
    if !(range_b > 0.0) {
        return Err(invalid("range_b must be > 0"));
    }
    let mut s = SampleStats::default();
    for r in records {
        let v = clip(field.get(r), range_b);
        s.n += 1.0;
        s.sum += v;
        s.sum_sq += v * v;
    }
    let rel = scalar_from_stats(&s, epsilon, range_b, noise)?;
    Ok((rel.mean, rel.spend))
}

/// Clipping bounds of the regression trainer. Features are projected into
/// the unit ball, labels clipped to `[0, label_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinregClip {
    pub label_max: f64,
}

impl Default for LinregClip {
    fn default() -> Self {
        LinregClip { label_max: 1.0 }
    }
}

pub const DEFAULT_RIDGE: f64 = 0.1;

fn unit_ball(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        x.iter().map(|v| v / norm).collect()
    } else {
        x.to_vec()
    }
}

/// Ridge regression from Laplace-noised sufficient statistics.
///
/// With features in the unit ball, one record moves the upper triangle of
/// `X^T X` by at most `(d + 1) / 2` in L1 and `X^T y` by at most
/// `label_max * sqrt(d)`; each statistic is released at `epsilon / 2`.
pub fn dp_linreg(
    records: &[Record],
    epsilon: f64,
    clip_bounds: LinregClip,
    rho: f64,
    noise: &mut NoiseSource,
) -> Result<TrainedArtifact> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be > 0"));
    }
    if !(rho >= 0.0) {
        return Err(invalid("ridge rho must be >= 0"));
    }
    let d = records.first().map(|r| r.features.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::TrainingFailure("no records to train on".into()));
    }
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    for r in records {
        if r.features.len() != d {
            return Err(invalid("records disagree on feature dimension"));
        }
        let x = DVector::from_vec(unit_ball(&r.features));
        let y = clip(r.label, clip_bounds.label_max);
        xtx += &x * x.transpose();
        xty += &x * y;
    }
    let half = epsilon / 2.0;
    let sens_xtx = (d as f64 + 1.0) / 2.0;
    let sens_xty = clip_bounds.label_max * (d as f64).sqrt();
    let tri = noise.laplace_vec(sens_xtx, half, d * (d + 1) / 2)?;
    let mut it = tri.into_iter();
    for i in 0..d {
        for j in i..d {
            let z = it.next().expect("one draw per upper-triangle entry");
            xtx[(i, j)] += z;
            if i != j {
                xtx[(j, i)] += z;
            }
        }
    }
    let lin = noise.laplace_vec(sens_xty, half, d)?;
    for (i, z) in lin.into_iter().enumerate() {
        xty[i] += z;
    }
    let system = xtx + DMatrix::<f64>::identity(d, d) * rho;
    let w = system
        .lu()
        .solve(&xty)
        .filter(|w| w.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::TrainingFailure("regularized normal equations are singular".into()))?;
    Ok(TrainedArtifact {
        kind: ArtifactKind::LinearModel,
        parameters: w.iter().copied().collect(),
        training_spend: PrivacyParams { epsilon, delta: 0.0 },
        data_window: None,
    })
}

/// Prediction of a linear artifact, clipped to `[0, label_max]`.
pub fn predict_linear(weights: &[f64], features: &[f64], label_max: f64) -> f64 {
    let x = unit_ball(features);
    clip(x.iter().zip(weights).map(|(a, b)| a * b).sum(), label_max)
}
