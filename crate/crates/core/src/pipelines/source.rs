use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{open_unit, substream, StreamRng};

/// One stream record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: f64,
    pub key: u32,
    pub arrival_index: u64,
}

/// How labels are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelModel {
    /// `label = features . weights + N(0, noise_std)`, clipped to `[0, label_max]`.
    Linear { weights: Vec<f64>, noise_std: f64 },
    /// `label = group_means[key] + N(0, noise_std)`, clipped to `[0, label_max]`.
    Grouped { group_means: Vec<f64>, noise_std: f64 },
    /// `label = 1` with probability `majority_rate`, else 0.
    Binary { majority_rate: f64 },
}

/// Deterministic synthetic stream specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub seed: u64,
    /// Number of features. Each feature is uniform on `[0, 1/sqrt(dim)]`, so
    /// every feature vector lies in the unit ball.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Keys are uniform on `[0, nkeys)`; grouped sources take it from the table.
    #[serde(default = "default_nkeys")]
    pub nkeys: u32,
    #[serde(default = "default_label_max")]
    pub label_max: f64,
    pub labels: LabelModel,
}

fn default_dim() -> usize {
    1
}

fn default_nkeys() -> u32 {
    1
}

fn default_label_max() -> f64 {
    1.0
}

impl SyntheticSource {
    pub fn linear(seed: u64, weights: Vec<f64>, noise_std: f64) -> Self {
        SyntheticSource {
            seed,
            dim: weights.len(),
            nkeys: 1,
            label_max: 1.0,
            labels: LabelModel::Linear { weights, noise_std },
        }
    }

    pub fn grouped(seed: u64, group_means: Vec<f64>, noise_std: f64) -> Self {
        SyntheticSource {
            seed,
            dim: 1,
            nkeys: group_means.len() as u32,
            label_max: 1.0,
            labels: LabelModel::Grouped { group_means, noise_std },
        }
    }

    pub fn binary(seed: u64, majority_rate: f64) -> Self {
        SyntheticSource {
            seed,
            dim: 1,
            nkeys: 1,
            label_max: 1.0,
            labels: LabelModel::Binary { majority_rate },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("source needs at least one feature"));
        }
        if self.nkeys == 0 {
            return Err(invalid("source needs at least one key"));
        }
        if !(self.label_max > 0.0) {
            return Err(invalid("label_max must be > 0"));
        }
        match &self.labels {
            LabelModel::Linear { weights, noise_std } => {
                if weights.len() != self.dim {
                    return Err(invalid(format!("{} weights for dim {}", weights.len(), self.dim)));
                }
                if !(*noise_std >= 0.0) {
                    return Err(invalid("noise_std must be >= 0"));
                }
            }
            LabelModel::Grouped { group_means, noise_std } => {
                if group_means.len() != self.nkeys as usize {
                    return Err(invalid(format!("{} group means for {} keys", group_means.len(), self.nkeys)));
                }
                if !(*noise_std >= 0.0) {
                    return Err(invalid("noise_std must be >= 0"));
                }
            }
            LabelModel::Binary { majority_rate } => {
                if !(0.0..=1.0).contains(majority_rate) {
                    return Err(invalid("majority_rate must be in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Endless record stream for this source.
    pub fn stream(&self) -> Result<RecordStream> {
        self.validate()?;
        Ok(RecordStream {
            source: self.clone(),
            rng: substream(self.seed, "source"),
            next_index: 0,
        })
    }
}

/// Sequential generator; the `i`-th record only depends on the seed.
#[derive(Debug, Clone)]
pub struct RecordStream {
    source: SyntheticSource,
    rng: StreamRng,
    next_index: u64,
}

impl RecordStream {
    pub fn next_record(&mut self) -> Record {
        let src = &self.source;
        let side = 1.0 / (src.dim as f64).sqrt();
        let features: Vec<f64> = (0..src.dim).map(|_| open_unit(&mut self.rng) * side).collect();
        let key = self.rng.random_range(0..src.nkeys);
        let label = match &src.labels {
            LabelModel::Linear { weights, noise_std } => {
                let clean: f64 = features.iter().zip(weights).map(|(x, w)| x * w).sum();
                (clean + gaussian(&mut self.rng, *noise_std)).clamp(0.0, src.label_max)
            }
            LabelModel::Grouped { group_means, noise_std } => {
                (group_means[key as usize] + gaussian(&mut self.rng, *noise_std)).clamp(0.0, src.label_max)
            }
            LabelModel::Binary { majority_rate } => {
                if open_unit(&mut self.rng) < *majority_rate {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let r = Record {
            features,
            label,
            key,
            arrival_index: self.next_index,
        };
        self.next_index += 1;
        r
    }

    pub fn take_records(&mut self, n: usize) -> Vec<Record> {
        (0..n).map(|_| self.next_record()).collect()
    }
}

fn gaussian(rng: &mut StreamRng, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("std validated").sample(rng)
}

/// First `n` records of `source`.
pub fn generate_stream(source: &SyntheticSource, n: usize) -> Result<Vec<Record>> {
    Ok(source.stream()?.take_records(n))
}
