//! The Laplace mechanism and the noise sources that feed it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{open_unit, substream, StreamRng};

/// Inverse CDF of Laplace(0, `scale`) at `u` in `(0, 1)`.
pub fn laplace_inverse_cdf(scale: f64, u: f64) -> f64 {
    let c = u - 0.5;
    if c == 0.0 {
        return 0.0;
    }
    -scale * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// One draw from Laplace(0, `scale`), consuming exactly one uniform from `rng`.
pub fn laplace_sample(scale: f64, rng: &mut StreamRng) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("laplace scale must be > 0, got {scale}")));
    }
    Ok(laplace_inverse_cdf(scale, open_unit(rng)))
}

/// Log-density of Laplace(`center`, `scale`) at `x`.
pub fn laplace_log_density(x: f64, center: f64, scale: f64) -> f64 {
    -(x - center).abs() / scale - (2.0 * scale).ln()
}

/// A Laplace sampler with a fixed scale and its own seeded stream.
#[derive(Debug, Clone)]
pub struct LaplaceNoise {
    scale: f64,
    seed: u64,
    rng: StreamRng,
}

impl LaplaceNoise {
    pub fn new(scale: f64, seed: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("laplace scale must be > 0, got {scale}")));
        }
        Ok(LaplaceNoise {
            scale,
            seed,
            rng: substream(seed, "laplace"),
        })
    }

    /// Noise calibrated to `sensitivity / epsilon`.
    pub fn calibrated(sensitivity: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0) || !(sensitivity > 0.0) {
            return Err(invalid("sensitivity and epsilon must be > 0"));
        }
        Self::new(sensitivity / epsilon, seed)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&mut self) -> f64 {
        laplace_inverse_cdf(self.scale, open_unit(&mut self.rng))
    }
}

/// Whether mechanisms actually add noise. `Off` is only for golden-value
/// tests; ledger-facing entry points refuse it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    On,
    Off,
}

/// One invocation of the Laplace mechanism, as seen by the audit hook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismCall {
    pub sensitivity: f64,
    pub scale: f64,
}

impl MechanismCall {
    /// The pure-DP epsilon this invocation costs.
    pub fn epsilon(&self) -> f64 {
        self.sensitivity / self.scale
    }
}

/// Owned generator plus audit trail for every mechanism invocation made
/// through it.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: StreamRng,
    mode: NoiseMode,
    calls: Vec<MechanismCall>,
}

impl NoiseSource {
    pub fn new(seed: u64, stream: &str) -> Self {
        Self::from_rng(substream(seed, stream))
    }

    pub fn from_rng(rng: StreamRng) -> Self {
        NoiseSource {
            rng,
            mode: NoiseMode::On,
            calls: Vec::new(),
        }
    }

    /// A source whose mechanisms return exactly zero noise.
    pub fn noise_off() -> Self {
        NoiseSource {
            rng: substream(0, "noise-off"),
            mode: NoiseMode::Off,
            calls: Vec::new(),
        }
    }

    pub fn with_mode(seed: u64, stream: &str, mode: NoiseMode) -> Self {
        let mut src = Self::new(seed, stream);
        src.mode = mode;
        src
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn is_noise_off(&self) -> bool {
        self.mode == NoiseMode::Off
    }

    /// Laplace noise for a query of the given sensitivity released at `epsilon`.
    pub fn laplace(&mut self, sensitivity: f64, epsilon: f64) -> Result<f64> {
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid(format!("sensitivity must be > 0, got {sensitivity}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
        }
        let scale = sensitivity / epsilon;
        self.calls.push(MechanismCall { sensitivity, scale });
        match self.mode {
            NoiseMode::On => laplace_sample(scale, &mut self.rng),
            NoiseMode::Off => Ok(0.0),
        }
    }

    /// `n` independent noises of the same calibration, e.g. one per group key.
    /// Counted as a single invocation: the keys partition the data.
    pub fn laplace_vec(&mut self, sensitivity: f64, epsilon: f64, n: usize) -> Result<Vec<f64>> {
        let first = self.laplace(sensitivity, epsilon)?;
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Ok(out);
        }
        out.push(first);
        let scale = sensitivity / epsilon;
        for _ in 1..n {
            out.push(match self.mode {
                NoiseMode::On => laplace_sample(scale, &mut self.rng)?,
                NoiseMode::Off => 0.0,
            });
        }
        Ok(out)
    }

    pub fn calls(&self) -> &[MechanismCall] {
        &self.calls
    }

    /// Sum of `sensitivity / scale` over recorded invocations.
    pub fn audited_epsilon(&self) -> f64 {
        self.calls.iter().map(MechanismCall::epsilon).sum()
    }

    pub fn clear_audit(&mut self) -> Vec<MechanismCall> {
        std::mem::take(&mut self.calls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_maps_to_zero() {
        assert_eq!(laplace_inverse_cdf(1.0, 0.5), 0.0);
        assert_eq!(laplace_inverse_cdf(2.0, 0.5), 0.0);
    }

    #[test]
    fn rejects_bad_scale() {
        let mut rng = substream(0, "x");
        assert!(laplace_sample(0.0, &mut rng).is_err());
        assert!(laplace_sample(-1.0, &mut rng).is_err());
        assert!(LaplaceNoise::new(0.0, 1).is_err());
    }

    #[test]
    fn mean_absolute_deviation_matches_scale() {
        // E|X| = b for Laplace(0, b).
        let mut rng = substream(42, "mad");
        let n = 1_000_000;
        let mad: f64 = (0..n)
            .map(|_| laplace_sample(1.0, &mut rng).unwrap().abs())
            .sum::<f64>()
            / n as f64;
        assert!((mad - 1.0).abs() < 0.01, "mad = {mad}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = LaplaceNoise::new(3.0, 11).unwrap();
        let mut b = LaplaceNoise::new(3.0, 11).unwrap();
        for _ in 0..100 {
            assert_eq!(a.sample().to_bits(), b.sample().to_bits());
        }
    }

    #[test]
    fn log_density_ratio_bounded_by_epsilon() {
        for &(s, eps) in &[(1.0, 0.5), (2.0, 1.0), (100.0, 0.1)] {
            let b = s / eps;
            for i in -400..=400 {
                let x = i as f64 * b / 40.0;
                for &shift in &[s, -s, s / 3.0] {
                    let r = laplace_log_density(x, 0.0, b) - laplace_log_density(x, shift, b);
                    assert!(r.abs() <= eps + 1e-12);
                }
            }
        }
    }

    #[test]
    fn noise_off_returns_zero_but_audits() {
        let mut src = NoiseSource::noise_off();
        assert_eq!(src.laplace(1.0, 0.5).unwrap(), 0.0);
        assert_eq!(src.laplace(2.0, 0.5).unwrap(), 0.0);
        assert!((src.audited_epsilon() - 1.0).abs() < 1e-12);
    }
}
