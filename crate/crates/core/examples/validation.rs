//! The three-way decision on synthetic test losses, with and without the
//! corrections for the noise in the test statistics.

use blockdp::mechanism::NoiseSource;
use blockdp::validators::{validate, Metric, Minimizer, SampleStats, ValidatorConfig};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn main() -> blockdp::Result<()> {
    let mut rng = SplitMix64::seed_from_u64(5);
    let mut losses = |n: usize, mean: f64| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>() * 2.0 * mean).collect() };
    let test = SampleStats::from_values(&losses(5000, 0.04), 1.0);
    let train = SampleStats::from_values(&losses(20000, 0.04), 1.0);

    for target in [0.01, 0.035, 0.05, 0.08] {
        let cfg = ValidatorConfig::new(Metric::Loss, target, 0.05, 1.0, 1.0)?;
        let out = validate(&cfg, &test, Some((&train, Minimizer::Exact)), &mut NoiseSource::new(9, "validate"))?;
        println!("target {target}: {}", out.to_json_line());
    }
    Ok(())
}
