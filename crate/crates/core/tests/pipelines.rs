use std::collections::HashMap;

use blockdp::mechanism::NoiseSource;
use blockdp::pipelines::{dp_group_by_mean, dp_linreg, dp_scalar_stat, generate_stream, Field, LinregClip, Record, SyntheticSource};
use proptest::prelude::*;

fn brute_force_means(recs: &[(u32, f64)], nkeys: usize, range: f64) -> Vec<Option<f64>> {
    let mut groups: HashMap<u32, Vec<f64>> = HashMap::new();
    for &(k, v) in recs {
        groups.entry(k).or_default().push(v.clamp(0.0, range));
    }
    (0..nkeys as u32)
        .map(|k| groups.get(&k).map(|vs| vs.iter().sum::<f64>() / vs.len() as f64))
        .collect()
}

fn to_records(recs: &[(u32, f64)]) -> Vec<Record> {
    recs.iter()
        .enumerate()
        .map(|(i, &(key, label))| Record {
            features: vec![0.0],
            label,
            key,
            arrival_index: i as u64,
        })
        .collect()
}

proptest! {
    #[test]
    fn group_by_matches_brute_force(recs in prop::collection::vec((0u32..24, -10.0f64..110.0), 0..1000)) {
        let mut noise = NoiseSource::noise_off();
        let got = dp_group_by_mean(&to_records(&recs), 24, 1.0, 100.0, &mut noise).unwrap();
        let want = brute_force_means(&recs, 24, 100.0);
        for (g, w) in got.iter().zip(&want) {
            match (g, w) {
                (None, None) => {}
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0)),
                _ => prop_assert!(false, "presence mismatch {:?} vs {:?}", g, w),
            }
        }
    }
}

fn test_mse(w: &[f64], recs: &[Record]) -> f64 {
    recs.iter()
        .map(|r| {
            let e = r.label - blockdp::pipelines::trainers::predict_linear(w, &r.features, 1.0);
            e * e
        })
        .sum::<f64>()
        / recs.len() as f64
}

#[test]
fn linreg_noised_mse_close_to_noise_off() {
    // signal variance 0.8^2/12 over noise variance gives SNR 10
    let sigma = (0.64f64 / 12.0 / 10.0).sqrt();
    for seed in 0..20 {
        let recs = generate_stream(&SyntheticSource::linear(seed, vec![0.8], sigma), 110_000).unwrap();
        let (train, test) = recs.split_at(100_000);
        let mut off = NoiseSource::noise_off();
        let base = dp_linreg(train, 1.0, LinregClip::default(), 0.1, &mut off).unwrap();
        let mut on = NoiseSource::new(seed, "linreg");
        let dp = dp_linreg(train, 1.0, LinregClip::default(), 0.1, &mut on).unwrap();
        let (m0, m1) = (test_mse(&base.parameters, test), test_mse(&dp.parameters, test));
        assert!(m1 <= 1.1 * m0, "seed {seed}: {m1} vs {m0}");
        assert!((on.audited_epsilon() - 1.0).abs() < 1e-12);
    }
}

fn scalar_mae(n: usize, eps: f64) -> f64 {
    let recs = generate_stream(&SyntheticSource::grouped(99, vec![0.4], 0.2), n).unwrap();
    let truth = recs.iter().map(|r| r.label).sum::<f64>() / n as f64;
    (0..50)
        .map(|s| {
            let mut noise = NoiseSource::new(s, &format!("mae/{n}/{eps}"));
            let (m, _) = dp_scalar_stat(&recs, Field::Label, eps, 1.0, &mut noise).unwrap();
            (m - truth).abs()
        })
        .sum::<f64>()
        / 50.0
}

fn linreg_mae(n: usize, eps: f64) -> f64 {
    let recs = generate_stream(&SyntheticSource::linear(98, vec![0.8], 0.05), n).unwrap();
    (0..50)
        .map(|s| {
            let mut noise = NoiseSource::new(s, &format!("lin/{n}/{eps}"));
            let m = dp_linreg(&recs, eps, LinregClip::default(), 0.1, &mut noise).unwrap();
            (m.parameters[0] - 0.8).abs()
        })
        .sum::<f64>()
        / 50.0
}

#[test]
fn quality_improves_with_data_and_budget() {
    for (n, eps) in [(500, 0.5), (2000, 1.0)] {
        let base = scalar_mae(n, eps);
        assert!(scalar_mae(2 * n, eps) <= base);
        assert!(scalar_mae(n, 2.0 * eps) <= base);
        let base = linreg_mae(n, eps);
        assert!(linreg_mae(2 * n, eps) <= base);
        assert!(linreg_mae(n, 2.0 * eps) <= base);
    }
}
