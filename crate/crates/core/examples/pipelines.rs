//! One train-and-validate attempt per trainer on the same stream.

use blockdp::mechanism::NoiseSource;
use blockdp::pipelines::{generate_stream, run_attempt, BlockData, PipelineSpec, SyntheticSource, TrainerKind};
use blockdp::validators::{Metric, ValidatorConfig};

fn main() -> blockdp::Result<()> {
    let source = SyntheticSource::grouped(3, vec![0.2, 0.4, 0.6, 0.8], 0.1);
    let records = generate_stream(&source, 20000)?;
    let data = BlockData::from_records(&records, 4, 1.0, true)?;

    let specs = [
        ("group means", TrainerKind::GroupMeans, Metric::Loss, 0.02),
        ("mean label", TrainerKind::ScalarStat, Metric::SumStat, 0.05),
        ("ridge", TrainerKind::LinearModel { rho: 0.1 }, Metric::Loss, 0.1),
    ];
    for (i, (name, trainer, metric, target)) in specs.into_iter().enumerate() {
        let v = ValidatorConfig::new(metric, target, 0.05, 1.0, 1.0)?;
        let spec = PipelineSpec::new(trainer, v);
        let a = run_attempt(&spec, &data, 1.0, &mut NoiseSource::new(i as u64, name))?;
        let params = a.artifact.map(|art| art.parameters).unwrap_or_default();
        println!("{name:<12} {:?} bound {:?} spent {} params {params:.3?}", a.outcome.verdict, a.outcome.dp_bound, a.spent);
    }
    Ok(())
}
