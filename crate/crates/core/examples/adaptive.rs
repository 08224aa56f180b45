//! Two pipelines sharing a stream under each allocation policy.

use blockdp::adaptive::{AllocationPolicy, PipelineConfig, Scheduler, SchedulerConfig};
use blockdp::ledger::LedgerConfig;
use blockdp::pipelines::{PipelineSpec, SyntheticSource, TrainerKind};
use blockdp::validators::{Metric, ValidatorConfig};

fn main() -> blockdp::Result<()> {
    for policy in [AllocationPolicy::EvenSplitConserve, AllocationPolicy::EvenSplitAggressive] {
        let cfg = SchedulerConfig {
            policy,
            seed: 11,
            nkeys: 4,
            ..SchedulerConfig::default()
        };
        let mut s = Scheduler::new(LedgerConfig::basic(1.0, 1e-6), cfg)?;
        let means = ValidatorConfig::new(Metric::Loss, 0.02, 0.05, 1.0, 1.0)?;
        let scalar = ValidatorConfig::new(Metric::SumStat, 0.01, 0.05, 1.0, 1.0)?;
        s.submit(PipelineConfig::new(PipelineSpec::new(TrainerKind::GroupMeans, means), 0.05), 0)?;
        s.submit(PipelineConfig::new(PipelineSpec::new(TrainerKind::ScalarStat, scalar), 0.05), 5)?;

        let mut stream = SyntheticSource::grouped(11, vec![0.2, 0.4, 0.6, 0.8], 0.1).stream()?;
        s.run(&mut stream, 2000, 100)?;
        println!("{policy:?}");
        for p in s.pipelines() {
            println!(
                "  pipeline {}: {} after {} attempts, released at {:?}, spent {}",
                p.id, p.status, p.attempts, p.release_time, p.spent
            );
        }
        println!("  worst block: {}", s.ledger().audit_stream_guarantee()?.max_spend);
    }
    Ok(())
}
