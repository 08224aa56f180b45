//! Noised counts and means from the Laplace mechanism, with the spend
//! each call records.

use blockdp::mechanism::NoiseSource;
use blockdp::pipelines::{dp_group_by_mean, generate_stream, SyntheticSource};

fn main() -> blockdp::Result<()> {
    let mut noise = NoiseSource::new(42, "example");
    let true_count = 1234.0;
    for eps in [0.1, 1.0, 10.0] {
        let noised = true_count + noise.laplace(1.0, eps)?;
        println!("count at eps={eps:<4}: {noised:.2}");
    }

    let records = generate_stream(&SyntheticSource::grouped(1, vec![0.2, 0.5, 0.8], 0.05), 3000)?;
    let means = dp_group_by_mean(&records, 3, 0.5, 1.0, &mut noise)?;
    for (k, m) in means.iter().enumerate() {
        println!("key {k}: mean {}", m.map_or("absent".into(), |m| format!("{m:.4}")));
    }
    println!("audited spend: {:.2} over {} calls", noise.audited_epsilon(), noise.calls().len());
    Ok(())
}
