//! Released fraction and release time of each strategy as load grows.

use blockdp::simulator::{seed_average, sweep, SimConfig, Strategy};

fn main() -> blockdp::Result<()> {
    let mut cfg = SimConfig::default();
    cfg.workload.records_per_step = 1000;
    cfg.workload.horizon = 600;
    let rates = [0.02, 0.05, 0.1];
    let rows = sweep(&cfg, &Strategy::all(), &rates, &[0, 1], 1.0, 1e-6)?;

    println!("{:<22} {:>6} {:>9} {:>9}", "strategy", "rate", "released", "mean");
    for st in Strategy::all() {
        for rate in rates {
            let (frac, mean) = seed_average(&rows, st, rate);
            let mean = mean.map_or("-".into(), |m| format!("{m:.1}"));
            println!("{:<22} {rate:>6} {frac:>9.2} {mean:>9}", st.name());
        }
    }
    Ok(())
}
