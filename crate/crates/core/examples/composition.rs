//! Basic versus strong composition of many small spends.

use blockdp::compose::{basic_compose, strong_compose_adaptive, strong_compose_fixed};
use blockdp::PrivacyParams;

fn main() -> blockdp::Result<()> {
    let delta_tilde = 1e-6;
    println!("{:>5} {:>10} {:>12} {:>15}", "k", "basic", "strong_fixed", "strong_adaptive");
    for k in [10, 100, 1000, 10000] {
        let spends = vec![PrivacyParams::pure(0.01)?; k];
        let basic = basic_compose(&spends);
        let fixed = strong_compose_fixed(&spends, delta_tilde)?;
        let adaptive = strong_compose_adaptive(&spends, 10.0, delta_tilde)?;
        println!("{k:>5} {:>10.4} {:>12.4} {:>15.4}", basic.epsilon, fixed.epsilon, adaptive.epsilon);
    }
    Ok(())
}
