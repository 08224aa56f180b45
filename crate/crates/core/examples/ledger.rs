//! Per-block budgets: disjoint queries each get the full budget, while
//! overlapping ones compose and are eventually denied.

use blockdp::ledger::{AccessRequest, BlockLedger, Decision, LedgerConfig};
use blockdp::PrivacyParams;

fn main() -> blockdp::Result<()> {
    let mut ledger = BlockLedger::new(LedgerConfig::basic(1.0, 1e-6))?;
    for t in 0..4 {
        ledger.append_block(1000, t)?;
    }
    let requests = [
        (0..2, 0.6, "model-a"),
        (2..4, 0.6, "model-b"),
        (1..3, 0.3, "model-c"),
        (1..3, 0.3, "model-d"),
    ];
    for (blocks, eps, who) in requests {
        let req = AccessRequest::new(blocks.clone(), PrivacyParams::pure(eps)?, who);
        match ledger.request_access(&req)? {
            Decision::Grant(_) => println!("{who}: granted eps={eps} on blocks {blocks:?}"),
            Decision::Denial(d) => println!("{who}: denied ({}) by blocks {:?}", d.reason, d.limiting),
        }
    }
    for b in ledger.blocks() {
        println!("block {}: headroom {}", b.id, ledger.block_headroom(b.id)?);
    }

    let audit = ledger.audit_stream_guarantee()?;
    println!("worst block spend {} of {}", audit.max_spend, audit.global);
    let replayed = BlockLedger::replay(&ledger.export_log())?;
    println!("replay reproduces state: {}", replayed == ledger);
    Ok(())
}
