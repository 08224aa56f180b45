//! Block-level access control over a partitioned data stream.
//!
//! The stream is cut into blocks of records. Every DP computation names the
//! blocks it reads and the `(epsilon, delta)` it will spend; a request is
//! granted only if, for every named block, the block's spends extended by
//! the request still compose to within the global `(eps_g, delta_g)` under
//! the configured accountant. The privacy loss of the whole stream is then
//! the maximum over blocks, not the sum over queries.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::compose::{Accountant, SpendSummary};
use crate::error::{invalid, Error, Result};
use crate::privacy::PrivacyParams;

pub type BlockId = u64;

/// Absolute slack on epsilon comparisons, so that e.g. one hundred spends of
/// 0.01 exactly exhaust a budget of 1.
pub const EPSILON_TOLERANCE: f64 = 1e-9;

/// Relative slack on delta comparisons.
const DELTA_REL_TOLERANCE: f64 = 1e-9;

/// Bisection tolerance for strong-accountant headroom.
const HEADROOM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub created_at: u64,
    pub record_range: Range<u64>,
    pub spends: Vec<PrivacyParams>,
    pub retired: bool,
    #[serde(skip)]
    summary: SpendSummary,
}

impl Block {
    pub fn n_records(&self) -> u64 {
        self.record_range.end - self.record_range.start
    }

    pub fn summary(&self) -> &SpendSummary {
        &self.summary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    pub eps_g: f64,
    pub delta_g: f64,
    #[serde(default)]
    pub accountant: Accountant,
    /// Strong-composition slack, reserved out of `delta_g` up front.
    #[serde(default = "default_delta_tilde")]
    pub delta_tilde: f64,
    /// Blocks whose epsilon headroom falls to this value or below are retired.
    #[serde(default)]
    pub retire_floor: f64,
}

fn default_delta_tilde() -> f64 {
    1e-7
}

impl LedgerConfig {
    pub fn basic(eps_g: f64, delta_g: f64) -> Self {
        LedgerConfig {
            eps_g,
            delta_g,
            accountant: Accountant::Basic,
            delta_tilde: default_delta_tilde(),
            retire_floor: 0.0,
        }
    }

    pub fn strong(accountant: Accountant, eps_g: f64, delta_g: f64, delta_tilde: f64) -> Self {
        LedgerConfig {
            eps_g,
            delta_g,
            accountant,
            delta_tilde,
            retire_floor: 0.0,
        }
    }

    pub fn global(&self) -> PrivacyParams {
        PrivacyParams {
            epsilon: self.eps_g,
            delta: self.delta_g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_g > 0.0 && self.eps_g.is_finite()) {
            return Err(invalid(format!("eps_g must be > 0, got {}", self.eps_g)));
        }
        if !(self.delta_g >= 0.0 && self.delta_g < 1.0) {
            return Err(invalid(format!("delta_g must be in [0, 1), got {}", self.delta_g)));
        }
        if self.accountant.uses_delta_tilde() {
            if !(self.delta_tilde > 0.0 && self.delta_tilde < 1.0) {
                return Err(invalid(format!("delta_tilde must be in (0, 1), got {}", self.delta_tilde)));
            }
            if self.delta_tilde > self.delta_g {
                return Err(invalid(format!(
                    "delta_tilde {} exceeds delta_g {}",
                    self.delta_tilde, self.delta_g
                )));
            }
        }
        if !(self.retire_floor >= 0.0) {
            return Err(invalid("retire_floor must be >= 0"));
        }
        Ok(())
    }

    fn delta_fits(&self, delta: f64) -> bool {
        delta <= self.delta_g * (1.0 + DELTA_REL_TOLERANCE) + f64::MIN_POSITIVE
    }

    fn composed(&self, summary: &SpendSummary) -> PrivacyParams {
        self.accountant.evaluate(summary, self.eps_g, self.delta_tilde)
    }

    fn fits(&self, summary: &SpendSummary) -> bool {
        let c = self.composed(summary);
        c.epsilon <= self.eps_g + EPSILON_TOLERANCE && self.delta_fits(c.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub block_ids: BTreeSet<BlockId>,
    pub params: PrivacyParams,
    pub requester: String,
}

impl AccessRequest {
    pub fn new(block_ids: impl IntoIterator<Item = BlockId>, params: PrivacyParams, requester: impl Into<String>) -> Self {
        AccessRequest {
            block_ids: block_ids.into_iter().collect(),
            params,
            requester: requester.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grant {
    pub block_ids: Vec<BlockId>,
    pub params: PrivacyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenialReason {
    Retired,
    BudgetExceeded,
}

impl std::fmt::Display for DenialReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenialReason::Retired => "retired",
            DenialReason::BudgetExceeded => "budget-exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denial {
    pub reason: DenialReason,
    /// Blocks that caused the denial.
    pub limiting: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Grant(Grant),
    Denial(Denial),
}

impl Decision {
    pub fn is_grant(&self) -> bool {
        matches!(self, Decision::Grant(_))
    }
}

/// One state-changing ledger event. Serialized one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum LedgerEvent {
    Config {
        config: LedgerConfig,
    },
    Append {
        block: BlockId,
        records: u64,
        time: u64,
    },
    Grant {
        blocks: Vec<BlockId>,
        epsilon: f64,
        delta: f64,
        requester: String,
        time: u64,
    },
    Retire {
        blocks: Vec<BlockId>,
        time: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n_blocks: usize,
    /// Largest composed spend over all blocks, per component.
    pub max_spend: PrivacyParams,
    /// Block attaining the epsilon maximum, if any block exists.
    pub max_block: Option<BlockId>,
    pub global: PrivacyParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLedger {
    config: LedgerConfig,
    blocks: Vec<Block>,
    next_record: u64,
    now: u64,
    log: Vec<LedgerEvent>,
}

impl BlockLedger {
    pub fn new(config: LedgerConfig) -> Result<Self> {
        config.validate()?;
        Ok(BlockLedger {
            config,
            blocks: Vec::new(),
            next_record: 0,
            now: 0,
            log: vec![LedgerEvent::Config { config }],
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> Result<&Block> {
        self.blocks
            .get(id as usize)
            .ok_or_else(|| invalid(format!("unknown block {id}")))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Moves the logical clock forward; it never goes back.
    pub fn set_time(&mut self, now: u64) {
        self.now = self.now.max(now);
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.log
    }

    /// Adds a block holding the next `n_records` records of the stream.
    pub fn append_block(&mut self, n_records: u64, now: u64) -> Result<BlockId> {
        if n_records == 0 {
            return Err(invalid("a block needs at least one record"));
        }
        self.set_time(now);
        let id = self.blocks.len() as BlockId;
        let start = self.next_record;
        self.next_record += n_records;
        self.blocks.push(Block {
            id,
            created_at: self.now,
            record_range: start..self.next_record,
            spends: Vec::new(),
            retired: false,
            summary: SpendSummary::default(),
        });
        self.log.push(LedgerEvent::Append {
            block: id,
            records: n_records,
            time: self.now,
        });
        Ok(id)
    }

    /// Atomic check-and-deduct. All named blocks are charged or none is.
    pub fn request_access(&mut self, req: &AccessRequest) -> Result<Decision> {
        req.params.validate_request()?;
        if req.block_ids.is_empty() {
            return Err(invalid("access request names no blocks"));
        }
        for &id in &req.block_ids {
            self.block(id)?;
        }
        let retired: Vec<BlockId> = req
            .block_ids
            .iter()
            .copied()
            .filter(|&id| self.blocks[id as usize].retired)
            .collect();
        if !retired.is_empty() {
            return Ok(Decision::Denial(Denial {
                reason: DenialReason::Retired,
                limiting: retired,
            }));
        }
        let over: Vec<BlockId> = req
            .block_ids
            .iter()
            .copied()
            .filter(|&id| !self.config.fits(&self.blocks[id as usize].summary.with(req.params)))
            .collect();
        if !over.is_empty() {
            return Ok(Decision::Denial(Denial {
                reason: DenialReason::BudgetExceeded,
                limiting: over,
            }));
        }
        let ids: Vec<BlockId> = req.block_ids.iter().copied().collect();
        for &id in &ids {
            let b = &mut self.blocks[id as usize];
            b.spends.push(req.params);
            b.summary.push(req.params);
        }
        self.log.push(LedgerEvent::Grant {
            blocks: ids.clone(),
            epsilon: req.params.epsilon,
            delta: req.params.delta,
            requester: req.requester.clone(),
            time: self.now,
        });
        Ok(Decision::Grant(Grant {
            block_ids: ids,
            params: req.params,
        }))
    }

    /// Composed spend of one block under the ledger's accountant.
    pub fn composed_spend(&self, id: BlockId) -> Result<PrivacyParams> {
        Ok(self.config.composed(&self.block(id)?.summary))
    }

    /// Largest single spend the block can still absorb.
    ///
    /// Basic accounting subtracts; strong accountants bisect on the appended
    /// epsilon, with delta set to the remaining delta slack.
    pub fn block_headroom(&self, id: BlockId) -> Result<PrivacyParams> {
        let block = self.block(id)?;
        Ok(self.headroom_of(&block.summary))
    }

    fn headroom_of(&self, summary: &SpendSummary) -> PrivacyParams {
        let cfg = &self.config;
        match cfg.accountant {
            Accountant::Basic => PrivacyParams {
                epsilon: (cfg.eps_g - summary.sum_epsilon).max(0.0),
                delta: (cfg.delta_g - summary.sum_delta).max(0.0),
            },
            Accountant::StrongFixed | Accountant::StrongAdaptive => {
                let delta = (cfg.delta_g - cfg.delta_tilde - summary.sum_delta).max(0.0);
                let feasible = |e: f64| {
                    let c = cfg.composed(&summary.with(PrivacyParams { epsilon: e, delta }));
                    c.epsilon <= cfg.eps_g
                };
                if !feasible(0.0) {
                    return PrivacyParams { epsilon: 0.0, delta };
                }
                let mut lo = 0.0;
                let mut hi = cfg.eps_g;
                let mut guard = 0;
                while feasible(hi) && guard < 64 {
                    lo = hi;
                    hi *= 2.0;
                    guard += 1;
                }
                while hi - lo > HEADROOM_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                PrivacyParams { epsilon: lo, delta }
            }
        }
    }

    fn exhausted(&self, block: &Block) -> bool {
        let head = self.headroom_of(&block.summary);
        let eps_out = head.epsilon <= self.config.retire_floor + EPSILON_TOLERANCE;
        let delta_out = block.summary.sum_delta > 0.0 && head.delta <= 0.0;
        eps_out || delta_out
    }

    /// Retires every live block that has run out of budget. Idempotent.
    pub fn retire_exhausted(&mut self) -> Vec<BlockId> {
        let ids: Vec<BlockId> = self
            .blocks
            .iter()
            .filter(|b| !b.retired && self.exhausted(b))
            .map(|b| b.id)
            .collect();
        self.retire_blocks(ids.clone());
        ids
    }

    fn retire_blocks(&mut self, ids: Vec<BlockId>) {
        if ids.is_empty() {
            return;
        }
        for &id in &ids {
            self.blocks[id as usize].retired = true;
        }
        self.log.push(LedgerEvent::Retire {
            blocks: ids,
            time: self.now,
        });
    }

    /// Stream-level guarantee: the maximum composed spend over blocks, which
    /// must lie within the global budget.
    pub fn audit_stream_guarantee(&self) -> Result<AuditReport> {
        let mut max_spend = PrivacyParams::ZERO;
        let mut max_block = None;
        for b in &self.blocks {
            let c = self.config.composed(&b.summary);
            if b.summary.count == 0 {
                continue;
            }
            if max_block.is_none() || c.epsilon > max_spend.epsilon {
                max_spend.epsilon = c.epsilon;
                max_block = Some(b.id);
            }
            max_spend.delta = max_spend.delta.max(c.delta);
        }
        let report = AuditReport {
            n_blocks: self.blocks.len(),
            max_spend,
            max_block,
            global: self.config.global(),
        };
        if max_spend.epsilon > self.config.eps_g + EPSILON_TOLERANCE || !self.config.delta_fits(max_spend.delta) {
            return Err(Error::IntegrityFailure(format!(
                "block {:?} composed spend {} exceeds global {}",
                max_block,
                max_spend,
                self.config.global()
            )));
        }
        Ok(report)
    }

    /// The event log, one JSON object per line.
    pub fn export_log(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            let line = serde_json::to_string(e).expect("ledger events serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Rebuilds a ledger by replaying an exported log. Every grant is
    /// re-checked, so a tampered log fails instead of producing an
    /// over-budget state.
    pub fn replay(log: &str) -> Result<Self> {
        let mut ledger: Option<BlockLedger> = None;
        for (i, raw) in log.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::LogParse { line: i + 1, message };
            let event: LedgerEvent = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            match (event, ledger.as_mut()) {
                (LedgerEvent::Config { config }, None) => ledger = Some(BlockLedger::new(config)?),
                (LedgerEvent::Config { .. }, Some(_)) => return Err(parse_err("duplicate config event".into())),
                (_, None) => return Err(parse_err("log must start with a config event".into())),
                (LedgerEvent::Append { block, records, time }, Some(l)) => {
                    let id = l.append_block(records, time)?;
                    if id != block {
                        return Err(parse_err(format!("expected block {id}, log says {block}")));
                    }
                }
                (
                    LedgerEvent::Grant {
                        blocks,
                        epsilon,
                        delta,
                        requester,
                        time,
                    },
                    Some(l),
                ) => {
                    l.set_time(time);
                    let req = AccessRequest::new(blocks, PrivacyParams { epsilon, delta }, requester);
                    if !l.request_access(&req)?.is_grant() {
                        return Err(parse_err("logged grant is not admissible on replay".into()));
                    }
                }
                (LedgerEvent::Retire { blocks, time }, Some(l)) => {
                    l.set_time(time);
                    for &id in &blocks {
                        l.block(id)?;
                    }
                    l.retire_blocks(blocks);
                }
            }
        }
        ledger.ok_or_else(|| Error::LogParse {
            line: 0,
            message: "empty log".into(),
        })
    }
}

/// A ledger shared between threads. Mutations take the write lock, so every
/// grant is serialized; readers see a consistent snapshot.
#[derive(Debug, Clone)]
pub struct SharedLedger {
    inner: Arc<RwLock<BlockLedger>>,
}

impl SharedLedger {
    pub fn new(ledger: BlockLedger) -> Self {
        SharedLedger {
            inner: Arc::new(RwLock::new(ledger)),
        }
    }

    pub fn append_block(&self, n_records: u64, now: u64) -> Result<BlockId> {
        self.inner.write().append_block(n_records, now)
    }

    pub fn request_access(&self, req: &AccessRequest) -> Result<Decision> {
        self.inner.write().request_access(req)
    }

    pub fn retire_exhausted(&self) -> Vec<BlockId> {
        self.inner.write().retire_exhausted()
    }

    pub fn block_headroom(&self, id: BlockId) -> Result<PrivacyParams> {
        self.inner.read().block_headroom(id)
    }

    pub fn audit_stream_guarantee(&self) -> Result<AuditReport> {
        self.inner.read().audit_stream_guarantee()
    }

    pub fn snapshot(&self) -> BlockLedger {
        self.inner.read().clone()
    }
}
