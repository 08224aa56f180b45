//! Workload generation and comparison of accounting strategies on a shared
//! arrival schedule.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Gamma, Pareto};
use serde::{Deserialize, Serialize};

use crate::adaptive::{AllocationPolicy, PipelineConfig, Scheduler, SchedulerConfig, Status};
use crate::error::{invalid, Error, Result};
use crate::ledger::{AccessRequest, BlockLedger, Decision, LedgerConfig};
use crate::mechanism::NoiseSource;
use crate::pipelines::{run_attempt, BlockData, LabelModel, PipelineSpec, SyntheticSource, TrainerKind};
use crate::privacy::PrivacyParams;
use crate::rng::substream;
use crate::validators::{self, SampleStats, ValidatorConfig, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub trainer: TrainerKind,
    pub target: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn default_rps() -> usize {
    16_000
}
fn default_shape() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    2.0
}
fn default_exponent() -> f64 {
    1.5
}
fn default_min_complexity() -> f64 {
    10_000.0
}
fn default_horizon() -> u64 {
    2_000
}
fn default_complexity_eps() -> f64 {
    0.25
}

/// Default catalog: a scalar mean and grouped means under squared error,
/// each at a ladder of targets.
pub fn default_catalog() -> Vec<CatalogEntry> {
    let scalar = [0.1, 0.05, 0.03, 0.02, 0.01, 0.007, 0.005].map(|target| CatalogEntry {
        trainer: TrainerKind::ScalarStat,
        target,
        weight: 1.0,
    });
    let grouped = [0.03, 0.02, 0.015, 0.0125, 0.0115, 0.011].map(|target| CatalogEntry {
        trainer: TrainerKind::GroupMeans,
        target,
        weight: 1.0,
    });
    scalar.into_iter().chain(grouped).collect()
}

/// Arrival and complexity process. None of the defaults come from measured
/// workloads; they are picked to span underloaded to overloaded regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default = "default_rps")]
    pub records_per_step: usize,
    /// Pipeline inter-arrival times in steps are Gamma(shape, scale).
    #[serde(default = "default_shape")]
    pub gamma_shape: f64,
    #[serde(default = "default_scale")]
    pub gamma_scale: f64,
    /// Sample complexities are Pareto with this tail index.
    #[serde(default = "default_exponent")]
    pub powerlaw_exponent: f64,
    #[serde(default = "default_min_complexity")]
    pub min_complexity: f64,
    #[serde(default = "default_catalog")]
    pub catalog: Vec<CatalogEntry>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    /// Epsilon at which catalog entries' required sample sizes are computed.
    #[serde(default = "default_complexity_eps")]
    pub complexity_epsilon: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            records_per_step: default_rps(),
            gamma_shape: default_shape(),
            gamma_scale: default_scale(),
            powerlaw_exponent: default_exponent(),
            min_complexity: default_min_complexity(),
            catalog: default_catalog(),
            horizon: default_horizon(),
            seed: 0,
            complexity_epsilon: default_complexity_eps(),
        }
    }
}

impl WorkloadConfig {
    pub fn arrival_rate(&self) -> f64 {
        1.0 / (self.gamma_shape * self.gamma_scale)
    }

    /// Same process with mean arrival rate `rate` per step.
    pub fn with_rate(&self, rate: f64) -> Self {
        WorkloadConfig {
            gamma_scale: 1.0 / (self.gamma_shape * rate),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_shape", self.gamma_shape),
            ("gamma_scale", self.gamma_scale),
            ("powerlaw_exponent", self.powerlaw_exponent),
            ("min_complexity", self.min_complexity),
            ("complexity_epsilon", self.complexity_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.records_per_step == 0 || self.horizon == 0 {
            return Err(invalid("records_per_step and horizon must be positive"));
        }
        if self.catalog.is_empty() {
            return Err(invalid("pipeline catalog is empty"));
        }
        for e in &self.catalog {
            if !(e.weight > 0.0 && e.target > 0.0) {
                return Err(invalid("catalog weights and targets must be positive"));
            }
            if e.trainer.needs_records() {
                return Err(invalid("the simulator runs aggregate trainers only"));
            }
        }
        Ok(())
    }
}

fn default_eps0() -> f64 {
    0.05
}
fn default_eta() -> f64 {
    0.05
}
fn default_window() -> usize {
    1
}
fn default_attempts() -> u32 {
    20
}

/// Settings shared by every simulated pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDefaults {
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_window")]
    pub min_window: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

impl Default for PipelineDefaults {
    fn default() -> Self {
        PipelineDefaults {
            eps0: default_eps0(),
            delta0: 0.0,
            eta: default_eta(),
            min_window: default_window(),
            max_attempts: default_attempts(),
        }
    }
}

fn default_source() -> SyntheticSource {
    SyntheticSource::grouped(0, vec![0.2, 0.4, 0.6, 0.8], 0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default = "default_source")]
    pub source: SyntheticSource,
    #[serde(default)]
    pub pipeline: PipelineDefaults,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            workload: WorkloadConfig::default(),
            source: default_source(),
            pipeline: PipelineDefaults::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        self.source.validate()?;
        if self.source.label_max != 1.0 {
            return Err(invalid("simulated sources must have label_max = 1"));
        }
        for e in &self.workload.catalog {
            self.spec_for(e)?.validate()?;
            if e.trainer == TrainerKind::Majority && !matches!(self.source.labels, LabelModel::Binary { .. }) {
                return Err(invalid("majority pipelines need a binary source"));
            }
            if e.trainer == TrainerKind::GroupMeans && !matches!(self.source.labels, LabelModel::Grouped { .. }) {
                return Err(invalid("group-means pipelines need a grouped source"));
            }
        }
        PrivacyParams {
            epsilon: self.pipeline.eps0,
            delta: self.pipeline.delta0,
        }
        .validate_request()
    }

    fn spec_for(&self, e: &CatalogEntry) -> Result<PipelineSpec> {
        let v = ValidatorConfig::new(e.trainer.metric(), e.target, self.pipeline.eta, 1.0, 1.0)?;
        Ok(PipelineSpec::new(e.trainer, v))
    }

    fn pipeline_config(&self, e: &CatalogEntry) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            spec: self.spec_for(e)?,
            min_window: self.pipeline.min_window,
            eps0: self.pipeline.eps0,
            delta0: self.pipeline.delta0,
            max_attempts: self.pipeline.max_attempts,
            timeout_steps: None,
        })
    }
}

const MAX_REQUIRED: f64 = 1e10;

/// Smallest stream size (train plus test records) at which the noise-free
/// ACCEPT inequality of `entry` holds at attempt budget `epsilon`, or
/// `None` if no size up to 1e10 suffices.
pub fn required_records(entry: &CatalogEntry, eta: f64, epsilon: f64, source: &SyntheticSource) -> Result<Option<f64>> {
    let test_share = 1.0 / crate::pipelines::TEST_EVERY as f64;
    let spec = PipelineSpec::new(
        entry.trainer,
        ValidatorConfig::new(entry.trainer.metric(), entry.target, eta, 1.0, epsilon)?,
    );
    let v_eps = epsilon * (1.0 - spec.train_share);
    let passes = |total: f64| -> Result<bool> {
        let n_test = total * test_share;
        let n_train = total - n_test;
        let mut off = NoiseSource::noise_off();
        let verdict = match (entry.trainer, &source.labels) {
            (TrainerKind::ScalarStat, _) => {
                let cfg = spec.validator.with_epsilon(epsilon);
                validators::sum_stat_bound(n_train, &cfg).is_some_and(|b| b <= cfg.target)
            }
            (TrainerKind::GroupMeans, LabelModel::Grouped { noise_std, .. }) => {
                let v = noise_std * noise_std;
                let stats = SampleStats {
                    n: n_test,
                    sum: n_test * v,
                    sum_sq: 3.0 * n_test * v * v,
                };
                let cfg = spec.validator.with_epsilon(v_eps);
                validators::loss_accept(&stats, &cfg, &mut off)?.verdict == Verdict::Accept
            }
            (TrainerKind::Majority, LabelModel::Binary { majority_rate }) => {
                let p = majority_rate.max(1.0 - majority_rate);
                let stats = SampleStats {
                    n: n_test,
                    sum: n_test * p,
                    sum_sq: n_test * p,
                };
                let cfg = spec.validator.with_epsilon(v_eps);
                validators::accuracy_accept(&stats, &cfg, &mut off)?.verdict == Verdict::Accept
            }
            _ => return Err(invalid("catalog entry does not match the source")),
        };
        Ok(verdict)
    };
    if !passes(MAX_REQUIRED)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, MAX_REQUIRED);
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// One scheduled pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub step: u64,
    pub complexity: f64,
    pub entry: usize,
    /// Required records of the chosen entry at the complexity epsilon.
    pub required: f64,
}

/// Catalog entry whose required size is nearest `complexity` in log space;
/// the heavier weight wins a tie.
fn nearest_entry(required: &[f64], catalog: &[CatalogEntry], complexity: f64) -> Option<usize> {
    (0..catalog.len()).filter(|&i| required[i].is_finite()).min_by(|&a, &b| {
        let da = (required[a].ln() - complexity.ln()).abs();
        let db = (required[b].ln() - complexity.ln()).abs();
        da.total_cmp(&db).then(catalog[b].weight.total_cmp(&catalog[a].weight))
    })
}

/// Deterministic arrival schedule: Gamma inter-arrival times and Pareto
/// sample complexities, each mapped to the nearest catalog entry.
pub fn generate_workload(cfg: &SimConfig) -> Result<Vec<Arrival>> {
    cfg.validate()?;
    let w = &cfg.workload;
    let required: Vec<f64> = w
        .catalog
        .iter()
        .map(|e| {
            required_records(e, cfg.pipeline.eta, w.complexity_epsilon, &cfg.source)
                .map(|r| r.unwrap_or(f64::INFINITY))
        })
        .collect::<Result<_>>()?;
    let gamma = Gamma::new(w.gamma_shape, w.gamma_scale).map_err(|e| invalid(e.to_string()))?;
    let pareto = Pareto::new(w.min_complexity, w.powerlaw_exponent).map_err(|e| invalid(e.to_string()))?;
    let mut rng = substream(w.seed, "workload");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gamma.sample(&mut rng);
        if t >= w.horizon as f64 {
            break;
        }
        let complexity = pareto.sample(&mut rng);
        let entry = nearest_entry(&required, &w.catalog, complexity)
            .ok_or_else(|| Error::Config("no catalog entry is attainable".into()))?;
        out.push(Arrival {
            step: t as u64,
            complexity,
            entry,
            required: required[entry],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    QueryComposition,
    StreamingComposition,
    BlockAggressive,
    BlockConserve,
}

impl Strategy {
    pub fn all() -> [Strategy; 4] {
        [
            Strategy::QueryComposition,
            Strategy::StreamingComposition,
            Strategy::BlockAggressive,
            Strategy::BlockConserve,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::QueryComposition => "query_composition",
            Strategy::StreamingComposition => "streaming_composition",
            Strategy::BlockAggressive => "block_aggressive",
            Strategy::BlockConserve => "block_conserve",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::all()
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub arrival: u64,
    pub release: Option<u64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub strategy: Strategy,
    pub pipelines: Vec<PipelineOutcome>,
    pub released_fraction: f64,
    /// Mean over released pipelines only.
    pub mean_release_steps: Option<f64>,
    /// Pipelines still running at the horizon.
    pub censored: usize,
    /// Largest audited spend of any accounting unit (block, the global
    /// budget, or a record).
    pub max_spend: PrivacyParams,
    /// First step at which the global budget could no longer fund a first
    /// attempt (query composition only).
    pub exhausted_at: Option<u64>,
}

impl SimResult {
    fn from_outcomes(strategy: Strategy, pipelines: Vec<PipelineOutcome>, max_spend: PrivacyParams, exhausted_at: Option<u64>) -> Self {
        let released: Vec<f64> = pipelines
            .iter()
            .filter_map(|p| p.release.map(|r| (r - p.arrival) as f64))
            .collect();
        let n = pipelines.len();
        SimResult {
            strategy,
            released_fraction: if n == 0 { 1.0 } else { released.len() as f64 / n as f64 },
            mean_release_steps: (!released.is_empty()).then(|| released.iter().sum::<f64>() / released.len() as f64),
            censored: pipelines.iter().filter(|p| !p.status.is_terminal()).count(),
            pipelines,
            max_spend,
            exhausted_at,
        }
    }

    /// Released fraction among pipelines arriving in `[from, to)`.
    pub fn released_fraction_between(&self, from: u64, to: u64) -> Option<f64> {
        let sel: Vec<_> = self.pipelines.iter().filter(|p| p.arrival >= from && p.arrival < to).collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|p| p.release.is_some()).count() as f64 / sel.len() as f64)
    }
}

/// Runs one strategy over the shared workload of `cfg`. The stream and the
/// pipeline noise depend only on `cfg.workload.seed`.
pub fn run_strategy(cfg: &SimConfig, strategy: Strategy, eps_g: f64, delta_g: f64) -> Result<SimResult> {
    let schedule = generate_workload(cfg)?;
    run_schedule(cfg, &schedule, strategy, eps_g, delta_g)
}

pub fn run_schedule(cfg: &SimConfig, schedule: &[Arrival], strategy: Strategy, eps_g: f64, delta_g: f64) -> Result<SimResult> {
    match strategy {
        Strategy::BlockConserve => run_block(cfg, schedule, AllocationPolicy::EvenSplitConserve, eps_g, delta_g),
        Strategy::BlockAggressive => run_block(cfg, schedule, AllocationPolicy::EvenSplitAggressive, eps_g, delta_g),
        Strategy::QueryComposition => run_query(cfg, schedule, eps_g, delta_g),
        Strategy::StreamingComposition => run_streaming(cfg, schedule, eps_g, delta_g),
    }
}

fn sim_source(cfg: &SimConfig) -> SyntheticSource {
    SyntheticSource {
        seed: cfg.workload.seed,
        ..cfg.source.clone()
    }
}

fn run_block(cfg: &SimConfig, schedule: &[Arrival], policy: AllocationPolicy, eps_g: f64, delta_g: f64) -> Result<SimResult> {
    let w = &cfg.workload;
    let scfg = SchedulerConfig {
        policy,
        seed: w.seed,
        nkeys: cfg.source.nkeys as usize,
        label_max: 1.0,
        ..SchedulerConfig::default()
    };
    let mut s = Scheduler::new(LedgerConfig::basic(eps_g, delta_g), scfg)?;
    for a in schedule {
        s.submit(cfg.pipeline_config(&w.catalog[a.entry])?, a.step)?;
    }
    let mut stream = sim_source(cfg).stream()?;
    let report = s.run(&mut stream, w.records_per_step, w.horizon)?;
    let audit = s.ledger().audit_stream_guarantee()?;
    let outcomes = report
        .pipelines
        .iter()
        .map(|p| PipelineOutcome {
            arrival: p.arrival,
            release: p.release,
            status: p.status,
        })
        .collect();
    let strategy = match policy {
        AllocationPolicy::EvenSplitConserve => Strategy::BlockConserve,
        AllocationPolicy::EvenSplitAggressive => Strategy::BlockAggressive,
    };
    Ok(SimResult::from_outcomes(strategy, outcomes, audit.max_spend, None))
}

struct Job {
    entry: usize,
    arrival: u64,
    status: Status,
    release: Option<u64>,
    eps: f64,
    next_n: f64,
    attempts: u32,
    data: BlockData,
    noise: NoiseSource,
}

impl Job {
    fn new(cfg: &SimConfig, a: &Arrival, id: usize, eps: f64, next_n: f64) -> Self {
        Job {
            entry: a.entry,
            arrival: a.step,
            status: Status::Waiting,
            release: None,
            eps,
            next_n,
            attempts: 0,
            data: BlockData::default(),
            noise: NoiseSource::new(cfg.workload.seed, &format!("pipeline/{id}")),
        }
    }

    fn outcome(&self) -> PipelineOutcome {
        PipelineOutcome {
            arrival: self.arrival,
            release: self.release,
            status: self.status,
        }
    }

    fn finish(&mut self, verdict: Verdict, step: u64, max_attempts: u32) {
        match verdict {
            Verdict::Accept => {
                self.status = Status::Accepted;
                self.release = Some(step);
            }
            Verdict::Reject => self.status = Status::Rejected,
            Verdict::Retry if self.attempts >= max_attempts => self.status = Status::TimedOut,
            Verdict::Retry => {}
        }
    }
}

/// Every attempt draws from one budget over the whole stream. Attempts use
/// all data seen so far; retries double epsilon while the global budget
/// allows, otherwise wait for twice the data.
fn run_query(cfg: &SimConfig, schedule: &[Arrival], eps_g: f64, delta_g: f64) -> Result<SimResult> {
    let w = &cfg.workload;
    let mut ledger = BlockLedger::new(LedgerConfig::basic(eps_g, delta_g))?;
    ledger.append_block(1, 0)?;
    let mut stream = sim_source(cfg).stream()?;
    let first_n = (cfg.pipeline.min_window * w.records_per_step) as f64;
    let mut jobs: Vec<Job> = Vec::new();
    let mut next = 0;
    let mut all = BlockData::default();
    let mut seen = 0.0;
    let mut exhausted_at = None;
    let nkeys = cfg.source.nkeys as usize;
    for step in 0..w.horizon {
        let recs = stream.take_records(w.records_per_step);
        seen += recs.len() as f64;
        all.merge(&BlockData::from_records(&recs, nkeys, 1.0, false)?);
        while next < schedule.len() && schedule[next].step <= step {
            jobs.push(Job::new(cfg, &schedule[next], next, cfg.pipeline.eps0, first_n));
            next += 1;
        }
        for job in jobs.iter_mut().filter(|j| !j.status.is_terminal()) {
            if seen < job.next_n {
                continue;
            }
            let params = PrivacyParams {
                epsilon: job.eps,
                delta: cfg.pipeline.delta0,
            };
            match ledger.request_access(&AccessRequest::new([0], params, "query"))? {
                Decision::Denial(_) => continue,
                Decision::Grant(_) => {}
            }
            job.attempts += 1;
            let spec = cfg.spec_for(&w.catalog[job.entry])?;
            let attempt = run_attempt(&spec, &all, job.eps, &mut job.noise)?;
            job.finish(attempt.outcome.verdict, step, cfg.pipeline.max_attempts);
            if !job.status.is_terminal() {
                if ledger.block_headroom(0)?.epsilon >= 2.0 * job.eps {
                    job.eps *= 2.0;
                } else {
                    job.next_n = 2.0 * seen;
                }
            }
        }
        if exhausted_at.is_none() && ledger.block_headroom(0)?.epsilon < cfg.pipeline.eps0 {
            exhausted_at = Some(step);
        }
    }
    while next < schedule.len() {
        jobs.push(Job::new(cfg, &schedule[next], next, cfg.pipeline.eps0, first_n));
        next += 1;
    }
    let audit = ledger.audit_stream_guarantee()?;
    Ok(SimResult::from_outcomes(
        Strategy::QueryComposition,
        jobs.iter().map(Job::outcome).collect(),
        audit.max_spend,
        exhausted_at,
    ))
}

/// Each record goes to exactly one waiting pipeline and is used by one
/// attempt at the full budget, then discarded. A pipeline first attempts
/// once it holds `min_window` steps' worth of records; a retry doubles that.
fn run_streaming(cfg: &SimConfig, schedule: &[Arrival], eps_g: f64, delta_g: f64) -> Result<SimResult> {
    let w = &cfg.workload;
    let mut stream = sim_source(cfg).stream()?;
    let nkeys = cfg.source.nkeys as usize;
    let mut jobs: Vec<Job> = Vec::new();
    let mut next = 0;
    let mut max_uses = 0u32;
    let first_n = (cfg.pipeline.min_window * w.records_per_step) as f64;
    for step in 0..w.horizon {
        let recs = stream.take_records(w.records_per_step);
        while next < schedule.len() && schedule[next].step <= step {
            jobs.push(Job::new(cfg, &schedule[next], next, eps_g, first_n));
            next += 1;
        }
        let live: Vec<usize> = (0..jobs.len()).filter(|&i| !jobs[i].status.is_terminal()).collect();
        let m = live.len();
        for (slot, &i) in live.iter().enumerate() {
            let chunk = &recs[slot * recs.len() / m..(slot + 1) * recs.len() / m];
            jobs[i].data.merge(&BlockData::from_records(chunk, nkeys, 1.0, false)?);
        }
        for &i in &live {
            let job = &mut jobs[i];
            let held = job.data.train.n() + job.data.test.n();
            if held < job.next_n {
                continue;
            }
            job.attempts += 1;
            max_uses = 1;
            let spec = cfg.spec_for(&w.catalog[job.entry])?;
            let data = std::mem::take(&mut job.data);
            let attempt = run_attempt(&spec, &data, eps_g, &mut job.noise)?;
            job.finish(attempt.outcome.verdict, step, cfg.pipeline.max_attempts);
            job.next_n *= 2.0;
        }
    }
    while next < schedule.len() {
        jobs.push(Job::new(cfg, &schedule[next], next, eps_g, f64::INFINITY));
        next += 1;
    }
    let max_spend = PrivacyParams {
        epsilon: eps_g * max_uses as f64,
        delta: if max_uses > 0 { cfg.pipeline.delta0.min(delta_g) } else { 0.0 },
    };
    Ok(SimResult::from_outcomes(
        Strategy::StreamingComposition,
        jobs.iter().map(Job::outcome).collect(),
        max_spend,
        None,
    ))
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub rate: f64,
    pub seed: u64,
    pub released_fraction: f64,
    pub mean_release_steps: Option<f64>,
}

/// Runs every (strategy, rate, seed) cell; all strategies of a (rate,
/// seed) pair share one schedule.
pub fn sweep(cfg: &SimConfig, strategies: &[Strategy], rates: &[f64], seeds: &[u64], eps_g: f64, delta_g: f64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &rate in rates {
        if !(rate > 0.0) {
            return Err(invalid("arrival rates must be positive"));
        }
        for &seed in seeds {
            let cell = SimConfig {
                workload: WorkloadConfig {
                    seed,
                    ..cfg.workload.with_rate(rate)
                },
                ..cfg.clone()
            };
            let schedule = generate_workload(&cell)?;
            for &st in strategies {
                let r = run_schedule(&cell, &schedule, st, eps_g, delta_g)?;
                rows.push(SweepRow {
                    strategy: st,
                    rate,
                    seed,
                    released_fraction: r.released_fraction,
                    mean_release_steps: r.mean_release_steps,
                });
            }
        }
    }
    Ok(rows)
}

/// Sweep rows as CSV with a header line.
pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

/// Seed-averaged metric of one strategy at one rate. Mean release time is
/// averaged over seeds that released anything.
pub fn seed_average(rows: &[SweepRow], strategy: Strategy, rate: f64) -> (f64, Option<f64>) {
    let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.strategy == strategy && r.rate == rate).collect();
    let frac = sel.iter().map(|r| r.released_fraction).sum::<f64>() / sel.len().max(1) as f64;
    let times: Vec<f64> = sel.iter().filter_map(|r| r.mean_release_steps).collect();
    let mean = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
    (frac, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validators::Metric;

    fn small() -> SimConfig {
        SimConfig {
            workload: WorkloadConfig {
                records_per_step: 1000,
                horizon: 200,
                ..WorkloadConfig::default()
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn required_records_monotone_in_target() {
        let src = default_source();
        let mut prev = 0.0;
        for e in default_catalog().iter().filter(|e| e.trainer == TrainerKind::ScalarStat) {
            let n = required_records(e, 0.05, 0.25, &src).unwrap().unwrap();
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn required_records_is_tight() {
        let src = default_source();
        let e = CatalogEntry {
            trainer: TrainerKind::ScalarStat,
            target: 0.05,
            weight: 1.0,
        };
        let n = required_records(&e, 0.05, 1.0, &src).unwrap().unwrap();
        let cfg = ValidatorConfig::new(Metric::SumStat, 0.05, 0.05, 1.0, 1.0).unwrap();
        assert!(validators::sum_stat_bound(0.9 * n, &cfg).unwrap() <= 0.05);
        assert!(validators::sum_stat_bound(0.9 * (n - 1.0), &cfg).unwrap_or(f64::INFINITY) > 0.05);
    }

    #[test]
    fn unattainable_entry_is_none() {
        let e = CatalogEntry {
            trainer: TrainerKind::GroupMeans,
            target: 0.005,
            weight: 1.0,
        };
        assert_eq!(required_records(&e, 0.05, 1.0, &default_source()).unwrap(), None);
    }

    #[test]
    fn workload_deterministic_and_bounded() {
        let cfg = small();
        let a = generate_workload(&cfg).unwrap();
        assert_eq!(a, generate_workload(&cfg).unwrap());
        assert!(a.iter().all(|x| x.complexity >= cfg.workload.min_complexity));
        assert!(a.windows(2).all(|p| p[0].step <= p[1].step));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::all() {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("block".parse::<Strategy>().is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = sweep(&small(), &[Strategy::BlockConserve], &[0.1], &[0], 1.0, 1e-6).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = rows_to_csv(&rows).unwrap();
        assert!(csv.starts_with("strategy,rate,seed,released_fraction,mean_release_steps\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
