//! Command-line front end. The binary only forwards to [`run`].
//!
//! Exit codes: 0 ACCEPT or success, 1 RETRY, 3 REJECT, 2 usage, input or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adaptive::{Scheduler, SchedulerConfig};
use crate::compose::Accountant;
use crate::config::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::ledger::BlockLedger;
use crate::mechanism::NoiseSource;
use crate::privacy::PrivacyParams;
use crate::simulator::{generate_workload, rows_to_csv, run_schedule, seed_average, SimConfig, SweepRow, WorkloadConfig};
use crate::validators::{self, Metric, Minimizer, SampleStats, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RETRY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "blockdp", version, about = "Block-level DP accounting, validation and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compose a list of spends under all three accountants.
    Accountant(AccountantArgs),
    /// Check a model against a target, from a file of per-record values.
    Validate(ValidateArgs),
    /// Run the strategy sweep of a config and write results.csv and events.jsonl.
    Simulate(SimulateArgs),
    /// Run privacy-adaptive training over a synthetic stream.
    Adapt(AdaptArgs),
    /// Replay a ledger log and print the stream-level audit.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct AccountantArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Strong-composition slack; defaults to the config's or 1e-6.
    #[arg(long)]
    delta_tilde: Option<f64>,
    /// Global epsilon for the adaptive bound; defaults to the config's or 1.
    #[arg(long)]
    eps_g: Option<f64>,
    /// Spends as `eps`, `eps:delta`, `Nxeps` or `Nxeps:delta`.
    spends: Vec<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Test-split values, one per line.
    samples: PathBuf,
    /// Training-split values of the loss minimizer, enabling REJECT.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Mark the --train values as coming from an approximate minimizer.
    #[arg(long)]
    approximate: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Zero all noise. The output is not differentially private.
    #[arg(long, hide = true)]
    noise_off: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the sweep's seeds by `seed, seed+1, ...` (same count).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true)]
    noise_off: bool,
}

#[derive(Args, Debug)]
struct AdaptArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long)]
    log: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let res = match cli.command {
        Command::Accountant(a) => cmd_accountant(&a, out),
        Command::Validate(a) => cmd_validate(&a, out, err),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Adapt(a) => cmd_adapt(&a, out),
        Command::Audit(a) => cmd_audit(&a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn write_err(e: std::io::Error) -> Error {
    Error::Config(format!("write failed: {e}"))
}

/// Parses `eps`, `eps:delta`, `Nxeps` or `Nxeps:delta`.
pub fn parse_spend(s: &str) -> Result<Vec<PrivacyParams>> {
    let (count, rest) = match s.split_once('x') {
        Some((n, rest)) => (
            n.parse::<usize>().map_err(|_| invalid(format!("bad repeat count in {s:?}")))?,
            rest,
        ),
        None => (1, s),
    };
    let (e, d) = rest.split_once(':').unwrap_or((rest, "0"));
    let epsilon: f64 = e.parse().map_err(|_| invalid(format!("bad epsilon in {s:?}")))?;
    let delta: f64 = d.parse().map_err(|_| invalid(format!("bad delta in {s:?}")))?;
    let p = PrivacyParams { epsilon, delta };
    p.validate_request()?;
    Ok(vec![p; count])
}

fn cmd_accountant(a: &AccountantArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = match &a.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let delta_tilde = a
        .delta_tilde
        .or(cfg.as_ref().map(|c| c.global.delta_tilde))
        .unwrap_or(1e-6);
    let eps_g = a.eps_g.or(cfg.as_ref().map(|c| c.global.eps_g)).unwrap_or(1.0);
    let mut spends = Vec::new();
    for s in &a.spends {
        spends.extend(parse_spend(s)?);
    }
    writeln!(out, "{:<16} {:<24} delta", "accountant", "epsilon").map_err(write_err)?;
    for acc in Accountant::all() {
        // Nothing spent is exactly (0, 0); the strong bounds carry slack terms even then.
        let c = if spends.is_empty() {
            acc.compose(&spends, eps_g, delta_tilde)?;
            PrivacyParams { epsilon: 0.0, delta: 0.0 }
        } else {
            acc.compose(&spends, eps_g, delta_tilde)?
        };
        writeln!(out, "{:<16} {:<24} {}", acc.name(), c.epsilon, c.delta).map_err(write_err)?;
    }
    Ok(EXIT_OK)
}

/// Reads one number per line; blank lines and `#` comments are skipped.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{}:{}: not a number: {l:?}", path.display(), i + 1)))
        })
        .collect()
}

fn sample_stats(values: &[f64], metric: Metric, range_b: f64) -> Result<SampleStats> {
    if metric == Metric::Accuracy {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(invalid("accuracy samples must be 0 or 1"));
        }
        return Ok(SampleStats::from_values(values, 1.0));
    }
    Ok(SampleStats::from_values(values, range_b))
}

fn check_noise_off_allowed() -> Result<()> {
    if cfg!(debug_assertions) {
        Ok(())
    } else {
        Err(invalid("--noise-off is only available in debug and test builds"))
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Accept => EXIT_OK,
        Verdict::Retry => EXIT_RETRY,
        Verdict::Reject => EXIT_REJECT,
    }
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let vcfg = RunConfig::require(&cfg.validator, "validator")?;
    let test = sample_stats(&read_values(&a.samples)?, vcfg.metric, vcfg.range_b)?;
    let train = match &a.train {
        Some(p) => Some(sample_stats(&read_values(p)?, vcfg.metric, vcfg.range_b)?),
        None => None,
    };
    let kind = if a.approximate { Minimizer::Approximate } else { Minimizer::Exact };
    let mut noise = if a.noise_off {
        check_noise_off_allowed()?;
        writeln!(err, "warning: --noise-off output is not differentially private").map_err(write_err)?;
        NoiseSource::noise_off()
    } else {
        NoiseSource::new(a.seed.unwrap_or(cfg.seed), "validate")
    };
    let outcome = validators::validate(vcfg, &test, train.as_ref().map(|t| (t, kind)), &mut noise)?;
    writeln!(out, "{}", outcome.to_json_line()).map_err(write_err)?;
    Ok(verdict_code(outcome.verdict))
}

fn sweep_seeds(base: &[u64], seed: Option<u64>) -> Vec<u64> {
    match seed {
        Some(s) => (0..base.len().max(1) as u64).map(|i| s + i).collect(),
        None => base.to_vec(),
    }
}

#[derive(serde::Serialize)]
struct CellEvent<'a> {
    event: &'static str,
    strategy: &'a str,
    rate: f64,
    seed: u64,
    pipelines: usize,
    released: usize,
    censored: usize,
    max_epsilon: f64,
    max_delta: f64,
    exhausted_at: Option<u64>,
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    if a.noise_off {
        check_noise_off_allowed()?;
        return Err(invalid("--noise-off is not allowed for simulations"));
    }
    let cfg = RunConfig::load(&a.config)?;
    let sim: SimConfig = RunConfig::require(&cfg.simulation, "simulation")?.clone();
    let sweep = RunConfig::require(&cfg.sweep, "sweep")?;
    let dir = a
        .out
        .clone()
        .or(cfg.output.as_ref().map(|o| o.dir.clone()))
        .ok_or_else(|| Error::Config("no output directory (--out or [output] dir)".into()))?;
    let seeds = sweep_seeds(&sweep.seeds, a.seed);
    let (eps_g, delta_g) = (cfg.global.eps_g, cfg.global.delta_g);

    let mut rows = Vec::new();
    let mut events = String::new();
    for &rate in &sweep.rates {
        if !(rate > 0.0) {
            return Err(invalid("arrival rates must be positive"));
        }
        for &seed in &seeds {
            let cell = SimConfig {
                workload: WorkloadConfig {
                    seed,
                    ..sim.workload.with_rate(rate)
                },
                ..sim.clone()
            };
            let schedule = generate_workload(&cell)?;
            for &st in &sweep.strategies {
                let r = run_schedule(&cell, &schedule, st, eps_g, delta_g)?;
                let ev = CellEvent {
                    event: "cell",
                    strategy: st.name(),
                    rate,
                    seed,
                    pipelines: r.pipelines.len(),
                    released: r.pipelines.iter().filter(|p| p.release.is_some()).count(),
                    censored: r.censored,
                    max_epsilon: r.max_spend.epsilon,
                    max_delta: r.max_spend.delta,
                    exhausted_at: r.exhausted_at,
                };
                events.push_str(&serde_json::to_string(&ev).expect("events serialize"));
                events.push('\n');
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
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let table = dir.join("results.csv");
    fs::write(&table, rows_to_csv(&rows)?).map_err(|e| io_err(&table, e))?;
    let log = dir.join("events.jsonl");
    fs::write(&log, events).map_err(|e| io_err(&log, e))?;

    writeln!(out, "{:<22} {:>8} {:>10} {:>14}", "strategy", "rate", "released", "mean_release").map_err(write_err)?;
    for &rate in &sweep.rates {
        for &st in &sweep.strategies {
            let (frac, mean) = seed_average(&rows, st, rate);
            let mean = mean.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
            writeln!(out, "{:<22} {:>8} {:>10.3} {:>14}", st.name(), rate, frac, mean).map_err(write_err)?;
        }
    }
    writeln!(out, "wrote {} and {}", table.display(), log.display()).map_err(write_err)?;
    Ok(EXIT_OK)
}

fn cmd_adapt(a: &AdaptArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let run = RunConfig::require(&cfg.adaptive, "adaptive")?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let source = crate::pipelines::SyntheticSource {
        seed,
        ..run.source.clone()
    };
    let scfg = SchedulerConfig {
        policy: run.policy,
        seed,
        nkeys: source.nkeys as usize,
        label_max: source.label_max,
        keep_records: run.pipelines.iter().any(|p| p.pipeline.spec.trainer.needs_records()),
        ..SchedulerConfig::default()
    };
    let mut s = Scheduler::new(cfg.global, scfg)?;
    for p in &run.pipelines {
        s.submit(p.pipeline.clone(), p.arrival)?;
    }
    let mut stream = source.stream()?;
    let report = s.run(&mut stream, run.records_per_step, run.horizon)?;
    let audit = s.ledger().audit_stream_guarantee()?;
    if let Some(dir) = a.out.clone().or(cfg.output.as_ref().map(|o| o.dir.clone())) {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        for (name, body) in [
            ("report.jsonl", report.to_json_lines()),
            ("events.jsonl", s.events_jsonl()),
            ("ledger.jsonl", s.ledger().export_log()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        }
    }
    write!(out, "{}", report.to_json_lines()).map_err(write_err)?;
    writeln!(
        out,
        "max block spend epsilon={} delta={} over {} blocks",
        audit.max_spend.epsilon, audit.max_spend.delta, audit.n_blocks
    )
    .map_err(write_err)?;
    Ok(EXIT_OK)
}

fn cmd_audit(a: &AuditArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&a.log).map_err(|e| io_err(&a.log, e))?;
    let ledger = BlockLedger::replay(&text)?;
    let audit = ledger.audit_stream_guarantee()?;
    writeln!(out, "{}", serde_json::to_string(&audit).expect("audit serializes")).map_err(write_err)?;
    Ok(EXIT_OK)
}
