//! `odcheck`: observational-determinism checking for small concurrent programs.
//!
//! Exit status: 0 secure, 1 insecure, 2 error, 3 secure up to the depth bound.

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use odcheck_core::explore::{replay, IterationOutcome};
use odcheck_core::monitor::observe;
use odcheck_core::oracle::od_oracle;
use odcheck_core::sigstore::SignatureStore;
use odcheck_core::verify::{build_signature, check_iteration, CategoryResult};
use odcheck_core::{csmc_verify, parse, ExploreOptions, Granularity, Verdict};
use serde::Serialize;

use crate::report::{Outcome, Report};

#[derive(Parser)]
#[command(
    name = "odcheck",
    version,
    about = "Observational-determinism model checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a program with the signature-based verifier.
    Verify(VerifyArgs),
    /// Check a program by brute-force trace enumeration and print the trace census.
    Oracle(CommonArgs),
    /// Re-execute a witness from a verification report and print its low-store trace.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Stmt,
    BranchAtomic,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Stmt => Granularity::Stmt,
            GranularityArg::BranchAtomic => Granularity::BranchAtomic,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Program source file.
    #[arg(long)]
    program: PathBuf,
    /// Category definitions: a JSON file or inline JSON.
    #[arg(long)]
    categories: Option<String>,
    /// Maximum number of steps per execution.
    #[arg(long, default_value_t = 10_000)]
    depth_bound: u64,
    #[arg(long, value_enum, default_value = "stmt")]
    granularity: GranularityArg,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Only explore schedules where no enabled thread is passed over more than K times in a row.
    #[arg(long, value_name = "K")]
    fair: Option<u32>,
    /// Directory receiving one signature file per category.
    #[arg(long)]
    sig_dir: Option<PathBuf>,
    /// Write the JSON report here (`-` for standard output).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Violating,
    Reference,
}

#[derive(Args)]
struct ReplayArgs {
    /// Report produced by `verify --report`.
    #[arg(long)]
    report: PathBuf,
    /// Category whose witness to replay.
    #[arg(long, value_name = "CATEGORY")]
    witness: String,
    #[arg(long, value_enum, default_value = "violating")]
    iteration: Which,
    /// Check that the report was produced for this program.
    #[arg(long)]
    program: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Replay(a) => run_replay(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn verdict_code(v: Verdict) -> ExitCode {
    ExitCode::from(match v {
        Verdict::Secure => 0,
        Verdict::Insecure => 1,
        Verdict::SecureUpToBound => 3,
    })
}

fn run_verify(a: VerifyArgs) -> Result<ExitCode> {
    let program = input::load_program(&a.common.program)?;
    let categories = input::load_categories(&program, a.common.categories.as_deref())?;
    let opts = ExploreOptions {
        depth_bound: a.common.depth_bound,
        granularity: a.common.granularity.into(),
        fairness: a.fair,
    };
    if let Some(dir) = &a.sig_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let result = csmc_verify(&program, &categories, &opts, a.sig_dir.as_deref())?;
    for c in &result.categories {
        if let CategoryResult::SecureUpToBound { abandoned, .. } = c.result {
            eprintln!(
                "warning: category `{}`: {abandoned} execution(s) reached the depth bound of {} steps and were not checked",
                c.name, opts.depth_bound
            );
        }
    }
    let rep = report::build(&program, &opts, &result);
    let json = serde_json::to_string_pretty(&rep)? + "\n";
    match a.report.as_deref() {
        Some(p) if p.as_os_str() == "-" => print!("{json}"),
        other => {
            if let Some(p) = other {
                std::fs::write(p, &json)
                    .with_context(|| format!("cannot write {}", p.display()))?;
            }
            print_summary(&rep);
        }
    }
    Ok(verdict_code(rep.verdict))
}

fn print_summary(rep: &Report) {
    println!("{}", rep.verdict);
    for c in &rep.categories {
        match (&c.result, &c.witness) {
            (Outcome::Violation, Some(w)) => {
                let at = match w.position {
                    report::Position::Change(n) => format!("change {n}"),
                    report::Position::EndOfTrace => "end of trace".to_string(),
                };
                println!("category {}: violation ({} at {at})", c.name, w.kind);
                for (label, it) in [("reference", &w.reference), ("violating", &w.violating)] {
                    println!("  {label}: highs {:?} schedule {:?}", it.highs, it.schedule);
                }
            }
            (Outcome::Secure, _) => println!(
                "category {}: secure ({} iterations)",
                c.name, c.iterations_checked
            ),
            _ => println!(
                "category {}: secure up to bound ({} iterations checked, {} abandoned)",
                c.name, c.iterations_checked, c.abandoned
            ),
        }
    }
}

#[derive(Serialize)]
struct OracleOut {
    secure: bool,
    categories: Vec<OracleCat>,
}

#[derive(Serialize)]
struct OracleCat {
    name: String,
    pass: bool,
    executions: u64,
    traces: Vec<OracleTrace>,
}

#[derive(Serialize)]
struct OracleTrace {
    trace: String,
    count: u64,
}

fn run_oracle(a: CommonArgs) -> Result<ExitCode> {
    let program = input::load_program(&a.program)?;
    let categories = input::load_categories(&program, a.categories.as_deref())?;
    let r = od_oracle(&program, &categories, a.depth_bound, a.granularity.into())?;
    let out = OracleOut {
        secure: r.secure,
        categories: r
            .categories
            .into_iter()
            .map(|c| OracleCat {
                name: c.name,
                pass: c.pass,
                executions: c.executions,
                traces: c
                    .traces
                    .into_iter()
                    .map(|t| OracleTrace {
                        trace: t.trace.to_string(),
                        count: t.count,
                    })
                    .collect(),
            })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::from(if out.secure { 0 } else { 1 }))
}

fn run_replay(a: ReplayArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.report)
        .with_context(|| format!("cannot read {}", a.report.display()))?;
    let rep: Report = serde_json::from_str(&text)
        .with_context(|| format!("{}: malformed report", a.report.display()))?;
    let program = parse(&rep.program).map_err(|e| anyhow!("report program: {e}"))?;
    if let Some(path) = &a.program {
        if input::load_program(path)?.render() != rep.program {
            bail!("stale witness: the report was produced for a different program");
        }
    }
    let entry = rep
        .categories
        .iter()
        .find(|c| c.name == a.witness)
        .ok_or_else(|| anyhow!("no category `{}` in the report", a.witness))?;
    let w = entry
        .witness
        .as_ref()
        .ok_or_else(|| anyhow!("category `{}` has no witness", a.witness))?;
    let granularity = rep.config.granularity;

    let run = |it: &report::IterationEntry| -> Result<_> {
        let (cat, iteration) = report::resolve_iteration(&program, entry, it)?;
        let mut events = Vec::new();
        let outcome = replay(&program, &cat, &iteration, granularity, |e| events.push(*e))
            .map_err(|e| anyhow!("stale witness: {e}"))?;
        if outcome != IterationOutcome::Completed {
            bail!("stale witness: schedule ends before the program terminates");
        }
        Ok(observe(&events, cat.initial_low_store()))
    };
    let (ref_changes, ref_trace) = run(&w.reference)?;
    let (bad_changes, bad_trace) = run(&w.violating)?;

    let mut store = SignatureStore::in_memory(&entry.name)?;
    let sig = build_signature(&mut store, &ref_changes)?;
    let divergence = check_iteration(&sig, &bad_changes)
        .result
        .err()
        .ok_or_else(|| anyhow!("stale witness: the iterations no longer diverge"))?;
    let (kind, position, expected, observed, expected_count, observed_count) =
        report::divergence_fields(&program, &divergence);
    let recorded = (
        &w.kind,
        w.position,
        &w.expected,
        &w.observed,
        w.expected_count,
        w.observed_count,
    );
    if recorded
        != (
            &kind,
            position,
            &expected,
            &observed,
            expected_count,
            observed_count,
        )
    {
        bail!("stale witness: the replayed divergence differs from the report");
    }

    let trace = match a.iteration {
        Which::Violating => bad_trace,
        Which::Reference => ref_trace,
    };
    for s in trace.stores() {
        println!("{s}");
    }
    Ok(ExitCode::SUCCESS)
}
