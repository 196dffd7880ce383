//! JSON report written by `verify` and read back by `replay`.
//!
//! Variables are referred to by name. The report embeds the canonical program
//! text and the exploration settings, so a witness can be re-executed from
//! the report alone.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use odcheck_core::exec::Granularity;
use odcheck_core::explore::Iteration;
use odcheck_core::lang::{Value, VarId};
use odcheck_core::monitor::{ChangeEvent, LowStore};
use odcheck_core::sigstore::Signature;
use odcheck_core::verify::{CategoryReport, CategoryResult, CheckStats, Divergence};
use odcheck_core::{Category, ExploreOptions, Program, SecurityReport, Verdict};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Verdict,
    pub config: Config,
    pub program: String,
    pub categories: Vec<CategoryEntry>,
    pub stats: CheckStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub granularity: Granularity,
    pub depth_bound: u64,
    pub fair: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Secure,
    Violation,
    SecureUpToBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub name: String,
    pub low_init: BTreeMap<String, Value>,
    pub result: Outcome,
    pub signature: Option<SignatureEntry>,
    pub iterations_checked: u64,
    pub abandoned: u64,
    pub witness: Option<Witness>,
    pub signature_file: Option<String>,
    pub stats: CheckStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub lssc: u64,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub num: u64,
    pub var: String,
    pub val: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub ordinal: u64,
    pub highs: BTreeMap<String, Value>,
    pub schedule: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Change(u64),
    EndOfTrace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: String,
    pub reference: IterationEntry,
    pub violating: IterationEntry,
    pub position: Position,
    pub expected: Option<Record>,
    pub observed: Option<Record>,
    pub expected_count: Option<u64>,
    pub observed_count: Option<u64>,
}

fn record(program: &Program, num: u64, id: VarId, val: Value) -> Record {
    Record {
        num,
        var: program.var_name(id),
        val,
    }
}

pub fn signature_entry(program: &Program, sig: &Signature) -> SignatureEntry {
    SignatureEntry {
        lssc: sig.lssc,
        records: sig
            .records
            .iter()
            .map(|r| record(program, r.num, r.id, r.val))
            .collect(),
    }
}

fn iteration_entry(program: &Program, it: &Iteration) -> IterationEntry {
    IterationEntry {
        ordinal: it.ordinal,
        highs: it
            .highs
            .iter()
            .map(|&(id, v)| (program.var_name(id), v))
            .collect(),
        schedule: it.schedule.clone(),
    }
}

fn low_map(program: &Program, low: &LowStore) -> BTreeMap<String, Value> {
    program
        .low_decls()
        .zip(&low.0)
        .map(|(d, &v)| (d.name.clone(), v))
        .collect()
}

pub fn divergence_fields(
    program: &Program,
    d: &Divergence,
) -> (
    String,
    Position,
    Option<Record>,
    Option<Record>,
    Option<u64>,
    Option<u64>,
) {
    let ev = |e: &ChangeEvent| record(program, e.num, e.id, e.val);
    match d {
        Divergence::Mismatch { expected, observed } => (
            "mismatch".into(),
            Position::Change(observed.num),
            Some(record(program, expected.num, expected.id, expected.val)),
            Some(ev(observed)),
            None,
            None,
        ),
        Divergence::Excess { observed } => (
            "excess".into(),
            Position::Change(observed.num),
            None,
            Some(ev(observed)),
            None,
            None,
        ),
        Divergence::CountMismatch { expected, observed } => (
            "count_mismatch".into(),
            Position::EndOfTrace,
            None,
            None,
            Some(*expected),
            Some(*observed),
        ),
    }
}

fn category_entry(program: &Program, c: &CategoryReport) -> CategoryEntry {
    let abandoned = c.stats.exploration.depth_exceeded;
    let (result, signature, iterations_checked, witness) = match &c.result {
        CategoryResult::Secure {
            signature,
            iterations_checked,
        } => (
            Outcome::Secure,
            Some(signature_entry(program, signature)),
            *iterations_checked,
            None,
        ),
        CategoryResult::SecureUpToBound {
            signature,
            iterations_checked,
            ..
        } => (
            Outcome::SecureUpToBound,
            signature.as_ref().map(|s| signature_entry(program, s)),
            *iterations_checked,
            None,
        ),
        CategoryResult::Violation { witness } => {
            let (kind, position, expected, observed, expected_count, observed_count) =
                divergence_fields(program, &witness.divergence);
            let w = Witness {
                kind,
                reference: iteration_entry(program, &witness.reference),
                violating: iteration_entry(program, &witness.violating),
                position,
                expected,
                observed,
                expected_count,
                observed_count,
            };
            (
                Outcome::Violation,
                None,
                c.stats.exploration.completed,
                Some(w),
            )
        }
    };
    CategoryEntry {
        name: c.name.clone(),
        low_init: low_map(program, &c.low_init),
        result,
        signature,
        iterations_checked,
        abandoned,
        witness,
        signature_file: c.signature_path.as_ref().map(|p| p.display().to_string()),
        stats: c.stats,
    }
}

pub fn build(program: &Program, opts: &ExploreOptions, r: &SecurityReport) -> Report {
    Report {
        verdict: r.verdict,
        config: Config {
            granularity: opts.granularity,
            depth_bound: opts.depth_bound,
            fair: opts.fairness,
        },
        program: program.render(),
        categories: r
            .categories
            .iter()
            .map(|c| category_entry(program, c))
            .collect(),
        stats: r.stats,
    }
}

/// Rebuilds the category (with singleton high domains) and iteration named
/// by a report entry.
pub fn resolve_iteration(
    program: &Program,
    entry: &CategoryEntry,
    it: &IterationEntry,
) -> Result<(Category, Iteration)> {
    let id_of = |name: &str| {
        program
            .lookup(name)
            .map(|d| d.id)
            .ok_or_else(|| anyhow!("witness refers to unknown variable `{name}`"))
    };
    let mut low = BTreeMap::new();
    for (name, &v) in &entry.low_init {
        low.insert(id_of(name)?, v);
    }
    let mut highs = Vec::new();
    let mut domains = BTreeMap::new();
    for (name, &v) in &it.highs {
        let id = id_of(name)?;
        highs.push((id, v));
        domains.insert(id, vec![v]);
    }
    highs.sort_by_key(|&(id, _)| id);
    if highs.len() != program.high_decls().count() {
        bail!("witness does not assign every high variable");
    }
    let category = Category::new(program, entry.name.clone(), &low, &domains)?;
    Ok((
        category,
        Iteration {
            highs,
            schedule: it.schedule.clone(),
            ordinal: it.ordinal,
        },
    ))
}
