//! Observational-determinism verification by signature matching.
//!
//! For each category the first completed iteration is recorded as a
//! signature: the ordered list of low-store changes `(num, id, val)` and
//! their count. Every later iteration must reproduce that list exactly; one
//! record lookup per change and one count comparison at the end decide it.
//! Because a value-changing low write always yields a new low store, this is
//! the same as comparing stutter-collapsed low-store traces.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::StepEvent;
use crate::explore::{
    explore, Category, ExplorationStats, ExploreError, ExploreOptions, Flow, Iteration,
    IterationOutcome, Visitor,
};
use crate::lang::{Program, Value, VarId};
use crate::monitor::{ChangeEvent, LowStore, LowStoreMonitor};
use crate::sigstore::{LsRecord, SigError, Signature, SignatureStore};

/// Why an iteration does not match the signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Divergence {
    /// The `observed.num`-th change differs from the stored record.
    Mismatch {
        expected: LsRecord,
        observed: ChangeEvent,
    },
    /// More changes than the signature holds.
    Excess { observed: ChangeEvent },
    /// The iteration ended after a different number of changes.
    CountMismatch { expected: u64, observed: u64 },
}

impl Divergence {
    /// Change ordinal of the divergence, or `None` for end of trace.
    pub fn position(&self) -> Option<u64> {
        match self {
            Divergence::Mismatch { observed, .. } | Divergence::Excess { observed } => {
                Some(observed.num)
            }
            Divergence::CountMismatch { .. } => None,
        }
    }
}

/// Online matcher for one iteration's change stream: one record lookup per
/// change, one count comparison at the end.
#[derive(Debug, Clone, Default)]
pub struct IterationChecker {
    lssc: u64,
    fetches: u64,
    consumed: u64,
}

impl IterationChecker {
    pub fn new() -> Self {
        Self::default()
    }

    fn fetch(&mut self, sig: &Signature, key: u64) -> Option<LsRecord> {
        self.fetches += 1;
        sig.get_record(key).copied()
    }

    pub fn on_change(&mut self, sig: &Signature, ev: &ChangeEvent) -> Result<(), Divergence> {
        self.consumed += 1;
        match self.fetch(sig, self.lssc + 1) {
            None => Err(Divergence::Excess { observed: *ev }),
            Some(rec) if rec.id == ev.id && rec.val == ev.val => {
                self.lssc += 1;
                Ok(())
            }
            Some(rec) => Err(Divergence::Mismatch {
                expected: rec,
                observed: *ev,
            }),
        }
    }

    pub fn finish(&self, sig: &Signature) -> Result<(), Divergence> {
        if self.lssc == sig.lssc {
            Ok(())
        } else {
            Err(Divergence::CountMismatch {
                expected: sig.lssc,
                observed: self.lssc,
            })
        }
    }

    /// Record lookups performed so far.
    pub fn fetches(&self) -> u64 {
        self.fetches
    }

    /// Change events handed to [`on_change`](Self::on_change) so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckReport {
    pub result: Result<(), Divergence>,
    pub fetches: u64,
    pub consumed: u64,
}

/// Checks a complete change stream against a frozen signature, stopping at
/// the first divergence.
pub fn check_iteration<'a>(
    sig: &Signature,
    changes: impl IntoIterator<Item = &'a ChangeEvent>,
) -> CheckReport {
    let mut checker = IterationChecker::new();
    let mut result = Ok(());
    for ev in changes {
        if let Err(d) = checker.on_change(sig, ev) {
            result = Err(d);
            break;
        }
    }
    if result.is_ok() {
        result = checker.finish(sig);
    }
    CheckReport {
        result,
        fetches: checker.fetches(),
        consumed: checker.consumed(),
    }
}

/// Stores one record per change (keys `1..=n`), then the count.
pub fn build_signature(
    store: &mut SignatureStore,
    changes: &[ChangeEvent],
) -> Result<Signature, SigError> {
    let mut lssc = 0;
    for c in changes {
        lssc += 1;
        store.put_record(LsRecord {
            num: lssc,
            id: c.id,
            val: c.val,
        })?;
    }
    store.set_count(lssc)?;
    store.signature()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("record {num} names variable {id}, outside the low store")]
    UnknownVariable { num: u64, id: VarId },
    #[error("record {num} does not change the low store")]
    NoChange { num: u64 },
}

/// The words `A_0..A_n` of the secure pattern `A_0+ A_1+ ... A_n+`: the
/// initial low store followed by the store after each recorded change.
pub fn reconstruct_pattern(
    sig: &Signature,
    initial: &LowStore,
) -> Result<Vec<LowStore>, PatternError> {
    let mut words = vec![initial.clone()];
    let mut cur = initial.clone();
    for r in &sig.records {
        let slot = cur
            .0
            .get_mut(r.id.index())
            .ok_or(PatternError::UnknownVariable {
                num: r.num,
                id: r.id,
            })?;
        if *slot == r.val {
            return Err(PatternError::NoChange { num: r.num });
        }
        *slot = r.val;
        words.push(cur.clone());
    }
    Ok(words)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationWitness {
    pub category: String,
    /// The iteration the signature was taken from.
    pub reference: Iteration,
    pub violating: Iteration,
    pub divergence: Divergence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategoryResult {
    Secure {
        signature: Signature,
        iterations_checked: u64,
    },
    Violation {
        witness: ViolationWitness,
    },
    /// No violation among the completed iterations, but some executions were
    /// abandoned at the depth bound. `signature` is `None` when none completed.
    SecureUpToBound {
        signature: Option<Signature>,
        iterations_checked: u64,
        abandoned: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckStats {
    #[serde(flatten)]
    pub exploration: ExplorationStats,
    /// Low-store change events handed to the checker.
    pub change_events: u64,
    /// Signature record lookups.
    pub fetches: u64,
}

impl CheckStats {
    fn absorb(&mut self, other: &CheckStats) {
        self.exploration.completed += other.exploration.completed;
        self.exploration.depth_exceeded += other.exploration.depth_exceeded;
        self.exploration.pruned += other.exploration.pruned;
        self.exploration.aborted |= other.exploration.aborted;
        self.change_events += other.change_events;
        self.fetches += other.fetches;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryReport {
    pub name: String,
    pub low_init: LowStore,
    pub result: CategoryResult,
    pub stats: CheckStats,
    pub signature_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Secure,
    Insecure,
    SecureUpToBound,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Secure => "SECURE",
            Verdict::Insecure => "INSECURE",
            Verdict::SecureUpToBound => "SECURE_UP_TO_BOUND",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityReport {
    pub verdict: Verdict,
    pub categories: Vec<CategoryReport>,
    pub stats: CheckStats,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("at least one category is required")]
    NoCategories,
    #[error("categories `{first}` and `{second}` have the same initial low store")]
    DuplicateLowInit { first: String, second: String },
    #[error("duplicate category name `{0}`")]
    DuplicateName(String),
    #[error("categories `{first}` and `{second}` map to the same signature file")]
    SignatureFileClash { first: String, second: String },
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Signature(#[from] SigError),
}

struct SmcVisitor<'a> {
    category: &'a str,
    initial: LowStore,
    monitor: LowStoreMonitor,
    store: SignatureStore,
    /// The frozen signature and the iteration it was taken from.
    signature: Option<(Signature, Iteration)>,
    pending: Vec<ChangeEvent>,
    checker: IterationChecker,
    divergence: Option<Divergence>,
    stats: CheckStats,
    iterations_checked: u64,
    abandoned: u64,
    witness: Option<ViolationWitness>,
    error: Option<SigError>,
}

impl Visitor for SmcVisitor<'_> {
    fn begin(&mut self, _ordinal: u64, _highs: &[(VarId, Value)]) {
        self.monitor = LowStoreMonitor::new(self.initial.clone());
        self.pending.clear();
        self.checker = IterationChecker::new();
        self.divergence = None;
    }

    fn event(&mut self, ev: &StepEvent) -> Flow {
        let Some(change) = self.monitor.observe(ev) else {
            return Flow::Continue;
        };
        match &self.signature {
            None => self.pending.push(change),
            Some((sig, _)) => {
                if self.divergence.is_none() {
                    self.divergence = self.checker.on_change(sig, &change).err();
                }
            }
        }
        Flow::Continue
    }

    fn end(&mut self, it: &Iteration, outcome: IterationOutcome) -> Flow {
        self.stats.change_events += self.checker.consumed();
        self.stats.fetches += self.checker.fetches();
        // Abandoned executions are never judged; their partial changes are
        // discarded along with any divergence they showed.
        if outcome == IterationOutcome::DepthExceeded {
            self.abandoned += 1;
            return Flow::Continue;
        }
        self.iterations_checked += 1;
        let Some((sig, reference)) = &self.signature else {
            match build_signature(&mut self.store, &self.pending) {
                Ok(sig) => self.signature = Some((sig, it.clone())),
                Err(e) => {
                    self.error = Some(e);
                    return Flow::Abort;
                }
            }
            return Flow::Continue;
        };
        match self.divergence.or_else(|| self.checker.finish(sig).err()) {
            None => Flow::Continue,
            Some(divergence) => {
                self.witness = Some(ViolationWitness {
                    category: self.category.to_string(),
                    reference: reference.clone(),
                    violating: it.clone(),
                    divergence,
                });
                Flow::Abort
            }
        }
    }
}

/// Verifies one category. `signature_path`, when given, receives the
/// signature file (any existing file there is replaced).
pub fn smc_category(
    program: &Program,
    category: &Category,
    opts: &ExploreOptions,
    signature_path: Option<&Path>,
) -> Result<CategoryReport, VerifyError> {
    let store = match signature_path {
        Some(p) => SignatureStore::create(p, &category.name)?,
        None => SignatureStore::in_memory(&category.name)?,
    };
    let initial = category.initial_low_store();
    let mut v = SmcVisitor {
        category: &category.name,
        monitor: LowStoreMonitor::new(initial.clone()),
        initial: initial.clone(),
        store,
        signature: None,
        pending: Vec::new(),
        checker: IterationChecker::new(),
        divergence: None,
        stats: CheckStats::default(),
        iterations_checked: 0,
        abandoned: 0,
        witness: None,
        error: None,
    };
    let exploration = explore(program, category, opts, &mut v)?;
    if let Some(e) = v.error {
        return Err(e.into());
    }
    let mut stats = v.stats;
    stats.exploration = exploration;
    let signature = v.signature.map(|(s, _)| s);
    let result = match (v.witness, v.abandoned, signature) {
        (Some(witness), _, _) => CategoryResult::Violation { witness },
        (None, 0, Some(signature)) => CategoryResult::Secure {
            signature,
            iterations_checked: v.iterations_checked,
        },
        (None, abandoned, signature) => CategoryResult::SecureUpToBound {
            signature,
            iterations_checked: v.iterations_checked,
            abandoned,
        },
    };
    Ok(CategoryReport {
        name: category.name.clone(),
        low_init: initial,
        result,
        stats,
        signature_path: signature_path.map(Path::to_path_buf),
    })
}

/// File name used for a category's signature inside a signature directory.
pub fn signature_file_name(category: &str) -> String {
    let safe: String = category
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.odsig")
}

/// Verifies every category in order, stopping at the first violation.
pub fn csmc_verify(
    program: &Program,
    categories: &[Category],
    opts: &ExploreOptions,
    signature_dir: Option<&Path>,
) -> Result<SecurityReport, VerifyError> {
    if categories.is_empty() {
        return Err(VerifyError::NoCategories);
    }
    let mut names = HashSet::new();
    let mut files = std::collections::HashMap::new();
    for (i, c) in categories.iter().enumerate() {
        if !names.insert(c.name.as_str()) {
            return Err(VerifyError::DuplicateName(c.name.clone()));
        }
        if let Some(prev) = categories[..i]
            .iter()
            .find(|p| p.initial_low_store() == c.initial_low_store())
        {
            return Err(VerifyError::DuplicateLowInit {
                first: prev.name.clone(),
                second: c.name.clone(),
            });
        }
        if let Some(first) = files.insert(signature_file_name(&c.name), c.name.clone()) {
            return Err(VerifyError::SignatureFileClash {
                first,
                second: c.name.clone(),
            });
        }
    }

    let mut reports = Vec::with_capacity(categories.len());
    let mut stats = CheckStats::default();
    for c in categories {
        let path = signature_dir.map(|d| d.join(signature_file_name(&c.name)));
        let report = smc_category(program, c, opts, path.as_deref())?;
        stats.absorb(&report.stats);
        let violated = matches!(report.result, CategoryResult::Violation { .. });
        reports.push(report);
        if violated {
            break;
        }
    }
    let verdict = if reports
        .iter()
        .any(|r| matches!(r.result, CategoryResult::Violation { .. }))
    {
        Verdict::Insecure
    } else if reports
        .iter()
        .all(|r| matches!(r.result, CategoryResult::Secure { .. }))
    {
        Verdict::Secure
    } else {
        Verdict::SecureUpToBound
    };
    Ok(SecurityReport {
        verdict,
        categories: reports,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Granularity;
    use crate::explore::replay;
    use crate::lang::parse;
    use crate::monitor::observe;
    use crate::oracle::stutter_collapse;

    const EXAMPLE: &str = "\
low l1 = 0;
low l2 = 0;
high h = 0;
thread { if (l1 == 1) { l2 := h; } else { skip; } }
thread { l1 := 1; }
thread { h := 1; }
";

    fn ce(num: u64, id: u32, val: Value) -> ChangeEvent {
        ChangeEvent {
            num,
            id: VarId(id),
            val,
        }
    }

    fn rec(num: u64, id: u32, val: Value) -> LsRecord {
        LsRecord {
            num,
            id: VarId(id),
            val,
        }
    }

    fn sig(records: Vec<LsRecord>) -> Signature {
        Signature {
            category: "s0".into(),
            lssc: records.len() as u64,
            records,
        }
    }

    fn atomic(bound: u64) -> ExploreOptions {
        ExploreOptions {
            depth_bound: bound,
            granularity: Granularity::BranchAtomic,
            fairness: None,
        }
    }

    #[test]
    fn build_signature_cases() {
        let mut s = SignatureStore::in_memory("s0").unwrap();
        assert_eq!(
            build_signature(&mut s, &[ce(1, 1, 1)]).unwrap(),
            sig(vec![rec(1, 1, 1)])
        );
        let mut s = SignatureStore::in_memory("s0").unwrap();
        assert_eq!(build_signature(&mut s, &[]).unwrap(), sig(vec![]));
        let mut s = SignatureStore::in_memory("s0").unwrap();
        assert_eq!(
            build_signature(&mut s, &[ce(1, 1, 1), ce(2, 2, 1)]).unwrap(),
            sig(vec![rec(1, 1, 1), rec(2, 2, 1)])
        );
    }

    #[test]
    fn check_iteration_cases() {
        let s = sig(vec![rec(1, 1, 1)]);
        let ok = check_iteration(&s, &[ce(1, 1, 1)]);
        assert_eq!(ok.result, Ok(()));
        assert_eq!((ok.fetches, ok.consumed), (1, 1));

        let excess = check_iteration(&s, &[ce(1, 1, 1), ce(2, 2, 1)]);
        assert_eq!(
            excess.result,
            Err(Divergence::Excess {
                observed: ce(2, 2, 1)
            })
        );
        assert_eq!(excess.result.unwrap_err().position(), Some(2));
        assert_eq!(excess.fetches, 2);

        let short = check_iteration(&s, &[]);
        assert_eq!(
            short.result,
            Err(Divergence::CountMismatch {
                expected: 1,
                observed: 0
            })
        );
        assert_eq!(short.fetches, 0);

        let mismatch = check_iteration(&s, &[ce(1, 2, 1), ce(2, 1, 1)]);
        assert_eq!(
            mismatch.result,
            Err(Divergence::Mismatch {
                expected: rec(1, 1, 1),
                observed: ce(1, 2, 1)
            })
        );
        assert_eq!((mismatch.fetches, mismatch.consumed), (1, 1));
    }

    #[test]
    fn pattern_reconstruction() {
        let init = LowStore(vec![0, 0]);
        let words = reconstruct_pattern(&sig(vec![rec(1, 1, 1)]), &init).unwrap();
        assert_eq!(words, vec![LowStore(vec![0, 0]), LowStore(vec![1, 0])]);
        assert_eq!(
            reconstruct_pattern(&sig(vec![]), &init).unwrap(),
            vec![init.clone()]
        );
        let words = reconstruct_pattern(&sig(vec![rec(1, 1, 1), rec(2, 2, 1)]), &init).unwrap();
        assert_eq!(words.last(), Some(&LowStore(vec![1, 1])));
        assert_eq!(
            reconstruct_pattern(&sig(vec![rec(1, 1, 0)]), &init),
            Err(PatternError::NoChange { num: 1 })
        );
        assert_eq!(
            reconstruct_pattern(&sig(vec![rec(1, 3, 1)]), &init),
            Err(PatternError::UnknownVariable {
                num: 1,
                id: VarId(3)
            })
        );
    }

    #[test]
    fn example_is_insecure_with_replayable_witness() {
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "s0");
        let report = smc_category(&p, &cat, &atomic(100), None).unwrap();
        let CategoryResult::Violation { witness } = &report.result else {
            panic!("expected violation, got {:?}", report.result)
        };
        assert_eq!(witness.reference.schedule, vec![0, 1, 2]);
        assert_eq!(witness.violating.schedule, vec![1, 2, 0]);
        assert_eq!(
            witness.divergence,
            Divergence::Excess {
                observed: ce(2, 2, 1)
            }
        );
        let collapsed = |it: &Iteration| {
            let mut evs = Vec::new();
            replay(&p, &cat, it, Granularity::BranchAtomic, |e| evs.push(*e)).unwrap();
            stutter_collapse(&observe(&evs, cat.initial_low_store()).1).to_string()
        };
        assert_eq!(collapsed(&witness.reference), "(0, 0) (1, 0)");
        assert_eq!(collapsed(&witness.violating), "(0, 0) (1, 0) (1, 1)");
    }

    #[test]
    fn single_assignment_is_secure() {
        let p = parse("low l = 0; thread { l := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let r = smc_category(&p, &cat, &ExploreOptions::default(), None).unwrap();
        assert_eq!(
            r.result,
            CategoryResult::Secure {
                signature: Signature {
                    category: "c".into(),
                    records: vec![rec(1, 1, 1)],
                    lssc: 1
                },
                iterations_checked: 1
            }
        );
    }

    #[test]
    fn high_assignment_leak_is_a_count_mismatch() {
        let p = parse("low l = 0; high h = 0; thread { l := h; }").unwrap();
        let cat = Category::new(
            &p,
            "c",
            &[(VarId(1), 0)].into(),
            &[(VarId(2), vec![0, 1])].into(),
        )
        .unwrap();
        let r = smc_category(&p, &cat, &ExploreOptions::default(), None).unwrap();
        let CategoryResult::Violation { witness } = r.result else {
            panic!()
        };
        assert_eq!(witness.reference.highs, vec![(VarId(2), 0)]);
        assert_eq!(witness.violating.highs, vec![(VarId(2), 1)]);
        assert_eq!(
            witness.divergence,
            Divergence::Excess {
                observed: ce(1, 1, 1)
            }
        );

        // Reversed domain order: the reference has one change, the other none.
        let cat = Category::new(
            &p,
            "c",
            &[(VarId(1), 0)].into(),
            &[(VarId(2), vec![1, 0])].into(),
        )
        .unwrap();
        let r = smc_category(&p, &cat, &ExploreOptions::default(), None).unwrap();
        let CategoryResult::Violation { witness } = r.result else {
            panic!()
        };
        assert_eq!(
            witness.divergence,
            Divergence::CountMismatch {
                expected: 1,
                observed: 0
            }
        );
        assert_eq!(witness.divergence.position(), None);
    }

    #[test]
    fn csmc_verdicts() {
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "s0");
        let r = csmc_verify(&p, &[cat], &atomic(100), None).unwrap();
        assert_eq!(r.verdict, Verdict::Insecure);

        let p = parse("high h = 0; thread { h := 1; }").unwrap();
        let r = csmc_verify(&p, &[Category::from_program(&p, "c")], &atomic(100), None).unwrap();
        assert_eq!(r.verdict, Verdict::Secure);

        let p =
            parse("low l1 = 0; high h = 0; thread { l1 := 1; } thread { h := h + 1; }").unwrap();
        let cat = Category::new(
            &p,
            "c",
            &[(VarId(1), 0)].into(),
            &[(VarId(2), vec![0, 1])].into(),
        )
        .unwrap();
        let r = csmc_verify(&p, &[cat], &ExploreOptions::default(), None).unwrap();
        assert_eq!(r.verdict, Verdict::Secure);
        assert_eq!(r.stats.exploration.completed, 4);
    }

    #[test]
    fn categories_are_independent_and_short_circuit() {
        // Secure from l = 0 (one change each time), insecure from l = 5.
        let p = parse("low l = 0; high h = 0; thread { if (l == 5) { l := h; } else { l := 1; } }")
            .unwrap();
        let doms = [(VarId(2), vec![0, 1])].into();
        let a = Category::new(&p, "a", &[(VarId(1), 0)].into(), &doms).unwrap();
        let b = Category::new(&p, "b", &[(VarId(1), 5)].into(), &doms).unwrap();
        let c = Category::new(&p, "c", &[(VarId(1), 7)].into(), &doms).unwrap();
        let r = csmc_verify(&p, &[a.clone(), b, c], &ExploreOptions::default(), None).unwrap();
        assert_eq!(r.verdict, Verdict::Insecure);
        assert_eq!(r.categories.len(), 2);
        assert!(matches!(
            r.categories[0].result,
            CategoryResult::Secure { .. }
        ));

        let dup = Category::new(&p, "dup", &[(VarId(1), 0)].into(), &doms).unwrap();
        assert!(matches!(
            csmc_verify(&p, &[a.clone(), dup], &ExploreOptions::default(), None),
            Err(VerifyError::DuplicateLowInit { .. })
        ));
        assert!(matches!(
            csmc_verify(&p, &[], &ExploreOptions::default(), None),
            Err(VerifyError::NoCategories)
        ));
    }

    #[test]
    fn depth_bound_downgrades_verdict() {
        let p = parse("low l = 0; thread { while (1 == 1) { skip; } } thread { l := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let o = ExploreOptions {
            depth_bound: 20,
            ..Default::default()
        };
        let r = csmc_verify(&p, &[cat], &o, None).unwrap();
        assert_eq!(r.verdict, Verdict::SecureUpToBound);
        assert!(matches!(
            r.categories[0].result,
            CategoryResult::SecureUpToBound {
                signature: None,
                iterations_checked: 0,
                abandoned: 21
            }
        ));

        // Completed runs still get checked around abandoned ones.
        let p = parse("low l = 0; thread { while (l == 0) { skip; } } thread { l := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let r = csmc_verify(&p, &[cat], &o, None).unwrap();
        let CategoryResult::SecureUpToBound {
            signature: Some(sig),
            iterations_checked,
            abandoned,
        } = &r.categories[0].result
        else {
            panic!("{:?}", r.categories[0].result)
        };
        assert_eq!(sig.lssc, 1);
        assert!(*iterations_checked > 1);
        // thread 0 spinning alone, and `l := 1` taken exactly at step 20
        assert_eq!(*abandoned, 2);
    }

    #[test]
    fn signatures_are_persisted() {
        let dir = tempfile::tempdir().unwrap();
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "s 0");
        csmc_verify(&p, &[cat], &atomic(100), Some(dir.path())).unwrap();
        let path = dir.path().join("s_0.odsig");
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "ODSIG 1\ncategory s 0\nlssc 1\nrec 1 1 1\n");
        // A second run replaces the stale file instead of failing.
        let cat = Category::from_program(&p, "s 0");
        csmc_verify(&p, &[cat], &atomic(100), Some(dir.path())).unwrap();
    }

    #[test]
    fn stats_count_fetches_and_changes() {
        let p = parse("low a = 0; low b = 0; thread { a := 1; } thread { b := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let r = csmc_verify(&p, &[cat], &ExploreOptions::default(), None).unwrap();
        // [0,1] builds (a, b); [1,0] diverges at its first change.
        assert_eq!(r.verdict, Verdict::Insecure);
        assert_eq!(r.stats.change_events, 1);
        assert_eq!(r.stats.fetches, 1);
    }
}
