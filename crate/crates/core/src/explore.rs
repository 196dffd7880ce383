//! Stateless exhaustive exploration.
//!
//! Every iteration re-executes the program from its initial state. The only
//! thing carried between iterations is the stack of scheduling choices of
//! the current DFS path; backtracking bumps the deepest choice that still has
//! an untried alternative and replays the prefix from scratch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{ExecError, Granularity, Interpreter, RunOutcome, Schedule, StepEvent};
use crate::lang::{Program, SecurityLabel, Value, VarId};
use crate::monitor::LowStore;

/// One class of low-equivalent initial stores: a fixed low store and a
/// finite domain for every high variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    low_init: Vec<Value>,
    high_domains: Vec<(VarId, Vec<Value>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("category `{category}`: no initial value for low variable `{var}`")]
    MissingLow { category: String, var: String },
    #[error("category `{category}`: `{var}` is not a low variable")]
    NotLow { category: String, var: String },
    #[error("category `{category}`: `{var}` is not a high variable")]
    NotHigh { category: String, var: String },
    #[error("category `{category}`: empty domain for `{var}`")]
    EmptyDomain { category: String, var: String },
}

impl Category {
    /// `low_init` must cover every low variable. High variables without a
    /// domain range over the singleton of their declared initial value.
    pub fn new(
        program: &Program,
        name: impl Into<String>,
        low_init: &BTreeMap<VarId, Value>,
        high_domains: &BTreeMap<VarId, Vec<Value>>,
    ) -> Result<Category, CategoryError> {
        let name = name.into();
        for &id in low_init.keys() {
            if program.label_of(id) != Ok(SecurityLabel::Low) {
                return Err(CategoryError::NotLow {
                    category: name,
                    var: program.var_name(id),
                });
            }
        }
        for (&id, dom) in high_domains {
            if program.label_of(id) != Ok(SecurityLabel::High) {
                return Err(CategoryError::NotHigh {
                    category: name,
                    var: program.var_name(id),
                });
            }
            if dom.is_empty() {
                return Err(CategoryError::EmptyDomain {
                    category: name,
                    var: program.var_name(id),
                });
            }
        }
        let low = program
            .low_decls()
            .map(|d| {
                low_init
                    .get(&d.id)
                    .copied()
                    .ok_or_else(|| CategoryError::MissingLow {
                        category: name.clone(),
                        var: d.name.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut highs: Vec<(VarId, Vec<Value>)> = program
            .high_decls()
            .map(|d| {
                let dom = high_domains
                    .get(&d.id)
                    .cloned()
                    .unwrap_or_else(|| vec![d.init]);
                (d.id, dom)
            })
            .collect();
        highs.sort_by_key(|(id, _)| *id);
        Ok(Category {
            name,
            low_init: low,
            high_domains: highs,
        })
    }

    /// The single category induced by the declared initial values.
    pub fn from_program(program: &Program, name: impl Into<String>) -> Category {
        let low = program.low_decls().map(|d| (d.id, d.init)).collect();
        Category::new(program, name, &low, &BTreeMap::new())
            .expect("declared inits always form a valid category")
    }

    pub fn initial_low_store(&self) -> LowStore {
        LowStore(self.low_init.clone())
    }

    pub fn high_domains(&self) -> &[(VarId, Vec<Value>)] {
        &self.high_domains
    }

    /// All high assignments, lexicographic by variable id then domain order.
    pub fn high_assignments(&self) -> HighAssignments<'_> {
        HighAssignments {
            domains: &self.high_domains,
            cursor: Some(vec![0; self.high_domains.len()]),
        }
    }

    /// Store overrides for one iteration: the category's low values plus the
    /// chosen high values.
    pub fn overrides(&self, highs: &[(VarId, Value)]) -> Vec<(VarId, Value)> {
        self.low_init
            .iter()
            .enumerate()
            .map(|(i, &v)| (VarId(i as u32 + 1), v))
            .chain(highs.iter().copied())
            .collect()
    }
}

/// Odometer over the cross product of high domains; the last variable varies
/// fastest.
#[derive(Debug, Clone)]
pub struct HighAssignments<'c> {
    domains: &'c [(VarId, Vec<Value>)],
    cursor: Option<Vec<usize>>,
}

impl Iterator for HighAssignments<'_> {
    type Item = Vec<(VarId, Value)>;

    fn next(&mut self) -> Option<Self::Item> {
        let cur = self.cursor.as_mut()?;
        let item = self
            .domains
            .iter()
            .zip(cur.iter())
            .map(|((id, dom), &i)| (*id, dom[i]))
            .collect();
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.cursor = None;
                break;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < self.domains[pos].1.len() {
                break;
            }
            cur[pos] = 0;
        }
        Some(item)
    }
}

/// One controlled execution: a high assignment and the schedule it ran under.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Iteration {
    pub highs: Vec<(VarId, Value)>,
    pub schedule: Schedule,
    /// 1-based position in the category's enumeration order.
    pub ordinal: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationOutcome {
    Completed,
    DepthExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Abort,
}

/// Receives the event stream of every iteration.
pub trait Visitor {
    fn begin(&mut self, _ordinal: u64, _highs: &[(VarId, Value)]) {}

    fn event(&mut self, ev: &StepEvent) -> Flow;

    fn end(&mut self, it: &Iteration, outcome: IterationOutcome) -> Flow;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    pub depth_bound: u64,
    pub granularity: Granularity,
    /// Maximum number of consecutive steps an enabled thread may be passed over.
    pub fairness: Option<u32>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            depth_bound: 10_000,
            granularity: Granularity::Stmt,
            fairness: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationStats {
    pub completed: u64,
    pub depth_exceeded: u64,
    /// Scheduling choices removed by fairness pruning.
    pub pruned: u64,
    /// The visitor stopped the exploration early.
    pub aborted: bool,
}

impl ExplorationStats {
    pub fn iterations(&self) -> u64 {
        self.completed + self.depth_exceeded
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("depth bound must be at least 1")]
    ZeroDepthBound,
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("arithmetic overflow at step {step} of schedule {schedule:?}")]
    Overflow {
        highs: Vec<(VarId, Value)>,
        schedule: Schedule,
        step: usize,
    },
    #[error("schedule is infeasible at position {position}")]
    Infeasible { position: usize },
}

#[derive(Debug, Clone)]
struct Choice {
    chosen: usize,
    /// Untried alternatives, ascending.
    rest: Vec<usize>,
}

/// Enumerates every (high assignment, schedule) pair of the category, each
/// exactly once, streaming its events to `visitor`.
pub fn explore<V: Visitor + ?Sized>(
    program: &Program,
    category: &Category,
    opts: &ExploreOptions,
    visitor: &mut V,
) -> Result<ExplorationStats, ExploreError> {
    if opts.depth_bound == 0 {
        return Err(ExploreError::ZeroDepthBound);
    }
    let interp = Interpreter::new(program, opts.granularity)?;
    let mut stats = ExplorationStats::default();
    let mut ordinal = 0;
    for highs in category.high_assignments() {
        let overrides = category.overrides(&highs);
        let mut stack: Vec<Choice> = Vec::new();
        loop {
            ordinal += 1;
            visitor.begin(ordinal, &highs);
            let Some(outcome) = run_iteration(
                &interp, &overrides, &highs, opts, &mut stack, &mut stats, visitor,
            )?
            else {
                stats.aborted = true;
                return Ok(stats);
            };
            match outcome {
                IterationOutcome::Completed => stats.completed += 1,
                IterationOutcome::DepthExceeded => stats.depth_exceeded += 1,
            }
            let it = Iteration {
                highs: highs.clone(),
                schedule: stack.iter().map(|c| c.chosen).collect(),
                ordinal,
            };
            if visitor.end(&it, outcome) == Flow::Abort {
                stats.aborted = true;
                return Ok(stats);
            }
            if !backtrack(&mut stack) {
                break;
            }
        }
    }
    Ok(stats)
}

fn backtrack(stack: &mut Vec<Choice>) -> bool {
    while let Some(top) = stack.last_mut() {
        if !top.rest.is_empty() {
            top.chosen = top.rest.remove(0);
            return true;
        }
        stack.pop();
    }
    false
}

// Replays the stack prefix, then extends it greedily with the smallest
// allowed thread until the program terminates or the bound is hit. Returns
// None if the visitor aborted mid-iteration.
fn run_iteration<V: Visitor + ?Sized>(
    interp: &Interpreter<'_>,
    overrides: &[(VarId, Value)],
    highs: &[(VarId, Value)],
    opts: &ExploreOptions,
    stack: &mut Vec<Choice>,
    stats: &mut ExplorationStats,
    visitor: &mut V,
) -> Result<Option<IterationOutcome>, ExploreError> {
    let mut state = interp.initial_state(overrides)?;
    let mut starved = vec![0u32; state.thread_count()];
    let mut enabled = Vec::new();
    let mut depth = 0usize;
    loop {
        enabled.clear();
        enabled.extend(state.enabled());
        let tid = if depth < stack.len() {
            stack[depth].chosen
        } else {
            if enabled.is_empty() {
                return Ok(Some(IterationOutcome::Completed));
            }
            if depth as u64 >= opts.depth_bound {
                return Ok(Some(IterationOutcome::DepthExceeded));
            }
            let mut allowed = match opts.fairness {
                None => enabled.clone(),
                Some(k) => fair_choices(&enabled, &starved, k),
            };
            stats.pruned += (enabled.len() - allowed.len()) as u64;
            let chosen = allowed.remove(0);
            stack.push(Choice {
                chosen,
                rest: allowed,
            });
            chosen
        };
        for &u in &enabled {
            starved[u] = if u == tid { 0 } else { starved[u] + 1 };
        }
        let ev = match interp.step(&mut state, tid) {
            Ok(ev) => ev,
            Err(ExecError::Overflow(_)) => {
                return Err(ExploreError::Overflow {
                    highs: highs.to_vec(),
                    schedule: stack[..=depth].iter().map(|c| c.chosen).collect(),
                    step: depth + 1,
                })
            }
            Err(e) => return Err(e.into()),
        };
        depth += 1;
        if visitor.event(&ev) == Flow::Abort {
            return Ok(None);
        }
    }
}

// A thread may run next only if no other enabled thread would then have been
// passed over more than `k` consecutive times. When every choice breaks the
// rule, the most-starved threads are still allowed so the path can finish.
fn fair_choices(enabled: &[usize], starved: &[u32], k: u32) -> Vec<usize> {
    let allowed: Vec<usize> = enabled
        .iter()
        .copied()
        .filter(|&t| enabled.iter().all(|&u| u == t || starved[u] < k))
        .collect();
    if !allowed.is_empty() {
        return allowed;
    }
    let worst = enabled.iter().map(|&u| starved[u]).max().unwrap_or(0);
    enabled
        .iter()
        .copied()
        .filter(|&u| starved[u] == worst)
        .collect()
}

/// Re-executes one iteration, producing the same event stream `explore`
/// delivered for it.
pub fn replay(
    program: &Program,
    category: &Category,
    it: &Iteration,
    granularity: Granularity,
    sink: impl FnMut(&StepEvent),
) -> Result<IterationOutcome, ExploreError> {
    let interp = Interpreter::new(program, granularity)?;
    match interp.run_schedule(&category.overrides(&it.highs), &it.schedule, sink)? {
        RunOutcome::Completed => Ok(IterationOutcome::Completed),
        RunOutcome::Incomplete => Ok(IterationOutcome::DepthExceeded),
        RunOutcome::Infeasible { position } => Err(ExploreError::Infeasible { position }),
        RunOutcome::Overflow { position } => Err(ExploreError::Overflow {
            highs: it.highs.clone(),
            schedule: it.schedule.clone(),
            step: position,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    const EXAMPLE: &str = "\
low l1 = 0;
low l2 = 0;
high h = 0;
thread { if (l1 == 1) { l2 := h; } else { skip; } }
thread { l1 := 1; }
thread { h := 1; }
";

    /// Collects iterations and their event streams.
    #[derive(Default)]
    struct Recorder {
        events: Vec<StepEvent>,
        runs: Vec<(Iteration, IterationOutcome, Vec<StepEvent>)>,
        stop_after: Option<usize>,
    }

    impl Visitor for Recorder {
        fn begin(&mut self, _: u64, _: &[(VarId, Value)]) {
            self.events.clear();
        }
        fn event(&mut self, ev: &StepEvent) -> Flow {
            self.events.push(*ev);
            Flow::Continue
        }
        fn end(&mut self, it: &Iteration, outcome: IterationOutcome) -> Flow {
            self.runs
                .push((it.clone(), outcome, std::mem::take(&mut self.events)));
            match self.stop_after {
                Some(n) if self.runs.len() >= n => Flow::Abort,
                _ => Flow::Continue,
            }
        }
    }

    fn opts(bound: u64, granularity: Granularity) -> ExploreOptions {
        ExploreOptions {
            depth_bound: bound,
            granularity,
            fairness: None,
        }
    }

    #[test]
    fn example_has_six_schedules_in_branch_atomic_mode() {
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "s0");
        let mut rec = Recorder::default();
        let stats = explore(&p, &cat, &opts(100, Granularity::BranchAtomic), &mut rec).unwrap();
        assert_eq!(stats.completed, 6);
        let schedules: Vec<_> = rec.runs.iter().map(|r| r.0.schedule.clone()).collect();
        assert_eq!(
            schedules,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
        let ordinals: Vec<_> = rec.runs.iter().map(|r| r.0.ordinal).collect();
        assert_eq!(ordinals, (1..=6).collect::<Vec<_>>());
    }

    #[test]
    fn single_statement_program() {
        let p = parse("low l = 0; thread { l := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder::default();
        let stats = explore(&p, &cat, &ExploreOptions::default(), &mut rec).unwrap();
        assert_eq!(stats.completed, 1);
        assert_eq!(rec.runs[0].0.schedule, vec![0]);
    }

    #[test]
    fn two_by_two_interleavings() {
        let p = parse("low a = 0; thread { a := 1; a := 2; } thread { skip; skip; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder::default();
        let stats = explore(&p, &cat, &ExploreOptions::default(), &mut rec).unwrap();
        assert_eq!(stats.completed, 6);
    }

    #[test]
    fn high_assignments_are_lexicographic() {
        let p = parse("low l = 0; high a = 0; high b = 0; thread { skip; }").unwrap();
        let mut doms = BTreeMap::new();
        doms.insert(VarId(2), vec![5, 6]);
        doms.insert(VarId(3), vec![1, 0]);
        let cat = Category::new(&p, "c", &[(VarId(1), 0)].into(), &doms).unwrap();
        let all: Vec<_> = cat.high_assignments().collect();
        let v = |a, b| vec![(VarId(2), a), (VarId(3), b)];
        assert_eq!(all, vec![v(5, 1), v(5, 0), v(6, 1), v(6, 0)]);

        let p = parse("low l = 0; thread { skip; }").unwrap();
        let cat = Category::from_program(&p, "c");
        assert_eq!(cat.high_assignments().collect::<Vec<_>>(), vec![vec![]]);
    }

    #[test]
    fn category_validation() {
        let p = parse("low l = 0; high h = 0; thread { skip; }").unwrap();
        let no_low = BTreeMap::new();
        let none = BTreeMap::new();
        assert!(matches!(
            Category::new(&p, "c", &no_low, &none),
            Err(CategoryError::MissingLow { .. })
        ));
        let low: BTreeMap<_, _> = [(VarId(1), 0)].into();
        assert!(matches!(
            Category::new(&p, "c", &[(VarId(2), 0)].into(), &none),
            Err(CategoryError::NotLow { .. })
        ));
        assert!(matches!(
            Category::new(&p, "c", &low, &[(VarId(1), vec![0])].into()),
            Err(CategoryError::NotHigh { .. })
        ));
        assert!(matches!(
            Category::new(&p, "c", &low, &[(VarId(2), vec![])].into()),
            Err(CategoryError::EmptyDomain { .. })
        ));
        let cat = Category::new(&p, "c", &low, &none).unwrap();
        assert_eq!(cat.high_domains(), &[(VarId(2), vec![0])]);
    }

    #[test]
    fn depth_bound_abandons_long_runs() {
        let p = parse("low l = 0; thread { while (1 == 1) { skip; } } thread { l := 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder::default();
        let stats = explore(&p, &cat, &opts(10, Granularity::Stmt), &mut rec).unwrap();
        assert_eq!(stats.completed, 0);
        // thread 1 at any of the 10 positions, or never
        assert_eq!(stats.depth_exceeded, 11);
        assert!(rec.runs.iter().all(|r| r.2.len() == 10));
    }

    #[test]
    fn zero_bound_rejected() {
        let p = parse("low l = 0; thread { skip; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder::default();
        assert_eq!(
            explore(&p, &cat, &opts(0, Granularity::Stmt), &mut rec),
            Err(ExploreError::ZeroDepthBound)
        );
    }

    #[test]
    fn abort_stops_enumeration() {
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder {
            stop_after: Some(2),
            ..Default::default()
        };
        let stats = explore(&p, &cat, &opts(100, Granularity::BranchAtomic), &mut rec).unwrap();
        assert!(stats.aborted);
        assert_eq!(rec.runs.len(), 2);
    }

    #[test]
    fn replay_matches_explore() {
        let p = parse(EXAMPLE).unwrap();
        let mut doms = BTreeMap::new();
        doms.insert(VarId(3), vec![0, 1]);
        let cat = Category::new(&p, "c", &[(VarId(1), 0), (VarId(2), 0)].into(), &doms).unwrap();
        let mut rec = Recorder::default();
        explore(&p, &cat, &ExploreOptions::default(), &mut rec).unwrap();
        for (it, outcome, events) in &rec.runs {
            let mut replayed = Vec::new();
            let out = replay(&p, &cat, it, Granularity::Stmt, |e| replayed.push(*e)).unwrap();
            assert_eq!(out, *outcome);
            assert_eq!(&replayed, events);
        }
    }

    #[test]
    fn replay_violating_iteration_and_infeasible() {
        let p = parse(EXAMPLE).unwrap();
        let cat = Category::from_program(&p, "c");
        let it = Iteration {
            highs: vec![(VarId(3), 0)],
            schedule: vec![1, 2, 0],
            ordinal: 4,
        };
        let mut events = Vec::new();
        let out = replay(&p, &cat, &it, Granularity::BranchAtomic, |e| {
            events.push(*e)
        })
        .unwrap();
        assert_eq!(out, IterationOutcome::Completed);
        let (_, trace) = crate::monitor::observe(&events, cat.initial_low_store());
        assert_eq!(trace.last(), &LowStore(vec![1, 1]));

        let bad = Iteration {
            schedule: vec![0, 0, 0],
            ..it
        };
        assert_eq!(
            replay(&p, &cat, &bad, Granularity::BranchAtomic, |_| {}),
            Err(ExploreError::Infeasible { position: 2 })
        );
    }

    #[test]
    fn fairness_prunes_starving_schedules() {
        let p =
            parse("low a = 0; thread { skip; skip; skip; } thread { skip; skip; skip; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut all = Recorder::default();
        explore(&p, &cat, &ExploreOptions::default(), &mut all).unwrap();
        assert_eq!(all.runs.len(), 20);

        let mut fair = Recorder::default();
        let o = ExploreOptions {
            fairness: Some(1),
            ..Default::default()
        };
        let stats = explore(&p, &cat, &o, &mut fair).unwrap();
        assert!(stats.pruned > 0);
        let schedules: Vec<_> = fair.runs.iter().map(|r| r.0.schedule.clone()).collect();
        assert_eq!(
            schedules,
            vec![vec![0, 1, 0, 1, 0, 1], vec![1, 0, 1, 0, 1, 0]]
        );
    }

    #[test]
    fn fairness_falls_back_when_every_choice_starves_someone() {
        // Three threads with K = 1: after the first step two threads are
        // waiting, so at least one must exceed the bound.
        let p = parse("low a = 0; thread { skip; } thread { skip; } thread { skip; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let o = ExploreOptions {
            fairness: Some(1),
            ..Default::default()
        };
        let mut rec = Recorder::default();
        let stats = explore(&p, &cat, &o, &mut rec).unwrap();
        assert!(stats.completed > 0);
        assert_eq!(stats.completed, rec.runs.len() as u64);
    }

    #[test]
    fn overflow_is_an_error() {
        let p = parse("low l = 9223372036854775807; thread { l := l + 1; }").unwrap();
        let cat = Category::from_program(&p, "c");
        let mut rec = Recorder::default();
        assert!(matches!(
            explore(&p, &cat, &ExploreOptions::default(), &mut rec),
            Err(ExploreError::Overflow { step: 1, .. })
        ));
    }
}
