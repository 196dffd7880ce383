//! Small-step interpreter. A state is advanced one atomic unit of one thread
//! at a time; the interleaving is entirely chosen by the caller.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{BinaryOp, Expr, Program, Stmt, UnaryOp, ValidationError, Value, VarId};

/// What counts as one indivisible step of a thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// Skip, assignment, and each guard evaluation of `if`/`while` are separate steps.
    #[default]
    Stmt,
    /// An `if` evaluates its guard and runs the selected branch in one step.
    BranchAtomic,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Stmt => "stmt",
            Granularity::BranchAtomic => "branch-atomic",
        })
    }
}

/// Total mapping from declared variables to values, indexed by `VarId - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Store(Vec<Value>);

impl Store {
    pub fn new(values: Vec<Value>) -> Store {
        Store(values)
    }

    pub fn get(&self, id: VarId) -> Value {
        self.0[id.index()]
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Write {
    pub var: VarId,
    pub old: Value,
    pub new: Value,
}

/// Observable effect of one atomic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepEvent {
    pub tid: usize,
    pub write: Option<Write>,
}

pub type Schedule = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("override names undeclared variable #{0}")]
    UnknownOverride(VarId),
    #[error("thread {0} is not enabled")]
    NotEnabled(usize),
    #[error("arithmetic overflow in thread {0}")]
    Overflow(usize),
    #[error("thread {thread}: branch-atomic `if` contains a `while` loop")]
    LoopInAtomicBranch { thread: usize },
    #[error("thread {thread}: branch-atomic `if` may assign more than one variable")]
    MultipleWritesInAtomicBranch { thread: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Frame<'p> {
    block: &'p [Stmt],
    pc: usize,
}

/// Full interpreter state: store, per-thread continuation stacks and the
/// number of steps taken so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecState<'p> {
    store: Store,
    control: Vec<Vec<Frame<'p>>>,
    steps: u64,
}

impl<'p> ExecState<'p> {
    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn thread_count(&self) -> usize {
        self.control.len()
    }

    pub fn is_enabled(&self, tid: usize) -> bool {
        self.control.get(tid).is_some_and(|c| !c.is_empty())
    }

    /// Threads with pending work. Nothing in the language blocks, so this is
    /// exactly the set of unterminated threads.
    pub fn enabled(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.control.len()).filter(|&t| self.is_enabled(t))
    }

    pub fn is_terminated(&self) -> bool {
        self.control.iter().all(Vec::is_empty)
    }

    fn current(&self, tid: usize) -> Option<&'p Stmt> {
        let top = self.control.get(tid)?.last()?;
        top.block.get(top.pc)
    }

    fn advance(&mut self, tid: usize) {
        if let Some(top) = self.control[tid].last_mut() {
            top.pc += 1;
        }
    }

    fn enter(&mut self, tid: usize, block: &'p [Stmt]) {
        self.control[tid].push(Frame { block, pc: 0 });
    }

    // Pops exhausted frames so that a finished thread has an empty stack.
    // A frame left behind by a loop body returns to the `while` itself,
    // which stays at its parent's pc until its guard fails.
    fn normalize(&mut self, tid: usize) {
        let stack = &mut self.control[tid];
        while stack.last().is_some_and(|f| f.pc >= f.block.len()) {
            stack.pop();
        }
    }
}

/// Interpreter for one program at a fixed step granularity.
#[derive(Debug, Clone, Copy)]
pub struct Interpreter<'p> {
    program: &'p Program,
    granularity: Granularity,
}

impl<'p> Interpreter<'p> {
    /// Validates the program and, for branch-atomic mode, that every `if`
    /// branch is loop-free and performs at most one assignment.
    pub fn new(program: &'p Program, granularity: Granularity) -> Result<Self, ExecError> {
        program.validate()?;
        if granularity == Granularity::BranchAtomic {
            for (thread, body) in program.threads.iter().enumerate() {
                check_atomic_branches(body, thread)?;
            }
        }
        Ok(Interpreter {
            program,
            granularity,
        })
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn initial_state(&self, overrides: &[(VarId, Value)]) -> Result<ExecState<'p>, ExecError> {
        let mut values: Vec<Value> = self.program.decls.iter().map(|_| 0).collect();
        for d in &self.program.decls {
            values[d.id.index()] = d.init;
        }
        for &(id, v) in overrides {
            let slot = values
                .get_mut(id.index())
                .ok_or(ExecError::UnknownOverride(id))?;
            *slot = v;
        }
        let mut state = ExecState {
            store: Store(values),
            control: self
                .program
                .threads
                .iter()
                .map(|body| vec![Frame { block: body, pc: 0 }])
                .collect(),
            steps: 0,
        };
        for tid in 0..state.control.len() {
            state.normalize(tid);
        }
        Ok(state)
    }

    /// Executes one atomic unit of `tid`. On error the state is left untouched.
    pub fn step(&self, state: &mut ExecState<'p>, tid: usize) -> Result<StepEvent, ExecError> {
        let stmt = state.current(tid).ok_or(ExecError::NotEnabled(tid))?;
        let overflow = |_| ExecError::Overflow(tid);
        let write = match stmt {
            Stmt::Skip => {
                state.advance(tid);
                None
            }
            Stmt::Assign { target, rhs } => {
                let new = eval(rhs, &state.store).map_err(overflow)?;
                state.advance(tid);
                Some(assign(&mut state.store, *target, new))
            }
            Stmt::If {
                guard,
                then_branch,
                else_branch,
            } => match self.granularity {
                Granularity::Stmt => {
                    let taken = eval(guard, &state.store).map_err(overflow)? != 0;
                    state.advance(tid);
                    state.enter(tid, if taken { then_branch } else { else_branch });
                    None
                }
                Granularity::BranchAtomic => {
                    let pending = run_atomic(stmt, &mut state.store.clone()).map_err(overflow)?;
                    state.advance(tid);
                    pending.map(|(var, new)| assign(&mut state.store, var, new))
                }
            },
            Stmt::While { guard, body } => {
                if eval(guard, &state.store).map_err(overflow)? != 0 {
                    state.enter(tid, body);
                } else {
                    state.advance(tid);
                }
                None
            }
        };
        state.normalize(tid);
        state.steps += 1;
        Ok(StepEvent { tid, write })
    }

    /// Replays `schedule` from the initial state, handing every step event to
    /// `sink` in order.
    pub fn run_schedule(
        &self,
        overrides: &[(VarId, Value)],
        schedule: &[usize],
        mut sink: impl FnMut(&StepEvent),
    ) -> Result<RunOutcome, ExecError> {
        let mut state = self.initial_state(overrides)?;
        for (i, &tid) in schedule.iter().enumerate() {
            if !state.is_enabled(tid) {
                return Ok(RunOutcome::Infeasible { position: i + 1 });
            }
            match self.step(&mut state, tid) {
                Ok(ev) => sink(&ev),
                Err(ExecError::Overflow(_)) => return Ok(RunOutcome::Overflow { position: i + 1 }),
                Err(e) => return Err(e),
            }
        }
        Ok(if state.is_terminated() {
            RunOutcome::Completed
        } else {
            RunOutcome::Incomplete
        })
    }
}

/// Result of replaying a schedule. Positions are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Every thread terminated.
    Completed,
    /// The schedule was feasible but some thread still has work left.
    Incomplete,
    Infeasible {
        position: usize,
    },
    Overflow {
        position: usize,
    },
}

fn assign(store: &mut Store, var: VarId, new: Value) -> Write {
    let slot = &mut store.0[var.index()];
    let old = std::mem::replace(slot, new);
    Write { var, old, new }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

pub fn eval(e: &Expr, store: &Store) -> Result<Value, Overflow> {
    Ok(match e {
        Expr::Lit(v) => *v,
        Expr::Var(id) => store.get(*id),
        Expr::Unary(UnaryOp::Neg, a) => eval(a, store)?.checked_neg().ok_or(Overflow)?,
        Expr::Unary(UnaryOp::Not, a) => (eval(a, store)? == 0) as Value,
        Expr::Binary(BinaryOp::And, a, b) => {
            (eval(a, store)? != 0 && eval(b, store)? != 0) as Value
        }
        Expr::Binary(BinaryOp::Or, a, b) => (eval(a, store)? != 0 || eval(b, store)? != 0) as Value,
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval(a, store)?, eval(b, store)?);
            match op {
                BinaryOp::Add => x.checked_add(y).ok_or(Overflow)?,
                BinaryOp::Sub => x.checked_sub(y).ok_or(Overflow)?,
                BinaryOp::Mul => x.checked_mul(y).ok_or(Overflow)?,
                BinaryOp::Eq => (x == y) as Value,
                BinaryOp::Ne => (x != y) as Value,
                BinaryOp::Lt => (x < y) as Value,
                BinaryOp::Le => (x <= y) as Value,
                BinaryOp::And | BinaryOp::Or => unreachable!(),
            }
        }
    })
}

// Runs an `if` (or a loop-free block) against a scratch copy of the store
// and returns the single assignment it performed, if any.
fn run_atomic(stmt: &Stmt, scratch: &mut Store) -> Result<Option<(VarId, Value)>, Overflow> {
    match stmt {
        Stmt::Skip => Ok(None),
        Stmt::Assign { target, rhs } => {
            let v = eval(rhs, scratch)?;
            scratch.0[target.index()] = v;
            Ok(Some((*target, v)))
        }
        Stmt::If {
            guard,
            then_branch,
            else_branch,
        } => {
            let branch = if eval(guard, scratch)? != 0 {
                then_branch
            } else {
                else_branch
            };
            let mut pending = None;
            for s in branch {
                if let Some(w) = run_atomic(s, scratch)? {
                    pending = Some(w);
                }
            }
            Ok(pending)
        }
        Stmt::While { .. } => unreachable!("rejected by Interpreter::new"),
    }
}

fn max_writes(block: &[Stmt]) -> Option<usize> {
    block.iter().try_fold(0, |acc, s| {
        Some(
            acc + match s {
                Stmt::Skip => 0,
                Stmt::Assign { .. } => 1,
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => max_writes(then_branch)?.max(max_writes(else_branch)?),
                Stmt::While { .. } => return None,
            },
        )
    })
}

fn check_atomic_branches(block: &[Stmt], thread: usize) -> Result<(), ExecError> {
    for s in block {
        match s {
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                for branch in [then_branch, else_branch] {
                    match max_writes(branch) {
                        None => return Err(ExecError::LoopInAtomicBranch { thread }),
                        Some(n) if n > 1 => {
                            return Err(ExecError::MultipleWritesInAtomicBranch { thread })
                        }
                        Some(_) => {}
                    }
                }
            }
            Stmt::While { body, .. } => check_atomic_branches(body, thread)?,
            Stmt::Skip | Stmt::Assign { .. } => {}
        }
    }
    Ok(())
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

    fn store_of(s: &ExecState) -> Vec<Value> {
        s.store().values().to_vec()
    }

    #[test]
    fn initial_state_uses_declared_inits_and_overrides() {
        let p = parse(EXAMPLE).unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let s = it.initial_state(&[]).unwrap();
        assert_eq!(store_of(&s), vec![0, 0, 0]);
        assert_eq!(s.steps(), 0);
        let s = it.initial_state(&[(VarId(3), 1)]).unwrap();
        assert_eq!(store_of(&s), vec![0, 0, 1]);
        assert_eq!(
            it.initial_state(&[(VarId(4), 1)]),
            Err(ExecError::UnknownOverride(VarId(4)))
        );
    }

    #[test]
    fn enabled_sets() {
        let p = parse(EXAMPLE).unwrap();
        let it = Interpreter::new(&p, Granularity::BranchAtomic).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        assert_eq!(s.enabled().collect::<Vec<_>>(), vec![0, 1, 2]);
        for t in [0, 1, 2] {
            it.step(&mut s, t).unwrap();
        }
        assert_eq!(s.enabled().count(), 0);

        let p = parse("low l = 0; thread { skip; } thread { skip; skip; }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        it.step(&mut s, 0).unwrap();
        assert_eq!(s.enabled().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn assignment_reports_write() {
        let p = parse(EXAMPLE).unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        let ev = it.step(&mut s, 1).unwrap();
        assert_eq!(
            ev,
            StepEvent {
                tid: 1,
                write: Some(Write {
                    var: VarId(1),
                    old: 0,
                    new: 1
                })
            }
        );
        assert_eq!(store_of(&s), vec![1, 0, 0]);
        assert!(!s.is_enabled(1));
    }

    #[test]
    fn skip_has_no_write() {
        let p = parse("low l = 0; thread { skip; }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        let before = s.store().clone();
        let ev = it.step(&mut s, 0).unwrap();
        assert_eq!(ev.write, None);
        assert_eq!(s.store(), &before);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn stmt_granularity_if_guard_is_its_own_step() {
        // l1 = 0, so the guard picks the else branch; the skip is a second step.
        let p = parse(EXAMPLE).unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        let ev = it.step(&mut s, 0).unwrap();
        assert_eq!(ev.write, None);
        assert_eq!(store_of(&s), vec![0, 0, 0]);
        assert!(s.is_enabled(0));
        assert_eq!(s.current(0), Some(&Stmt::Skip));
        it.step(&mut s, 0).unwrap();
        assert!(!s.is_enabled(0));
    }

    #[test]
    fn branch_atomic_runs_whole_branch() {
        let p = parse(EXAMPLE).unwrap();
        let it = Interpreter::new(&p, Granularity::BranchAtomic).unwrap();
        let mut trace = Vec::new();
        let out = it
            .run_schedule(&[], &[1, 2, 0], |ev| trace.push(*ev))
            .unwrap();
        assert_eq!(out, RunOutcome::Completed);
        assert_eq!(
            trace[2].write,
            Some(Write {
                var: VarId(2),
                old: 0,
                new: 1
            })
        );
        assert_eq!(trace.len(), 3);
    }

    #[test]
    fn branch_atomic_rejects_loops_and_double_writes() {
        let p = parse("low l = 0; thread { if (l == 0) { while (l < 1) { l := 1; } } }").unwrap();
        assert_eq!(
            Interpreter::new(&p, Granularity::BranchAtomic).unwrap_err(),
            ExecError::LoopInAtomicBranch { thread: 0 }
        );
        let p = parse("low l = 0; thread { if (1) { l := 1; l := 2; } }").unwrap();
        assert_eq!(
            Interpreter::new(&p, Granularity::BranchAtomic).unwrap_err(),
            ExecError::MultipleWritesInAtomicBranch { thread: 0 }
        );
        let p =
            parse("low l = 0; thread { if (1) { if (l) { l := 1; } else { l := 2; } } }").unwrap();
        assert!(Interpreter::new(&p, Granularity::BranchAtomic).is_ok());
        assert!(Interpreter::new(&p, Granularity::Stmt).is_ok());
    }

    #[test]
    fn while_loop_steps() {
        let p = parse("low i = 0; thread { while (i < 2) { i := i + 1; } }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut n = 0;
        let out = it.run_schedule(&[], &[0; 5], |_| n += 1).unwrap();
        assert_eq!(out, RunOutcome::Completed);
        assert_eq!(n, 5);
        assert_eq!(
            it.run_schedule(&[], &[0; 6], |_| {}).unwrap(),
            RunOutcome::Infeasible { position: 6 }
        );
    }

    #[test]
    fn empty_loop_body_does_not_terminate() {
        let p = parse("low l = 0; thread { while (1 == 1) { } }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        assert_eq!(
            it.run_schedule(&[], &[0; 50], |_| {}).unwrap(),
            RunOutcome::Incomplete
        );
    }

    #[test]
    fn run_schedule_outcomes() {
        let p = parse("low l = 0; thread { skip; }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        assert_eq!(
            it.run_schedule(&[], &[], |_| {}).unwrap(),
            RunOutcome::Incomplete
        );
        assert_eq!(
            it.run_schedule(&[], &[0, 0], |_| {}).unwrap(),
            RunOutcome::Infeasible { position: 2 }
        );
        assert_eq!(
            it.run_schedule(&[], &[3], |_| {}).unwrap(),
            RunOutcome::Infeasible { position: 1 }
        );
    }

    #[test]
    fn overflow_is_reported_and_state_untouched() {
        let p = parse("low l = 9223372036854775807; thread { l := l + 1; }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        let before = s.clone();
        assert_eq!(it.step(&mut s, 0), Err(ExecError::Overflow(0)));
        assert_eq!(s, before);
        assert_eq!(
            it.run_schedule(&[], &[0], |_| {}).unwrap(),
            RunOutcome::Overflow { position: 1 }
        );
    }

    #[test]
    fn step_on_disabled_thread_fails() {
        let p = parse("low l = 0; thread { skip; }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        it.step(&mut s, 0).unwrap();
        assert_eq!(it.step(&mut s, 0), Err(ExecError::NotEnabled(0)));
        assert_eq!(it.step(&mut s, 5), Err(ExecError::NotEnabled(5)));
    }

    #[test]
    fn logic_and_comparison_semantics() {
        let store = Store::new(vec![3, 0]);
        let p = parse("low a = 3; low b = 0; thread { a := (a < 4) && !b || a * 0; }").unwrap();
        let Stmt::Assign { rhs, .. } = &p.threads[0][0] else {
            panic!()
        };
        assert_eq!(eval(rhs, &store), Ok(1));
        let p = parse("low a = 0; thread { a := 0 && (9223372036854775807 + 1); }").unwrap();
        let Stmt::Assign { rhs, .. } = &p.threads[0][0] else {
            panic!()
        };
        assert_eq!(eval(rhs, &store), Ok(0));
    }

    #[test]
    fn empty_thread_is_never_enabled() {
        let p = parse("low l = 0; thread { } thread { if (1) { } }").unwrap();
        let it = Interpreter::new(&p, Granularity::Stmt).unwrap();
        let mut s = it.initial_state(&[]).unwrap();
        assert_eq!(s.enabled().collect::<Vec<_>>(), vec![1]);
        it.step(&mut s, 1).unwrap();
        assert!(s.is_terminated());
    }
}
