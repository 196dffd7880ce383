//! Projection of an execution onto its low-store trace.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{StepEvent, Store};
use crate::lang::{Program, Value, VarId};

/// Values of the low variables, ordered by id `1..=|L|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LowStore(pub Vec<Value>);

impl LowStore {
    /// The low prefix of a full store.
    pub fn project(program: &Program, store: &Store) -> LowStore {
        LowStore(store.values()[..program.low_count()].to_vec())
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, id: VarId) -> Option<Value> {
        self.0.get(id.index()).copied()
    }
}

impl fmt::Display for LowStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Sequence of low stores observed along one execution; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LowTrace(Vec<LowStore>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a low-store trace must contain at least one element")]
pub struct EmptyTrace;

impl LowTrace {
    pub fn new(stores: Vec<LowStore>) -> Result<LowTrace, EmptyTrace> {
        if stores.is_empty() {
            Err(EmptyTrace)
        } else {
            Ok(LowTrace(stores))
        }
    }

    pub fn singleton(initial: LowStore) -> LowTrace {
        LowTrace(vec![initial])
    }

    pub fn push(&mut self, s: LowStore) {
        self.0.push(s);
    }

    pub fn stores(&self) -> &[LowStore] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> &LowStore {
        &self.0[0]
    }

    pub fn last(&self) -> &LowStore {
        &self.0[self.0.len() - 1]
    }
}

impl fmt::Display for LowTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A value-changing write to a low variable: the `num`-th low-store change
/// of the execution set variable `id` to `val`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub num: u64,
    pub id: VarId,
    pub val: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("stores have {left} and {right} variables")]
pub struct StoreMismatch {
    pub left: usize,
    pub right: usize,
}

/// Two stores agree on every low variable.
pub fn low_equivalent(program: &Program, s1: &Store, s2: &Store) -> Result<bool, StoreMismatch> {
    if s1.len() != program.var_count() || s2.len() != program.var_count() {
        return Err(StoreMismatch {
            left: s1.len(),
            right: s2.len(),
        });
    }
    let n = program.low_count();
    Ok(s1.values()[..n] == s2.values()[..n])
}

/// Tracks the current low store of one execution and turns step events into
/// change events.
#[derive(Debug, Clone)]
pub struct LowStoreMonitor {
    current: LowStore,
    changes: u64,
}

impl LowStoreMonitor {
    pub fn new(initial: LowStore) -> LowStoreMonitor {
        LowStoreMonitor {
            current: initial,
            changes: 0,
        }
    }

    /// Returns a change event iff `ev` wrote a low variable to a value
    /// different from its current one.
    pub fn observe(&mut self, ev: &StepEvent) -> Option<ChangeEvent> {
        let w = ev.write?;
        let slot = self.current.0.get_mut(w.var.index())?;
        if *slot == w.new {
            return None;
        }
        *slot = w.new;
        self.changes += 1;
        Some(ChangeEvent {
            num: self.changes,
            id: w.var,
            val: w.new,
        })
    }

    pub fn current(&self) -> &LowStore {
        &self.current
    }

    pub fn change_count(&self) -> u64 {
        self.changes
    }
}

/// Runs a monitor over a whole event stream, returning the change events and
/// the resulting low-store trace.
pub fn observe<'a>(
    events: impl IntoIterator<Item = &'a StepEvent>,
    initial: LowStore,
) -> (Vec<ChangeEvent>, LowTrace) {
    let mut trace = LowTrace::singleton(initial.clone());
    let mut monitor = LowStoreMonitor::new(initial);
    let mut changes = Vec::new();
    for ev in events {
        if let Some(c) = monitor.observe(ev) {
            changes.push(c);
            trace.push(monitor.current().clone());
        }
    }
    (changes, trace)
}
