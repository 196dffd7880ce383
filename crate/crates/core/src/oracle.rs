//! Brute-force reference check. Collects every low-store trace of a category
//! by direct enumeration (cloning interpreter states, sampling the low store
//! after every step) and decides observational determinism by comparing
//! stutter-collapsed traces.
//!
//! Nothing here goes through the explorer or the change-event monitor, so it
//! can be used to cross-check them.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::exec::{ExecError, ExecState, Granularity, Interpreter};
use crate::explore::Category;
use crate::lang::Program;
use crate::monitor::{LowStore, LowTrace};

/// A low-store trace with no two adjacent equal elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct CollapsedTrace(Vec<LowStore>);

impl CollapsedTrace {
    pub fn stores(&self) -> &[LowStore] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_trace(self) -> LowTrace {
        LowTrace::new(self.0).expect("collapsed traces are non-empty")
    }
}

impl std::fmt::Display for CollapsedTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Removes consecutive duplicates.
pub fn stutter_collapse(t: &LowTrace) -> CollapsedTrace {
    let mut out: Vec<LowStore> = Vec::with_capacity(t.len());
    for s in t.stores() {
        if out.last() != Some(s) {
            out.push(s.clone());
        }
    }
    CollapsedTrace(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("low-store arity mismatch")]
pub struct ArityMismatch;

pub fn stutter_equivalent(t1: &LowTrace, t2: &LowTrace) -> Result<bool, ArityMismatch> {
    let arity = t1.first().arity();
    if t1
        .stores()
        .iter()
        .chain(t2.stores())
        .any(|s| s.arity() != arity)
    {
        return Err(ArityMismatch);
    }
    Ok(stutter_collapse(t1) == stutter_collapse(t2))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("category `{category}`: an execution exceeds the depth bound of {bound} steps")]
    BoundExceeded { category: String, bound: u64 },
    #[error("category `{category}`: {source}")]
    Exec {
        category: String,
        #[source]
        source: ExecError,
    },
}

/// Collapsed-trace multiset, sorted.
pub type TraceCensus = BTreeMap<CollapsedTrace, u64>;

/// Every maximal execution of every high assignment of `category`, reduced to
/// its collapsed low-store trace. Refuses partial coverage.
pub fn all_low_traces(
    program: &Program,
    category: &Category,
    depth_bound: u64,
    granularity: Granularity,
) -> Result<TraceCensus, OracleError> {
    let exec_err = |source| OracleError::Exec {
        category: category.name.clone(),
        source,
    };
    let interp = Interpreter::new(program, granularity).map_err(exec_err)?;
    let mut census = TraceCensus::new();
    for highs in category.high_assignments() {
        let init = interp
            .initial_state(&category.overrides(&highs))
            .map_err(exec_err)?;
        let first = LowStore::project(program, init.store());
        let mut work: Vec<(ExecState<'_>, Vec<LowStore>)> = vec![(init, vec![first])];
        while let Some((state, trace)) = work.pop() {
            let enabled: Vec<usize> = state.enabled().collect();
            if enabled.is_empty() {
                let t = LowTrace::new(trace).expect("non-empty");
                *census.entry(stutter_collapse(&t)).or_default() += 1;
                continue;
            }
            if state.steps() >= depth_bound {
                return Err(OracleError::BoundExceeded {
                    category: category.name.clone(),
                    bound: depth_bound,
                });
            }
            for tid in enabled {
                let mut next = state.clone();
                interp.step(&mut next, tid).map_err(exec_err)?;
                let mut t = trace.clone();
                t.push(LowStore::project(program, next.store()));
                work.push((next, t));
            }
        }
    }
    Ok(census)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceCount {
    pub trace: CollapsedTrace,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleCategory {
    pub name: String,
    pub pass: bool,
    pub executions: u64,
    pub traces: Vec<TraceCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub secure: bool,
    pub categories: Vec<OracleCategory>,
}

/// A category passes iff all of its executions share one collapsed trace.
pub fn od_oracle(
    program: &Program,
    categories: &[Category],
    depth_bound: u64,
    granularity: Granularity,
) -> Result<OracleReport, OracleError> {
    let mut out = Vec::with_capacity(categories.len());
    for cat in categories {
        let census = all_low_traces(program, cat, depth_bound, granularity)?;
        out.push(OracleCategory {
            name: cat.name.clone(),
            pass: census.len() == 1,
            executions: census.values().sum(),
            traces: census
                .into_iter()
                .map(|(trace, count)| TraceCount { trace, count })
                .collect(),
        });
    }
    Ok(OracleReport {
        secure: out.iter().all(|c| c.pass),
        categories: out,
    })
}
