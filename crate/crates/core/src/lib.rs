//! Stateless model checking of observational determinism for a small
//! concurrent imperative language with high/low security labels.
//!
//! A program is secure when, from every class of low-equivalent initial
//! stores, all of its executions (over every interleaving and every choice of
//! high inputs) produce stutter-equivalent low-store traces. [`verify`]
//! decides this by re-executing the program under every schedule
//! ([`explore`]) and matching each execution's low-store changes against the
//! first execution's signature ([`sigstore`]). [`oracle`] decides the same
//! property by brute force for cross-checking.

pub mod exec;
pub mod explore;
pub mod gen;
pub mod lang;
pub mod monitor;
pub mod oracle;
pub mod sigstore;
pub mod verify;

pub use exec::{Granularity, Interpreter, StepEvent};
pub use explore::{Category, ExploreOptions, Iteration};
pub use lang::{parse, Program, SecurityLabel, Value, VarId};
pub use verify::{csmc_verify, SecurityReport, Verdict};
