//! Cached Event Calculus over four-dimensional kd-tree indexes.
//!
//! * [`kd`]: the point index (insert, delete, range query, partial rebuilds).
//! * [`ec`]: events, fluents, validity intervals, domain theories, the
//!   axiom-level reference evaluator and the scan-based cached baseline.
//! * [`engine`]: the kd-indexed engine.
//! * [`pattern`]: the monitoring pattern language and its compiler.

pub mod ec;
pub mod engine;
pub mod kd;
pub mod par;
pub mod pattern;
pub mod term;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use ec::{
    AxiomEvaluator, DomainTheory, EcError, EffectsReport, EventOccurrence, EventPattern,
    FluentAssignment, FluentPattern, Mvi, NaiveState, QueryContext, Reasoner, Rule, Tick,
};
pub use engine::Engine;
pub use kd::{Kd4Key, KdError, KdTree, RangeBox};
pub use par::Parallelism;
pub use term::{Arg, Term};
