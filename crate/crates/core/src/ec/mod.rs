//! Event Calculus vocabulary: events, fluent assignments, validity intervals,
//! domain theories and the query interface rules are evaluated against.

mod axioms;
pub(crate) mod cache;
mod naive;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kd::{NEG_INF, POS_INF};
use crate::term::{Arg, Term};

pub use axioms::{naive_holds_at, naive_holds_for, AxiomEvaluator};
pub use naive::NaiveState;
pub(crate) use naive::sort_events;

/// Time in integer ticks (seconds at the ingestion layer).
pub type Tick = i64;

/// Largest tick an event may carry. Leaves room for `t + 1` and the open-end sentinel.
pub const MAX_TICK: Tick = POS_INF - 2;

/// Functor-less marker hashed into the first-argument coordinate of
/// argument-less events.
pub const NO_ARG_MARKER: &str = "$no_arg";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EcError {
    #[error("event at tick {time} arrived after tick {last}")]
    OutOfOrderEvent { time: Tick, last: Tick },
    #[error("tick {0} is outside [0, {MAX_TICK}]")]
    InvalidTick(Tick),
    #[error("malformed window [{start}, {end}]")]
    MalformedWindow { start: Tick, end: Tick },
    #[error("engine invariant violated: {0}")]
    EngineInvariantViolation(String),
}

pub(crate) fn check_tick(t: Tick) -> Result<(), EcError> {
    if (0..=MAX_TICK).contains(&t) {
        Ok(())
    } else {
        Err(EcError::InvalidTick(t))
    }
}

pub(crate) fn check_window(start: Tick, end: Tick) -> Result<(), EcError> {
    if start > end {
        Err(EcError::MalformedWindow { start, end })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventOccurrence {
    pub event: Term,
    pub time: Tick,
}

impl EventOccurrence {
    pub fn new(event: Term, time: Tick) -> Self {
        EventOccurrence { event, time }
    }
}

impl fmt::Display for EventOccurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "happens_at({}, {})", self.event, self.time)
    }
}

/// `fluent = value`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FluentAssignment {
    pub fluent: Term,
    pub value: Term,
}

impl FluentAssignment {
    pub fn new(fluent: Term, value: Term) -> Self {
        FluentAssignment { fluent, value }
    }
}

impl fmt::Display for FluentAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.fluent, self.value)
    }
}

/// Maximal validity interval, closed-open: holds at `t` iff `start <= t < end`.
/// `end == POS_INF` marks an interval that is still open.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mvi {
    pub assignment: FluentAssignment,
    pub start: Tick,
    pub end: Tick,
}

impl Mvi {
    pub fn new(assignment: FluentAssignment, start: Tick, end: Tick) -> Self {
        debug_assert!(start < end, "empty interval [{start}, {end})");
        Mvi { assignment, start, end }
    }

    pub fn is_open(&self) -> bool {
        self.end == POS_INF
    }

    pub fn holds_at(&self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }

    /// Whether the interval meets the closed-open window `[ws, we)`.
    pub fn intersects(&self, ws: Tick, we: Tick) -> bool {
        ws < we && self.start < we && self.end > ws
    }
}

impl fmt::Display for Mvi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@[", self.assignment)?;
        if self.start == NEG_INF {
            write!(f, "-inf")?;
        } else {
            write!(f, "{}", self.start)?;
        }
        if self.end == POS_INF {
            write!(f, ",+inf)")
        } else {
            write!(f, ",{})", self.end)
        }
    }
}

/// A fluent assignment with either side possibly unbound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FluentPattern {
    pub fluent: Option<Term>,
    pub value: Option<Term>,
}

impl FluentPattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn fluent(f: Term) -> Self {
        FluentPattern {
            fluent: Some(f),
            value: None,
        }
    }

    pub fn ground(f: Term, v: Term) -> Self {
        FluentPattern {
            fluent: Some(f),
            value: Some(v),
        }
    }

    pub fn value(v: Term) -> Self {
        FluentPattern {
            fluent: None,
            value: Some(v),
        }
    }

    pub fn matches(&self, a: &FluentAssignment) -> bool {
        self.fluent.as_ref().is_none_or(|f| *f == a.fluent)
            && self.value.as_ref().is_none_or(|v| *v == a.value)
    }
}

/// Event selector: any combination of functor, arity and first argument.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EventPattern {
    pub functor: Option<String>,
    pub arity: Option<usize>,
    pub first_arg: Option<Arg>,
}

impl EventPattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn functor(name: &str, arity: usize) -> Self {
        EventPattern {
            functor: Some(name.to_string()),
            arity: Some(arity),
            first_arg: None,
        }
    }

    pub fn with_first_arg(mut self, arg: impl Into<Arg>) -> Self {
        self.first_arg = Some(arg.into());
        self
    }

    /// Pattern matching exactly the given event term's functor, arity and
    /// first argument.
    pub fn exact(event: &Term) -> Self {
        EventPattern {
            functor: Some(event.functor().to_string()),
            arity: Some(event.arity()),
            first_arg: event.arg(0).cloned(),
        }
    }

    pub fn matches(&self, e: &Term) -> bool {
        self.functor.as_deref().is_none_or(|f| f == e.functor())
            && self.arity.is_none_or(|a| a == e.arity())
            && self.first_arg.as_ref().is_none_or(|a| e.arg(0) == Some(a))
    }
}

/// A tick and the assignment observed there, carried as evidence for a derived effect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Witness {
    pub tick: Tick,
    pub assignment: FluentAssignment,
}

/// One output of a rule body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derived {
    pub assignment: FluentAssignment,
    pub evidence: Vec<Witness>,
}

impl Derived {
    pub fn new(assignment: FluentAssignment) -> Self {
        Derived {
            assignment,
            evidence: Vec::new(),
        }
    }

    pub fn with_evidence(assignment: FluentAssignment, evidence: Vec<Witness>) -> Self {
        Derived { assignment, evidence }
    }
}

impl From<FluentAssignment> for Derived {
    fn from(a: FluentAssignment) -> Self {
        Derived::new(a)
    }
}

/// Read-only view of the narrative seen by rule bodies.
///
/// All results are sorted, so two implementations can be compared directly.
pub trait QueryContext {
    /// Assignments matching `q` that hold at `t`.
    fn holds_at(&self, q: &FluentPattern, t: Tick) -> Vec<FluentAssignment>;

    /// Every interval matching `q`, open or closed.
    fn mholds_for(&self, q: &FluentPattern) -> Vec<Mvi>;

    /// Intervals matching `q` that intersect the closed-open window `[ws, we)`.
    fn cached_between(&self, ws: Tick, we: Tick, q: &FluentPattern) -> Result<Vec<Mvi>, EcError>;

    /// Events matching `q` with time in the closed window `[ws, we]`.
    fn happens_in_window(
        &self,
        q: &EventPattern,
        ws: Tick,
        we: Tick,
    ) -> Result<Vec<EventOccurrence>, EcError>;
}

pub type RuleFn = dyn Fn(&EventOccurrence, &dyn QueryContext) -> Vec<Derived> + Send + Sync;

/// An initiation or termination rule. Rules of one stratum are all evaluated
/// against the same snapshot; a higher stratum sees the effects of lower ones.
#[derive(Clone)]
pub struct Rule {
    pub name: String,
    pub stratum: u8,
    body: Arc<RuleFn>,
}

impl Rule {
    pub fn new<F>(name: impl Into<String>, stratum: u8, body: F) -> Self
    where
        F: Fn(&EventOccurrence, &dyn QueryContext) -> Vec<Derived> + Send + Sync + 'static,
    {
        Rule {
            name: name.into(),
            stratum,
            body: Arc::new(body),
        }
    }

    pub fn eval(&self, e: &EventOccurrence, ctx: &dyn QueryContext) -> Vec<Derived> {
        (self.body)(e, ctx)
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule")
            .field("name", &self.name)
            .field("stratum", &self.stratum)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DomainTheory {
    pub initially: Vec<FluentAssignment>,
    pub initiations: Vec<Rule>,
    pub terminations: Vec<Rule>,
}

impl DomainTheory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn initially(mut self, a: FluentAssignment) -> Self {
        self.initially.push(a);
        self
    }

    pub fn initiates(mut self, rule: Rule) -> Self {
        self.initiations.push(rule);
        self
    }

    pub fn terminates(mut self, rule: Rule) -> Self {
        self.terminations.push(rule);
        self
    }

    /// Distinct strata in ascending order.
    pub fn strata(&self) -> Vec<u8> {
        let s: BTreeSet<u8> = self
            .initiations
            .iter()
            .chain(&self.terminations)
            .map(|r| r.stratum)
            .collect();
        s.into_iter().collect()
    }
}

/// What one update changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectsReport {
    pub time: Tick,
    /// Intervals opened by this update that are still open afterwards.
    pub opened: Vec<Mvi>,
    /// Intervals closed by this update, with their final extent.
    pub closed: Vec<Mvi>,
    /// Open intervals started by an earlier event at the same tick and removed
    /// here because closing them would leave zero length.
    pub discarded: Vec<Mvi>,
    /// Evidence attached to each assignment in `opened`.
    pub evidence: Vec<(FluentAssignment, Vec<Witness>)>,
    /// Number of derived effects the rules produced.
    pub rule_firings: usize,
}

impl EffectsReport {
    pub fn is_empty(&self) -> bool {
        self.opened.is_empty() && self.closed.is_empty() && self.discarded.is_empty()
    }

    pub fn evidence_for(&self, a: &FluentAssignment) -> &[Witness] {
        self.evidence
            .iter()
            .find(|(x, _)| x == a)
            .map_or(&[], |(_, w)| w.as_slice())
    }
}

/// Outcome of closing an assignment's open interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CloseOutcome {
    /// The interval now ends at the given tick.
    Closed(Mvi),
    /// The interval would have been empty and was removed.
    Discarded(Mvi),
    /// No open interval for this assignment.
    NotOpen,
}

/// A narrative state that consumes events in time order.
pub trait Reasoner: QueryContext {
    fn update(&mut self, e: EventOccurrence) -> Result<EffectsReport, EcError>;

    fn last_time(&self) -> Option<Tick>;

    fn event_count(&self) -> usize;

    /// Bytes held by the narrative and interval structures.
    fn structure_bytes(&self) -> usize;
}
