//! The cached, kd-indexed Event Calculus.
//!
//! Events live in a tree keyed `(hash(functor), arity, hash(first argument), time)`
//! and maximal validity intervals in one keyed
//! `(hash(fluent), hash(value), start, end)`, with `end = POS_INF` while an
//! interval is open. Every context lookup is one or two range queries. Open
//! intervals are additionally indexed by fluent so that the update path can
//! find them without a tree search.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::ec::cache::{self, MviStore};
use crate::ec::{
    check_window, CloseOutcome, DomainTheory, EcError, EffectsReport, EventOccurrence,
    EventPattern, FluentAssignment, FluentPattern, Mvi, QueryContext, Reasoner, Tick,
    NO_ARG_MARKER,
};
use crate::kd::{Kd4Key, KdStats, KdTree, RangeBox, NEG_INF, POS_INF};
use crate::term::{hash_display, symbol_hash, Term};

pub fn event_key(e: &EventOccurrence) -> Kd4Key {
    let first = match e.event.arg(0) {
        Some(a) => hash_display(a),
        None => symbol_hash(NO_ARG_MARKER),
    };
    Kd4Key::new(
        symbol_hash(e.event.functor()),
        e.event.arity() as i64,
        first,
        e.time,
    )
}

pub fn mvi_key(m: &Mvi) -> Kd4Key {
    Kd4Key::new(
        m.assignment.fluent.key_hash(),
        m.assignment.value.key_hash(),
        m.start,
        m.end,
    )
}

fn fluent_box(q: &FluentPattern) -> RangeBox {
    let mut b = RangeBox::all();
    if let Some(f) = &q.fluent {
        b = b.with_point(0, f.key_hash());
    }
    if let Some(v) = &q.value {
        b = b.with_point(1, v.key_hash());
    }
    b
}

fn event_box(q: &EventPattern, ws: Tick, we: Tick) -> RangeBox {
    let mut b = RangeBox::all().with(3, ws, we);
    if let Some(f) = &q.functor {
        b = b.with_point(0, symbol_hash(f));
    }
    if let Some(a) = q.arity {
        b = b.with_point(1, a as i64);
    }
    if let Some(a) = &q.first_arg {
        b = b.with_point(2, hash_display(a));
    }
    b
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub events: usize,
    pub mvis: usize,
    pub event_tree: KdStats,
    pub mvi_tree: KdStats,
    pub context_queries: u64,
    pub rule_firings: u64,
}

pub struct Engine {
    theory: Arc<DomainTheory>,
    strata: Vec<u8>,
    events: KdTree<EventOccurrence>,
    mvis: KdTree<Mvi>,
    open: HashMap<Term, Mvi>,
    last_time: Option<Tick>,
    context_queries: AtomicU64,
    rule_firings: u64,
}

impl Engine {
    pub fn new(theory: impl Into<Arc<DomainTheory>>) -> Result<Self, EcError> {
        let theory = theory.into();
        let mut e = Engine {
            strata: theory.strata(),
            theory: theory.clone(),
            events: KdTree::new(),
            mvis: KdTree::new(),
            open: HashMap::new(),
            last_time: None,
            context_queries: AtomicU64::new(0),
            rule_firings: 0,
        };
        cache::apply_initially(&mut e, &theory)?;
        Ok(e)
    }

    pub fn theory(&self) -> &Arc<DomainTheory> {
        &self.theory
    }

    pub fn event_tree(&self) -> &KdTree<EventOccurrence> {
        &self.events
    }

    pub fn mvi_tree(&self) -> &KdTree<Mvi> {
        &self.mvis
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            events: self.events.len(),
            mvis: self.mvis.len(),
            event_tree: self.events.stats(),
            mvi_tree: self.mvis.stats(),
            context_queries: self.context_queries.load(Ordering::Relaxed),
            rule_firings: self.rule_firings,
        }
    }

    /// End the open interval of `f=v` at `t`. An interval that would become
    /// empty is removed instead.
    pub fn close_interval(&mut self, f: &Term, v: &Term, t: Tick) -> CloseOutcome {
        cache::close(self, &FluentAssignment::new(f.clone(), v.clone()), t, None)
    }

    /// Open `f=v` at `t`. Returns `false` if it is already open.
    pub fn open_interval(&mut self, f: &Term, v: &Term, t: Tick) -> Result<bool, EcError> {
        cache::open(self, &FluentAssignment::new(f.clone(), v.clone()), t)
    }

    fn counted(&self) {
        self.context_queries.fetch_add(1, Ordering::Relaxed);
    }

    fn query_mvis(&self, b: &RangeBox, q: &FluentPattern, out: &mut Vec<Mvi>) {
        let hits = self.mvis.range_query(b).expect("engine boxes are well formed");
        out.extend(
            hits.into_iter()
                .filter(|(_, m)| q.matches(&m.assignment))
                .map(|(_, m)| m.clone()),
        );
    }
}

impl QueryContext for Engine {
    fn holds_at(&self, q: &FluentPattern, t: Tick) -> Vec<FluentAssignment> {
        self.counted();
        let b = fluent_box(q)
            .with(2, NEG_INF, t)
            .with(3, t.saturating_add(1), POS_INF);
        let hits = self.mvis.range_query(&b).expect("engine boxes are well formed");
        let mut out: Vec<_> = hits
            .into_iter()
            .filter(|(_, m)| q.matches(&m.assignment))
            .map(|(_, m)| m.assignment.clone())
            .collect();
        out.sort();
        out
    }

    fn mholds_for(&self, q: &FluentPattern) -> Vec<Mvi> {
        self.counted();
        let mut out = Vec::new();
        self.query_mvis(&fluent_box(q), q, &mut out);
        out.sort();
        out
    }

    fn cached_between(&self, ws: Tick, we: Tick, q: &FluentPattern) -> Result<Vec<Mvi>, EcError> {
        check_window(ws, we)?;
        self.counted();
        let mut out = Vec::new();
        if ws == we {
            return Ok(out);
        }
        let base = fluent_box(q).with(3, ws + 1, POS_INF);
        // Intervals that started at or before the window start and reach into it.
        self.query_mvis(&base.with(2, NEG_INF, ws), q, &mut out);
        // Intervals that start strictly inside the window.
        if ws + 1 < we {
            self.query_mvis(&base.with(2, ws + 1, we - 1), q, &mut out);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    fn happens_in_window(
        &self,
        q: &EventPattern,
        ws: Tick,
        we: Tick,
    ) -> Result<Vec<EventOccurrence>, EcError> {
        check_window(ws, we)?;
        self.counted();
        let hits = self
            .events
            .range_query(&event_box(q, ws, we))
            .expect("window checked above");
        let mut out: Vec<_> = hits
            .into_iter()
            .filter(|(_, e)| q.matches(&e.event))
            .map(|(_, e)| e.clone())
            .collect();
        crate::ec::sort_events(&mut out);
        Ok(out)
    }
}

impl MviStore for Engine {
    fn last_event_time(&self) -> Option<Tick> {
        self.last_time
    }

    fn record_event(&mut self, e: &EventOccurrence) {
        self.events
            .insert(event_key(e), e.clone())
            .expect("event ticks are validated before indexing");
        self.last_time = Some(e.time);
    }

    fn open_mvi(&self, fluent: &Term) -> Option<Mvi> {
        self.open.get(fluent).cloned()
    }

    fn remove_mvi(&mut self, m: &Mvi) {
        let n = self.mvis.delete(&mvi_key(m), |p| p == m);
        debug_assert_eq!(n, 1);
        if m.end == POS_INF {
            self.open.remove(&m.assignment.fluent);
        }
    }

    fn insert_mvi(&mut self, m: Mvi) {
        if m.end == POS_INF {
            let prev = self.open.insert(m.assignment.fluent.clone(), m.clone());
            debug_assert!(prev.is_none(), "two open intervals for {}", m.assignment.fluent);
        }
        self.mvis
            .insert(mvi_key(&m), m)
            .expect("interval starts are never sentinels");
    }
}

impl Reasoner for Engine {
    fn update(&mut self, e: EventOccurrence) -> Result<EffectsReport, EcError> {
        let theory = self.theory.clone();
        let strata = std::mem::take(&mut self.strata);
        let r = cache::update(self, &theory, &strata, &e);
        self.strata = strata;
        if let Ok(rep) = &r {
            self.rule_firings += rep.rule_firings as u64;
        }
        r
    }

    fn last_time(&self) -> Option<Tick> {
        self.last_time
    }

    fn event_count(&self) -> usize {
        self.events.len()
    }

    fn structure_bytes(&self) -> usize {
        let mut heap = 0;
        self.events.for_each(|_, e| heap += e.event.heap_bytes());
        self.mvis.for_each(|_, m| {
            heap += m.assignment.fluent.heap_bytes() + m.assignment.value.heap_bytes()
        });
        let open = self.open.capacity() * (std::mem::size_of::<Term>() + std::mem::size_of::<Mvi>());
        self.events.node_bytes() + self.mvis.node_bytes() + open + heap
    }
}
