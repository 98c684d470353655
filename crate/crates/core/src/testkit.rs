//! Random domain theories and narratives for property tests and oracle sweeps.
//!
//! Theories are generated as plain data ([`TheoryDesc`]) and then turned into
//! rule closures, so a failing seed can be printed and replayed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ec::{
    Derived, DomainTheory, EventOccurrence, EventPattern, FluentAssignment, FluentPattern,
    QueryContext, Rule, Tick,
};
use crate::term::{Arg, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for generated theories and narratives.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_events: usize,
    pub fluents: usize,
    pub values: usize,
    pub functors: usize,
    pub max_gap: Tick,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_events: 50,
        fluents: 4,
        values: 3,
        functors: 4,
        max_gap: 3,
    };

    pub const MEDIUM: Shape = Shape {
        max_events: 200,
        fluents: 6,
        values: 4,
        functors: 4,
        max_gap: 3,
    };
}

pub fn fluent(i: usize) -> Term {
    Term::atom(format!("f{i}"))
}

pub fn value(i: usize) -> Term {
    Term::atom(format!("v{i}"))
}

fn functor(i: usize) -> String {
    format!("e{i}")
}

/// Functor `e{i}` always has arity `i % 3`.
fn arity(i: usize) -> usize {
    i % 3
}

const ARG_ATOMS: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Clone)]
pub enum Cond {
    Holds(usize, usize),
    NotHolds(usize, usize),
    HoldsAny(usize),
    ValueHeldSomewhere(usize),
    HeldBefore(usize, usize, Tick),
    Happened(EventPattern, Tick, usize),
    CachedWithin(usize, Tick),
    OddIntervalCount(usize),
}

impl Cond {
    fn check(&self, ctx: &dyn QueryContext, t: Tick) -> bool {
        match self {
            Cond::Holds(f, v) => !ctx.holds_at(&FluentPattern::ground(fluent(*f), value(*v)), t).is_empty(),
            Cond::NotHolds(f, v) => ctx.holds_at(&FluentPattern::ground(fluent(*f), value(*v)), t).is_empty(),
            Cond::HoldsAny(f) => !ctx.holds_at(&FluentPattern::fluent(fluent(*f)), t).is_empty(),
            Cond::ValueHeldSomewhere(v) => !ctx.holds_at(&FluentPattern::value(value(*v)), t).is_empty(),
            Cond::HeldBefore(f, v, d) => {
                t >= *d && !ctx.holds_at(&FluentPattern::ground(fluent(*f), value(*v)), t - d).is_empty()
            }
            Cond::Happened(p, w, k) => {
                ctx.happens_in_window(p, (t - w).max(0), t).unwrap().len() >= *k
            }
            Cond::CachedWithin(f, w) => !ctx
                .cached_between((t - w).max(0), t, &FluentPattern::fluent(fluent(*f)))
                .unwrap()
                .is_empty(),
            Cond::OddIntervalCount(f) => ctx.mholds_for(&FluentPattern::fluent(fluent(*f))).len() % 2 == 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Fixed(usize, usize),
    /// Initiate `target` to the value `source` currently has.
    CopyValue { target: usize, source: usize },
    /// Initiate the fluent to the event's first argument.
    FromArg(usize),
    /// Terminate whatever value the fluent currently has.
    Current(usize),
}

#[derive(Debug, Clone)]
pub struct RuleDesc {
    pub trigger: EventPattern,
    pub conds: Vec<Cond>,
    pub head: Head,
    pub stratum: u8,
}

impl RuleDesc {
    fn fire(&self, e: &EventOccurrence, ctx: &dyn QueryContext) -> Vec<Derived> {
        if !self.trigger.matches(&e.event) || !self.conds.iter().all(|c| c.check(ctx, e.time)) {
            return Vec::new();
        }
        let t = e.time;
        match &self.head {
            Head::Fixed(f, v) => vec![FluentAssignment::new(fluent(*f), value(*v)).into()],
            Head::CopyValue { target, source } => ctx
                .holds_at(&FluentPattern::fluent(fluent(*source)), t)
                .into_iter()
                .map(|a| FluentAssignment::new(fluent(*target), a.value).into())
                .collect(),
            Head::FromArg(f) => match e.event.arg(0) {
                Some(Arg::Term(a)) => vec![FluentAssignment::new(fluent(*f), a.clone()).into()],
                _ => Vec::new(),
            },
            Head::Current(f) => ctx
                .holds_at(&FluentPattern::fluent(fluent(*f)), t)
                .into_iter()
                .map(Derived::new)
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TheoryDesc {
    pub shape: Shape,
    pub initially: Vec<(usize, usize)>,
    pub initiations: Vec<RuleDesc>,
    pub terminations: Vec<RuleDesc>,
}

impl TheoryDesc {
    pub fn random(rng: &mut impl Rng, shape: Shape) -> Self {
        let mut initially = Vec::new();
        for f in 0..shape.fluents {
            if rng.gen_bool(0.3) {
                initially.push((f, rng.gen_range(0..shape.values)));
            }
        }
        let n_init = rng.gen_range(3..=10);
        let n_term = rng.gen_range(1..=6);
        let initiations = (0..n_init).map(|_| random_rule(rng, shape, true)).collect();
        let terminations = (0..n_term).map(|_| random_rule(rng, shape, false)).collect();
        TheoryDesc {
            shape,
            initially,
            initiations,
            terminations,
        }
    }

    pub fn build(&self) -> DomainTheory {
        let mut th = DomainTheory::new();
        for &(f, v) in &self.initially {
            th = th.initially(FluentAssignment::new(fluent(f), value(v)));
        }
        for (i, r) in self.initiations.iter().enumerate() {
            let r2 = r.clone();
            th = th.initiates(Rule::new(format!("init{i}"), r.stratum, move |e, ctx| r2.fire(e, ctx)));
        }
        for (i, r) in self.terminations.iter().enumerate() {
            let r2 = r.clone();
            th = th.terminates(Rule::new(format!("term{i}"), r.stratum, move |e, ctx| r2.fire(e, ctx)));
        }
        th
    }

    /// A random in-order narrative of at most `shape.max_events` events,
    /// with repeated ticks.
    pub fn narrative(&self, rng: &mut impl Rng) -> Vec<EventOccurrence> {
        let n = rng.gen_range(1..=self.shape.max_events);
        let mut t: Tick = rng.gen_range(0..=2);
        (0..n)
            .map(|_| {
                let e = EventOccurrence::new(random_event(rng, self.shape), t);
                t += rng.gen_range(0..=self.shape.max_gap);
                e
            })
            .collect()
    }

    /// Every fluent/value combination the theory can mention, as query patterns:
    /// fully unbound, fluent-only, value-only and ground.
    pub fn patterns(&self) -> Vec<FluentPattern> {
        let mut out = vec![FluentPattern::any()];
        for f in 0..self.shape.fluents {
            out.push(FluentPattern::fluent(fluent(f)));
        }
        for v in 0..self.shape.values {
            out.push(FluentPattern::value(value(v)));
        }
        for f in 0..self.shape.fluents {
            for v in 0..self.shape.values {
                out.push(FluentPattern::ground(fluent(f), value(v)));
            }
        }
        out
    }

    pub fn event_patterns(&self) -> Vec<EventPattern> {
        let mut out = vec![EventPattern::any()];
        for i in 0..self.shape.functors {
            out.push(EventPattern::functor(&functor(i), arity(i)));
            if arity(i) > 0 {
                out.push(EventPattern::functor(&functor(i), arity(i)).with_first_arg(Arg::atom("a")));
            }
        }
        out
    }
}

fn random_arg(rng: &mut impl Rng, shape: Shape) -> Arg {
    match rng.gen_range(0..3) {
        0 => Arg::atom(ARG_ATOMS.choose(rng).unwrap()),
        1 => Arg::Term(value(rng.gen_range(0..shape.values))),
        _ => Arg::Int(rng.gen_range(1..=2)),
    }
}

fn random_event(rng: &mut impl Rng, shape: Shape) -> Term {
    let i = rng.gen_range(0..shape.functors);
    let args = (0..arity(i)).map(|_| random_arg(rng, shape)).collect();
    Term::new(functor(i), args)
}

fn random_trigger(rng: &mut impl Rng, shape: Shape) -> EventPattern {
    let i = rng.gen_range(0..shape.functors);
    let p = EventPattern::functor(&functor(i), arity(i));
    if arity(i) > 0 && rng.gen_bool(0.3) {
        p.with_first_arg(random_arg(rng, shape))
    } else {
        p
    }
}

fn random_cond(rng: &mut impl Rng, shape: Shape) -> Cond {
    let f = rng.gen_range(0..shape.fluents);
    let v = rng.gen_range(0..shape.values);
    match rng.gen_range(0..8) {
        0 => Cond::Holds(f, v),
        1 => Cond::NotHolds(f, v),
        2 => Cond::HoldsAny(f),
        3 => Cond::ValueHeldSomewhere(v),
        4 => Cond::HeldBefore(f, v, rng.gen_range(1..=6)),
        5 => Cond::Happened(random_trigger(rng, shape), rng.gen_range(0..=8), rng.gen_range(1..=2)),
        6 => Cond::CachedWithin(f, rng.gen_range(0..=8)),
        _ => Cond::OddIntervalCount(f),
    }
}

fn random_rule(rng: &mut impl Rng, shape: Shape, initiation: bool) -> RuleDesc {
    let n_conds = rng.gen_range(0..=2);
    let conds = (0..n_conds).map(|_| random_cond(rng, shape)).collect();
    let f = rng.gen_range(0..shape.fluents);
    let head = match (initiation, rng.gen_range(0..4)) {
        (true, 0) => Head::CopyValue {
            target: f,
            source: rng.gen_range(0..shape.fluents),
        },
        (true, 1) => Head::FromArg(f),
        (false, 0 | 1) => Head::Current(f),
        _ => Head::Fixed(f, rng.gen_range(0..shape.values)),
    };
    RuleDesc {
        trigger: random_trigger(rng, shape),
        conds,
        head,
        stratum: rng.gen_range(0..=2),
    }
}

/// A random window `[ws, we]` with `ws <= we`, loosely around `[0, horizon]`.
pub fn window(rng: &mut impl Rng, horizon: Tick) -> (Tick, Tick) {
    let a = rng.gen_range(0..=horizon + 2);
    let b = rng.gen_range(0..=horizon + 2);
    (a.min(b), a.max(b))
}

/// How many query arguments [`check_agreement`] samples per call.
#[derive(Debug, Clone, Copy)]
pub struct Sampling {
    pub ticks: usize,
    pub patterns: usize,
    pub windows: usize,
}

impl Sampling {
    pub const FULL: Sampling = Sampling {
        ticks: usize::MAX,
        patterns: usize::MAX,
        windows: 6,
    };

    pub const LIGHT: Sampling = Sampling {
        ticks: 3,
        patterns: 6,
        windows: 2,
    };
}

fn sample<T: Clone>(rng: &mut impl Rng, items: &[T], n: usize) -> Vec<T> {
    if n >= items.len() {
        items.to_vec()
    } else {
        items.choose_multiple(rng, n).cloned().collect()
    }
}

/// Compare every query operation of `actual` against `expected`, with
/// arguments sampled from the theory's vocabulary and ticks up to `horizon`.
/// Returns a description of the first disagreement.
pub fn check_agreement(
    expected: &dyn QueryContext,
    actual: &dyn QueryContext,
    desc: &TheoryDesc,
    horizon: Tick,
    how: Sampling,
    rng: &mut impl Rng,
) -> Result<(), String> {
    let patterns = sample(rng, &desc.patterns(), how.patterns);
    let mut ticks: Vec<Tick> = if how.ticks == usize::MAX {
        (0..=horizon + 1).collect()
    } else {
        (0..how.ticks).map(|_| rng.gen_range(0..=horizon + 1)).collect()
    };
    ticks.push(horizon);
    for q in &patterns {
        for &t in &ticks {
            let (a, b) = (expected.holds_at(q, t), actual.holds_at(q, t));
            if a != b {
                return Err(format!("holds_at({q:?}, {t}): expected {a:?}, got {b:?}"));
            }
        }
        let (a, b) = (expected.mholds_for(q), actual.mholds_for(q));
        if a != b {
            return Err(format!("mholds_for({q:?}): expected {a:?}, got {b:?}"));
        }
    }
    for _ in 0..how.windows {
        let (ws, we) = window(rng, horizon);
        for q in &patterns {
            let (a, b) = (expected.cached_between(ws, we, q), actual.cached_between(ws, we, q));
            if a != b {
                return Err(format!("cached_between({ws}, {we}, {q:?}): expected {a:?}, got {b:?}"));
            }
        }
        for q in desc.event_patterns() {
            let (a, b) = (expected.happens_in_window(&q, ws, we), actual.happens_in_window(&q, ws, we));
            if a != b {
                return Err(format!("happens_in_window({q:?}, {ws}, {we}): expected {a:?}, got {b:?}"));
            }
        }
    }
    Ok(())
}
