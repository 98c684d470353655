//! Counting meta-predicates evaluated against a [`QueryContext`].

use std::collections::BTreeSet;

use crate::ec::{EcError, EventPattern, FluentPattern, Mvi, QueryContext, Tick, Witness};
use crate::term::Arg;

use super::{Signal, ThresholdAtom};

/// Closed-open tick window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Tick,
    pub end: Tick,
}

impl Window {
    pub fn new(start: Tick, end: Tick) -> Result<Self, EcError> {
        if start > end {
            Err(EcError::MalformedWindow { start, end })
        } else {
            Ok(Window { start, end })
        }
    }

    /// `[t - span, t]` clamped at tick 0, as a closed-open window.
    pub fn ending_at(t: Tick, span: Tick) -> Self {
        Window {
            start: t.saturating_sub(span).max(0),
            end: t + 1,
        }
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }
}

/// Result of [`more_or_equals_to`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Count {
    pub satisfied: bool,
    /// Every tick at which all atoms held, ascending.
    pub ticks: Vec<Tick>,
    /// One witness per atom per tick.
    pub evidence: Vec<Witness>,
}

/// Result of [`constrained_more_or_equals_to`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCount {
    pub satisfied: bool,
    /// Number of pairs `t1 < t2`.
    pub pairs: u64,
    /// The lexicographically first `frequency` pairs (all of them if fewer).
    pub witnesses: Vec<(Tick, Tick)>,
    pub evidence: Vec<Witness>,
}

/// Intervals of one atom's signal fluent whose value passes the threshold,
/// sorted by start. Intervals of one fluent never overlap.
fn passing(ctx: &dyn QueryContext, a: &ThresholdAtom, w: Window) -> Result<Vec<Mvi>, EcError> {
    let mut v = ctx.cached_between(w.start, w.end, &FluentPattern::fluent(a.signal.fluent()))?;
    v.retain(|m| a.accepts(&m.assignment.value));
    v.sort_by_key(|m| m.start);
    Ok(v)
}

fn covering(intervals: &[Mvi], t: Tick) -> Option<&Mvi> {
    let i = intervals.partition_point(|m| m.start <= t);
    intervals[..i].last().filter(|m| m.end > t)
}

/// Ticks in `w` carrying an observation of one of `signals`.
fn observation_ticks(
    ctx: &dyn QueryContext,
    signals: &BTreeSet<Signal>,
    w: Window,
) -> Result<BTreeSet<Tick>, EcError> {
    let mut ticks = BTreeSet::new();
    if w.start == w.end {
        return Ok(ticks);
    }
    for s in signals {
        let q = EventPattern::functor("obs", 2).with_first_arg(Arg::atom(s.name()));
        ticks.extend(ctx.happens_in_window(&q, w.start, w.end - 1)?.iter().map(|e| e.time));
    }
    Ok(ticks)
}

/// Count the observation ticks in `w` at which every atom holds. Satisfied when
/// the count reaches `frequency`.
pub fn more_or_equals_to(
    ctx: &dyn QueryContext,
    frequency: u32,
    atoms: &[ThresholdAtom],
    w: Window,
) -> Result<Count, EcError> {
    Window::new(w.start, w.end)?;
    let per_atom = atoms
        .iter()
        .map(|a| passing(ctx, a, w))
        .collect::<Result<Vec<_>, _>>()?;
    let signals: BTreeSet<Signal> = atoms.iter().map(|a| a.signal).collect();
    let mut out = Count::default();
    if atoms.is_empty() {
        return Ok(out);
    }
    for t in observation_ticks(ctx, &signals, w)? {
        let hits: Option<Vec<&Mvi>> = per_atom.iter().map(|iv| covering(iv, t)).collect();
        if let Some(hits) = hits {
            out.ticks.push(t);
            out.evidence.extend(hits.into_iter().map(|m| Witness {
                tick: t,
                assignment: m.assignment.clone(),
            }));
        }
    }
    out.satisfied = out.ticks.len() as u64 >= frequency as u64;
    Ok(out)
}

/// Count pairs `(t1, t2)` with `t1 < t2`, where `atoms1` all hold at the
/// observation tick `t1` in `w1` and `atoms2` all hold at `t2` in `w2`.
/// Satisfied when there are at least `frequency` pairs.
pub fn constrained_more_or_equals_to(
    ctx: &dyn QueryContext,
    frequency: u32,
    atoms1: &[ThresholdAtom],
    atoms2: &[ThresholdAtom],
    w1: Window,
    w2: Window,
) -> Result<PairCount, EcError> {
    Window::new(w1.start, w1.end)?;
    Window::new(w2.start, w2.end)?;
    if w2.end < w1.start {
        return Err(EcError::MalformedWindow {
            start: w1.start,
            end: w2.end,
        });
    }
    let first = more_or_equals_to(ctx, 1, atoms1, w1)?;
    let then = more_or_equals_to(ctx, 1, atoms2, w2)?;
    let mut out = PairCount::default();
    for &t2 in &then.ticks {
        out.pairs += first.ticks.partition_point(|&t1| t1 < t2) as u64;
    }
    'outer: for &t1 in &first.ticks {
        for &t2 in then.ticks.iter().filter(|&&t2| t2 > t1) {
            if out.witnesses.len() as u64 >= frequency as u64 {
                break 'outer;
            }
            out.witnesses.push((t1, t2));
        }
    }
    let firsts: BTreeSet<Tick> = out.witnesses.iter().map(|p| p.0).collect();
    let thens: BTreeSet<Tick> = out.witnesses.iter().map(|p| p.1).collect();
    out.evidence = first
        .evidence
        .into_iter()
        .filter(|w| firsts.contains(&w.tick))
        .chain(then.evidence.into_iter().filter(|w| thens.contains(&w.tick)))
        .collect();
    out.evidence.sort();
    out.evidence.dedup();
    out.satisfied = out.pairs >= frequency as u64;
    Ok(out)
}
