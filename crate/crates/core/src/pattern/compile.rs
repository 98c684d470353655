//! Compilation of rule specifications into alert initiation rules and their
//! canonical rule text.

use std::fmt::Write as _;

use crate::ec::{Derived, DomainTheory, EventOccurrence, EventPattern, FluentAssignment, QueryContext, Rule, Tick, Witness};
use crate::term::{Arg, Term};

use super::alerts::sent_alert_term;
use super::meta::{constrained_more_or_equals_to, more_or_equals_to, Window};
use super::{Pattern, PatternError, RuleSpec, ThresholdAtom};

/// Stratum of compiled alert rules; signal rules run in stratum 0 before them.
pub const ALERT_STRATUM: u8 = 1;

/// `obs(S, V)` initiates `obs(S) = value(V)`.
pub fn signal_rule() -> Rule {
    Rule::new("obs/value", 0, |e: &EventOccurrence, _: &dyn QueryContext| {
        let ev = &e.event;
        if ev.functor() != "obs" || ev.arity() != 2 {
            return Vec::new();
        }
        let (Some(Arg::Term(signal)), Some(v @ (Arg::Dec(_) | Arg::Int(_)))) = (ev.arg(0), ev.arg(1)) else {
            return Vec::new();
        };
        let fluent = Term::new("obs", vec![Arg::Term(signal.clone())]);
        let value = Term::new("value", vec![v.clone()]);
        vec![FluentAssignment::new(fluent, value).into()]
    })
}

/// A theory holding only the signal rule.
pub fn signal_theory() -> DomainTheory {
    DomainTheory::new().initiates(signal_rule())
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub spec: RuleSpec,
    pub initiations: Vec<Rule>,
    pub canonical_text: String,
}

/// Leaf windows of a sequence: each leaf keeps its own span, capped by the
/// enclosing window.
fn leaf_spans(first: &Pattern, then: &Pattern, window: Tick) -> (Tick, Tick) {
    (first.window().min(window), then.window().min(window))
}

fn evaluate(p: &Pattern, ctx: &dyn QueryContext, t: Tick) -> Option<Vec<Witness>> {
    match p {
        Pattern::Simple { .. } | Pattern::Complex { .. } => {
            let (atoms, f) = p.leaf()?;
            let c = more_or_equals_to(ctx, f, atoms, Window::ending_at(t, p.window())).ok()?;
            c.satisfied.then_some(c.evidence)
        }
        Pattern::Sequential { first, then, window } | Pattern::ComplexSequential { first, then, window } => {
            let (a1, f1) = first.leaf()?;
            let (a2, f2) = then.leaf()?;
            let (s1, s2) = leaf_spans(first, then, *window);
            let (w1, w2) = (Window::ending_at(t, s1), Window::ending_at(t, s2));
            let c1 = more_or_equals_to(ctx, f1, a1, w1).ok()?;
            if !c1.satisfied {
                return None;
            }
            let c2 = constrained_more_or_equals_to(ctx, f2, a1, a2, w1, w2).ok()?;
            c2.satisfied.then_some(c2.evidence)
        }
    }
}

pub fn compile(spec: &RuleSpec) -> Result<CompiledRule, PatternError> {
    spec.validate()?;
    let alert = spec.alert_fluent();
    let sent_event = sent_alert_term(&alert);
    let sent_pattern = EventPattern::exact(&sent_event);
    let suppress = spec.suppress();

    let raise = {
        let pattern = spec.pattern.clone();
        let head = FluentAssignment::new(alert.clone(), spec.up_value());
        Rule::new(
            format!("{}/alert", spec.rule_id),
            ALERT_STRATUM,
            move |e: &EventOccurrence, ctx: &dyn QueryContext| {
                if e.event.functor() != "obs" || e.event.arity() != 2 {
                    return Vec::new();
                }
                let t = e.time;
                let recent = ctx
                    .happens_in_window(&sent_pattern, t.saturating_sub(suppress).max(0), t)
                    .unwrap_or_default();
                if !recent.is_empty() {
                    return Vec::new();
                }
                match evaluate(&pattern, ctx, t) {
                    Some(evidence) => vec![Derived::with_evidence(head.clone(), evidence)],
                    None => Vec::new(),
                }
            },
        )
    };

    let acknowledge = {
        let head = FluentAssignment::new(alert, Term::atom("sent"));
        Rule::new(
            format!("{}/sent", spec.rule_id),
            ALERT_STRATUM,
            move |e: &EventOccurrence, _: &dyn QueryContext| {
                if e.event == sent_event {
                    vec![head.clone().into()]
                } else {
                    Vec::new()
                }
            },
        )
    };

    Ok(CompiledRule {
        spec: spec.clone(),
        initiations: vec![raise, acknowledge],
        canonical_text: canonical_text(spec),
    })
}

fn atoms_text(atoms: &[ThresholdAtom]) -> String {
    match atoms {
        [one] => one.to_string(),
        _ => {
            let parts: Vec<String> = atoms.iter().map(ToString::to_string).collect();
            format!("({})", parts.join(", "))
        }
    }
}

const INDENT: &str = "    ";

fn canonical_text(spec: &RuleSpec) -> String {
    let alert = spec.alert_fluent();
    let window = spec.pattern.window();
    let mut body: Vec<String> = Vec::new();
    match &spec.pattern {
        p @ (Pattern::Simple { .. } | Pattern::Complex { .. }) => {
            let (atoms, f) = p.leaf().expect("leaf pattern");
            body.push(format!("Tbefore is T-{window}"));
            body.push(format!("more_or_equals_to({f}, {}, [Tbefore,T])", atoms_text(atoms)));
        }
        Pattern::Sequential { first, then, window } | Pattern::ComplexSequential { first, then, window } => {
            let (a1, f1) = first.leaf().expect("validated sequence");
            let (a2, f2) = then.leaf().expect("validated sequence");
            let (s1, s2) = leaf_spans(first, then, *window);
            let var = |span: Tick, own: &'static str| if span == *window { "Tbefore" } else { own };
            let (v1, v2) = (var(s1, "Tfirst"), var(s2, "Tthen"));
            if v1 == "Tbefore" || v2 == "Tbefore" {
                body.push(format!("Tbefore is T-{window}"));
            }
            if v1 != "Tbefore" {
                body.push(format!("Tfirst is T-{s1}"));
            }
            if v2 != "Tbefore" {
                body.push(format!("Tthen is T-{s2}"));
            }
            body.push(format!("more_or_equals_to({f1}, {}, [{v1},T])", atoms_text(a1)));
            body.push(format!(
                "constrained_more_or_equals_to({f2}, {}, {}, [{v1},T], [{v2},T])",
                atoms_text(a1),
                atoms_text(a2)
            ));
        }
    }
    body.push(format!("Tsuppress is T-{}", spec.suppress()));
    body.push(format!(
        "not(query_kd(happens_at(sent_alert({alert}), Th), [Tsuppress,T]))"
    ));

    let mut out = String::new();
    writeln!(out, "initiates_at({alert}={}, T) :-", spec.up_value()).unwrap();
    let last = body.len() - 1;
    for (i, line) in body.iter().enumerate() {
        let end = if i == last { "." } else { "," };
        writeln!(out, "{INDENT}{line}{end}").unwrap();
    }
    out.push('\n');
    writeln!(out, "initiates_at({alert}=sent, T) :-").unwrap();
    writeln!(out, "{INDENT}happens_at(sent_alert({alert}), T).").unwrap();
    out
}

/// The set of deployed rules.
#[derive(Debug, Clone, Default)]
pub struct RuleBook {
    compiled: Vec<CompiledRule>,
}

impl RuleBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compile without deploying; fails on the same conditions as [`deploy`](Self::deploy).
    pub fn check(&self, spec: &RuleSpec) -> Result<CompiledRule, PatternError> {
        if self.get(&spec.rule_id).is_some() {
            return Err(PatternError::DuplicateRuleId(spec.rule_id.clone()));
        }
        compile(spec)
    }

    pub fn deploy(&mut self, spec: &RuleSpec) -> Result<&CompiledRule, PatternError> {
        let c = self.check(spec)?;
        self.compiled.push(c);
        Ok(self.compiled.last().unwrap())
    }

    pub fn get(&self, rule_id: &str) -> Option<&CompiledRule> {
        self.compiled.iter().find(|c| c.spec.rule_id == rule_id)
    }

    pub fn rules(&self) -> &[CompiledRule] {
        &self.compiled
    }

    pub fn len(&self) -> usize {
        self.compiled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compiled.is_empty()
    }

    /// Signal rule plus every deployed rule, in deployment order.
    pub fn theory(&self) -> DomainTheory {
        self.compiled
            .iter()
            .flat_map(|c| c.initiations.iter().cloned())
            .fold(signal_theory(), DomainTheory::initiates)
    }
}
