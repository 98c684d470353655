//! Monitoring patterns over physiological signals: the rule specification
//! AST, the counting meta-predicates, compilation to alert rules and the
//! canonical rule text.

mod alerts;
mod compile;
mod meta;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ec::{Tick, Witness};
use crate::term::{Arg, Term};

pub use alerts::{extract_alerts, sent_alert_event, AlertMonitor};
pub use compile::{compile, signal_rule, signal_theory, CompiledRule, RuleBook, ALERT_STRATUM};
pub use meta::{constrained_more_or_equals_to, more_or_equals_to, Count, PairCount, Window};

/// Default pattern window: one day of seconds.
pub const DAY: Tick = 86_400;

/// Maximum nesting depth of a pattern.
pub const MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Cgm,
    Glucose,
    Hr,
    Weight,
    Meal,
    Activity,
}

impl Signal {
    pub const ALL: [Signal; 6] = [
        Signal::Cgm,
        Signal::Glucose,
        Signal::Hr,
        Signal::Weight,
        Signal::Meal,
        Signal::Activity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::Cgm => "cgm",
            Signal::Glucose => "glucose",
            Signal::Hr => "hr",
            Signal::Weight => "weight",
            Signal::Meal => "meal",
            Signal::Activity => "activity",
        }
    }

    pub fn from_name(name: &str) -> Option<Signal> {
        Signal::ALL.into_iter().find(|s| s.name() == name)
    }

    /// The fluent `obs(signal)`.
    pub fn fluent(self) -> Term {
        Term::new("obs", vec![Arg::atom(self.name())])
    }

    /// The event `obs(signal, value)`.
    pub fn event(self, value: f64) -> Term {
        Term::new("obs", vec![Arg::atom(self.name()), Arg::dec(value)])
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The fluent value `value(v)` carried by signal fluents.
pub fn signal_value(v: f64) -> Term {
    Term::new("value", vec![Arg::dec(v)])
}

/// Numeric reading inside a `value(v)` term.
pub fn reading(value: &Term) -> Option<f64> {
    if value.functor() == "value" && value.arity() == 1 {
        value.arg(0).and_then(Arg::as_f64)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn test(self, v: f64, threshold: f64) -> bool {
        match self {
            Comparator::Lt => v < threshold,
            Comparator::Gt => v > threshold,
            Comparator::Le => v <= threshold,
            Comparator::Ge => v >= threshold,
        }
    }

    /// Operator as written in rule text.
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "=<",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAtom {
    pub signal: Signal,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl ThresholdAtom {
    pub fn new(signal: Signal, comparator: Comparator, threshold: f64) -> Self {
        ThresholdAtom {
            signal,
            comparator,
            threshold,
        }
    }

    pub fn accepts(&self, value: &Term) -> bool {
        reading(value).is_some_and(|v| self.comparator.test(v, self.threshold))
    }
}

impl fmt::Display for ThresholdAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.signal,
            self.comparator.symbol(),
            crate::term::format_decimal(self.threshold)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    Simple {
        atom: ThresholdAtom,
        frequency: u32,
        window: Tick,
    },
    Complex {
        atoms: Vec<ThresholdAtom>,
        frequency: u32,
        window: Tick,
    },
    Sequential {
        first: Box<Pattern>,
        then: Box<Pattern>,
        window: Tick,
    },
    ComplexSequential {
        first: Box<Pattern>,
        then: Box<Pattern>,
        window: Tick,
    },
}

impl Pattern {
    pub fn simple(atom: ThresholdAtom, frequency: u32, window: Tick) -> Self {
        Pattern::Simple {
            atom,
            frequency,
            window,
        }
    }

    pub fn complex(atoms: Vec<ThresholdAtom>, frequency: u32, window: Tick) -> Self {
        Pattern::Complex {
            atoms,
            frequency,
            window,
        }
    }

    pub fn sequential(first: Pattern, then: Pattern, window: Tick) -> Self {
        Pattern::Sequential {
            first: Box::new(first),
            then: Box::new(then),
            window,
        }
    }

    pub fn complex_sequential(first: Pattern, then: Pattern, window: Tick) -> Self {
        Pattern::ComplexSequential {
            first: Box::new(first),
            then: Box::new(then),
            window,
        }
    }

    pub fn window(&self) -> Tick {
        match self {
            Pattern::Simple { window, .. }
            | Pattern::Complex { window, .. }
            | Pattern::Sequential { window, .. }
            | Pattern::ComplexSequential { window, .. } => *window,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Pattern::Simple { .. } | Pattern::Complex { .. } => 1,
            Pattern::Sequential { first, then, .. } | Pattern::ComplexSequential { first, then, .. } => {
                1 + first.depth().max(then.depth())
            }
        }
    }

    /// Threshold atoms and frequency of a leaf pattern.
    pub(crate) fn leaf(&self) -> Option<(&[ThresholdAtom], u32)> {
        match self {
            Pattern::Simple { atom, frequency, .. } => Some((std::slice::from_ref(atom), *frequency)),
            Pattern::Complex { atoms, frequency, .. } => Some((atoms, *frequency)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let depth = self.depth();
        if depth > MAX_DEPTH {
            return Err(PatternError::NestingTooDeep { depth });
        }
        if self.window() <= 0 {
            return Err(PatternError::InvalidWindow(self.window()));
        }
        match self {
            Pattern::Simple { atom, frequency, .. } => {
                check_frequency(*frequency)?;
                check_atom(atom)
            }
            Pattern::Complex { atoms, frequency, .. } => {
                check_frequency(*frequency)?;
                if atoms.is_empty() {
                    return Err(PatternError::EmptyAtoms);
                }
                atoms.iter().try_for_each(check_atom)
            }
            Pattern::Sequential { first, then, .. } => {
                for p in [first, then] {
                    if !matches!(**p, Pattern::Simple { .. }) {
                        return Err(PatternError::KindMismatch(
                            "sequential patterns combine simple patterns",
                        ));
                    }
                    p.validate()?;
                }
                Ok(())
            }
            Pattern::ComplexSequential { first, then, .. } => {
                for p in [first, then] {
                    p.validate()?;
                }
                Ok(())
            }
        }
    }
}

fn check_frequency(f: u32) -> Result<(), PatternError> {
    if f == 0 {
        Err(PatternError::InvalidFrequency)
    } else {
        Ok(())
    }
}

fn check_atom(a: &ThresholdAtom) -> Result<(), PatternError> {
    if a.threshold.is_finite() {
        Ok(())
    } else {
        Err(PatternError::NonFiniteThreshold(a.signal))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub rule_id: String,
    pub recipients: Vec<String>,
    pub pattern: Pattern,
    /// Defaults to the pattern window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppress_window: Option<Tick>,
}

impl RuleSpec {
    pub fn new(rule_id: &str, recipients: &[&str], pattern: Pattern) -> Self {
        RuleSpec {
            rule_id: rule_id.to_string(),
            recipients: recipients.iter().map(|s| s.to_string()).collect(),
            pattern,
            suppress_window: None,
        }
    }

    pub fn suppress(&self) -> Tick {
        self.suppress_window.unwrap_or_else(|| self.pattern.window())
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if self.rule_id.is_empty() {
            return Err(PatternError::EmptySymbol("rule_id"));
        }
        if self.recipients.is_empty() {
            return Err(PatternError::NoRecipients);
        }
        if self.recipients.iter().any(String::is_empty) {
            return Err(PatternError::EmptySymbol("recipient"));
        }
        if self.suppress() <= 0 {
            return Err(PatternError::InvalidWindow(self.suppress()));
        }
        self.pattern.validate()
    }

    /// The alert fluent `generic_alert([recipients..., rule_id])`.
    pub fn alert_fluent(&self) -> Term {
        let mut names: Vec<Arg> = self.recipients.iter().map(|r| Arg::atom(r)).collect();
        names.push(Arg::atom(&self.rule_id));
        Term::new("generic_alert", vec![Arg::List(names)])
    }

    /// The value `up(normal, rule_id)` raised by the alert.
    pub fn up_value(&self) -> Term {
        Term::new("up", vec![Arg::atom("normal"), Arg::atom(&self.rule_id)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern nesting depth {depth} exceeds {MAX_DEPTH}")]
    NestingTooDeep { depth: usize },
    #[error("rule id {0:?} is already deployed")]
    DuplicateRuleId(String),
    #[error("window must be positive, got {0}")]
    InvalidWindow(Tick),
    #[error("frequency must be at least 1")]
    InvalidFrequency,
    #[error("threshold for {0} is not finite")]
    NonFiniteThreshold(Signal),
    #[error("complex pattern without atoms")]
    EmptyAtoms,
    #[error("rule has no recipients")]
    NoRecipients,
    #[error("empty {0}")]
    EmptySymbol(&'static str),
    #[error("{0}")]
    KindMismatch(&'static str),
}

/// A raised, deduplicated notification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub rule_id: String,
    pub recipients: Vec<String>,
    pub raised_at: Tick,
    pub evidence: Vec<Witness>,
}
