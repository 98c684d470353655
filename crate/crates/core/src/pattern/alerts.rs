//! Turning opened alert fluents into [`Alert`]s, and the feedback loop that
//! acknowledges each alert so the suppress guard can see it.

use crate::ec::{EcError, EffectsReport, EventOccurrence, Reasoner};
use crate::term::{Arg, Term};

use super::Alert;

pub(crate) fn sent_alert_term(alert_fluent: &Term) -> Term {
    Term::new("sent_alert", vec![Arg::Term(alert_fluent.clone())])
}

/// The `sent_alert(generic_alert([recipients..., rule_id]))` event acknowledging `alert`.
pub fn sent_alert_event(alert: &Alert) -> Term {
    let mut names: Vec<Arg> = alert.recipients.iter().map(|r| Arg::atom(r)).collect();
    names.push(Arg::atom(&alert.rule_id));
    sent_alert_term(&Term::new("generic_alert", vec![Arg::List(names)]))
}

fn symbol(a: &Arg) -> Option<String> {
    a.as_term().filter(|t| t.is_atom()).map(|t| t.functor().to_string())
}

/// Parse `generic_alert([r1, ..., rule_id]) = up(normal, rule_id)`.
fn as_alert(fluent: &Term, value: &Term) -> Option<(String, Vec<String>)> {
    if fluent.functor() != "generic_alert" || fluent.arity() != 1 {
        return None;
    }
    if value.functor() != "up" || value.arity() != 2 {
        return None;
    }
    let rule_id = symbol(value.arg(1)?)?;
    let Arg::List(names) = fluent.arg(0)? else {
        return None;
    };
    let mut names = names.iter().map(symbol).collect::<Option<Vec<_>>>()?;
    if names.pop()? != rule_id {
        return None;
    }
    Some((rule_id, names))
}

/// Every alert fluent raised by one update, ordered by `(raised_at, rule_id)`.
pub fn extract_alerts(report: &EffectsReport) -> Vec<Alert> {
    let mut out: Vec<Alert> = report
        .opened
        .iter()
        .filter_map(|m| {
            let (rule_id, recipients) = as_alert(&m.assignment.fluent, &m.assignment.value)?;
            Some(Alert {
                rule_id,
                recipients,
                raised_at: m.start,
                evidence: report.evidence_for(&m.assignment).to_vec(),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.raised_at, &a.rule_id).cmp(&(b.raised_at, &b.rule_id)));
    out
}

/// Drives a reasoner and acknowledges every alert at the tick it was raised,
/// which arms that rule's suppress guard.
pub struct AlertMonitor<R> {
    reasoner: R,
    alerts: Vec<Alert>,
}

impl<R: Reasoner> AlertMonitor<R> {
    pub fn new(reasoner: R) -> Self {
        AlertMonitor {
            reasoner,
            alerts: Vec::new(),
        }
    }

    /// Feed one event; returns the alerts it raised.
    pub fn push(&mut self, e: EventOccurrence) -> Result<Vec<Alert>, EcError> {
        let report = self.reasoner.update(e)?;
        let raised = extract_alerts(&report);
        for a in &raised {
            self.reasoner
                .update(EventOccurrence::new(sent_alert_event(a), report.time))?;
        }
        self.alerts.extend(raised.iter().cloned());
        Ok(raised)
    }

    pub fn reasoner(&self) -> &R {
        &self.reasoner
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn into_parts(self) -> (R, Vec<Alert>) {
        (self.reasoner, self.alerts)
    }
}
