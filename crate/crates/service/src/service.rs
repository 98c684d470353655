//! Patients, their engines and the deployed rules, independent of transport.
//!
//! Each patient has one engine; requests for one patient are serialized on its
//! mutex while different patients proceed in parallel. Locks are always taken
//! in the order rules, patient table, patient, log.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use thiserror::Error;

use ceckd::ec::{DomainTheory, EcError, FluentAssignment, FluentPattern, QueryContext, Reasoner, Tick, Witness};
use ceckd::pattern::{Alert, AlertMonitor, PatternError, RuleBook, RuleSpec};
use ceckd::{Engine, Term};

use crate::config::Config;
use crate::log::{LogEntry, LogError, NarrativeLog};
use crate::record::{format_timestamp, ParseError, SignalRecord};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown patient {0:?}")]
    UnknownPatient(String),
    #[error(transparent)]
    Rule(#[from] PatternError),
    #[error("record at {} predates the patient's last event at tick {last}", format_timestamp(.timestamp))]
    OutOfOrder { timestamp: DateTime<Utc>, last: Tick },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Engine(#[from] EcError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub alerts_raised: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplaySummary {
    pub events: usize,
    pub mvis: usize,
    pub alerts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deployed {
    pub rule_id: String,
    pub canonical_text: String,
    pub deployed: bool,
}

/// An alert as reported to clients: the engine alert plus its wall-clock time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlertView {
    pub patient_id: String,
    pub rule_id: String,
    pub recipients: Vec<String>,
    pub raised_at: Tick,
    pub timestamp: String,
    pub evidence: Vec<Witness>,
}

struct Patient {
    /// Timestamp of tick 0: the patient's first record.
    origin: DateTime<Utc>,
    monitor: AlertMonitor<Engine>,
}

impl Patient {
    fn new(origin: DateTime<Utc>, theory: &Arc<DomainTheory>) -> Result<Self, EcError> {
        Ok(Patient {
            origin,
            monitor: AlertMonitor::new(Engine::new(theory.clone())?),
        })
    }

    fn tick(&self, t: &DateTime<Utc>) -> Tick {
        (*t - self.origin).num_seconds()
    }

    fn time(&self, tick: Tick) -> DateTime<Utc> {
        self.origin + Duration::seconds(tick)
    }

    fn last_time(&self) -> Option<Tick> {
        self.monitor.reasoner().last_time()
    }

    fn push(&mut self, entry: &LogEntry) -> Result<Vec<Alert>, EcError> {
        self.monitor.push(entry.occurrence())
    }

    fn view(&self, id: &str, a: &Alert) -> AlertView {
        AlertView {
            patient_id: id.to_string(),
            rule_id: a.rule_id.clone(),
            recipients: a.recipients.clone(),
            raised_at: a.raised_at,
            timestamp: format_timestamp(&self.time(a.raised_at)),
            evidence: a.evidence.clone(),
        }
    }
}

struct Rules {
    book: RuleBook,
    theory: Arc<DomainTheory>,
}

pub struct Service {
    default_suppress: Option<Tick>,
    rules: RwLock<Rules>,
    patients: RwLock<BTreeMap<String, Arc<Mutex<Patient>>>>,
    log: Mutex<NarrativeLog>,
}

/// A poisoned lock only means another request panicked; the data it guards
/// is rebuilt from the log on the next deploy or replay.
fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn valid_patient_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn rebuild(id: &str, entries: &[&LogEntry], theory: &Arc<DomainTheory>) -> Result<Option<Patient>, EcError> {
    let Some(first) = entries.first() else {
        return Ok(None);
    };
    let mut p = Patient::new(first.timestamp - Duration::seconds(first.tick), theory)?;
    for e in entries {
        debug_assert_eq!(e.patient_id, id);
        p.push(e)?;
    }
    Ok(Some(p))
}

impl Service {
    /// Open the data directory and rebuild every patient from its log.
    pub fn open(config: &Config) -> Result<Self, ServiceError> {
        let log = NarrativeLog::open(&config.data_dir)?;
        let mut book = RuleBook::new();
        for spec in log.read_rules()? {
            book.deploy(&spec)?;
        }
        let svc = Service {
            default_suppress: config.default_suppress_window,
            rules: RwLock::new(Rules {
                theory: Arc::new(book.theory()),
                book,
            }),
            patients: RwLock::new(BTreeMap::new()),
            log: Mutex::new(log),
        };
        {
            let rules = svc.rules.read().unwrap_or_else(|e| e.into_inner());
            svc.rebuild_all(&rules.theory)?;
        }
        Ok(svc)
    }

    fn rebuild_all(&self, theory: &Arc<DomainTheory>) -> Result<(), ServiceError> {
        let mut table = self.patients.write().unwrap_or_else(|e| e.into_inner());
        let entries = lock(&self.log).read_events()?;
        let mut by_patient: BTreeMap<&str, Vec<&LogEntry>> = BTreeMap::new();
        for e in &entries {
            by_patient.entry(&e.patient_id).or_default().push(e);
        }
        table.clear();
        for (id, es) in by_patient {
            if let Some(p) = rebuild(id, &es, theory)? {
                table.insert(id.to_string(), Arc::new(Mutex::new(p)));
            }
        }
        Ok(())
    }

    pub fn rules(&self) -> Vec<RuleSpec> {
        let rules = self.rules.read().unwrap_or_else(|e| e.into_inner());
        rules.book.rules().iter().map(|c| c.spec.clone()).collect()
    }

    /// Compile `spec`; unless `dry_run`, persist and deploy it, then re-derive
    /// every patient's state under the new rule set.
    pub fn deploy(&self, mut spec: RuleSpec, dry_run: bool) -> Result<Deployed, ServiceError> {
        if spec.suppress_window.is_none() {
            spec.suppress_window = self.default_suppress;
        }
        let mut rules = self.rules.write().unwrap_or_else(|e| e.into_inner());
        let compiled = rules.book.check(&spec)?;
        let out = Deployed {
            rule_id: spec.rule_id.clone(),
            canonical_text: compiled.canonical_text,
            deployed: !dry_run,
        };
        if dry_run {
            return Ok(out);
        }
        lock(&self.log).append_rule(&spec)?;
        rules.book.deploy(&spec)?;
        rules.theory = Arc::new(rules.book.theory());
        self.rebuild_all(&rules.theory)?;
        tracing::info!(rule = %spec.rule_id, "rule deployed");
        Ok(out)
    }

    /// Append and apply one upload. The whole upload is rejected, and nothing
    /// logged, if its earliest record predates the patient's last event.
    pub fn ingest(&self, patient_id: &str, mut records: Vec<SignalRecord>) -> Result<IngestSummary, ServiceError> {
        if !valid_patient_id(patient_id) {
            return Err(ServiceError::BadRequest(format!("invalid patient id {patient_id:?}")));
        }
        records.sort_by_key(|r| r.timestamp);
        let Some(first) = records.first() else {
            return Ok(IngestSummary { accepted: 0, rejected: 0, alerts_raised: 0 });
        };
        let rules = self.rules.read().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = self.patient(patient_id) {
            return self.apply(&mut lock(&p), patient_id, &records);
        }
        // First upload for this patient: hold the table so a concurrent first
        // upload cannot create a second engine.
        let mut table = self.patients.write().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = table.get(patient_id).cloned() {
            drop(table);
            return self.apply(&mut lock(&p), patient_id, &records);
        }
        let mut p = Patient::new(first.timestamp, &rules.theory)?;
        let summary = self.apply(&mut p, patient_id, &records)?;
        table.insert(patient_id.to_string(), Arc::new(Mutex::new(p)));
        Ok(summary)
    }

    fn apply(&self, p: &mut Patient, patient_id: &str, records: &[SignalRecord]) -> Result<IngestSummary, ServiceError> {
        let first = &records[0];
        let start = p.tick(&first.timestamp);
        if start < 0 || p.last_time().is_some_and(|last| start < last) {
            return Err(ServiceError::OutOfOrder {
                timestamp: first.timestamp,
                last: p.last_time().unwrap_or(0),
            });
        }
        let entries: Vec<LogEntry> = records
            .iter()
            .map(|r| LogEntry {
                patient_id: patient_id.to_string(),
                timestamp: r.timestamp,
                tick: p.tick(&r.timestamp),
                event: r.signal.event(r.value),
            })
            .collect();
        lock(&self.log).append_events(&entries)?;
        let mut alerts_raised = 0;
        for e in &entries {
            alerts_raised += p.push(e)?.len();
        }
        Ok(IngestSummary {
            accepted: entries.len(),
            rejected: 0,
            alerts_raised,
        })
    }

    fn patient(&self, id: &str) -> Option<Arc<Mutex<Patient>>> {
        self.patients.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn has_patient(&self, id: &str) -> bool {
        self.patient(id).is_some()
    }

    /// Alerts raised in `[from, to]`, both optional. A patient with no events
    /// has no alerts.
    pub fn alerts(
        &self,
        patient_id: &str,
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    ) -> Result<Vec<AlertView>, ServiceError> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(ServiceError::BadRequest("`from` is after `to`".into()));
            }
        }
        let Some(p) = self.patient(patient_id) else {
            return Ok(Vec::new());
        };
        let p = lock(&p);
        let lo = from.map_or(Tick::MIN, |t| p.tick(&t));
        let hi = to.map_or(Tick::MAX, |t| p.tick(&t));
        Ok(p.monitor
            .alerts()
            .iter()
            .filter(|a| lo <= a.raised_at && a.raised_at <= hi)
            .map(|a| p.view(patient_id, a))
            .collect())
    }

    /// Assignments holding at `at` (default: the patient's latest event).
    pub fn fluents(
        &self,
        patient_id: &str,
        fluent: Option<Term>,
        at: Option<DateTime<Utc>>,
    ) -> Result<Vec<FluentAssignment>, ServiceError> {
        let p = self
            .patient(patient_id)
            .ok_or_else(|| ServiceError::UnknownPatient(patient_id.to_string()))?;
        let p = lock(&p);
        let t = match at {
            Some(at) => p.tick(&at),
            None => p.last_time().unwrap_or(0),
        };
        if t < 0 {
            return Ok(Vec::new());
        }
        let q = fluent.map_or_else(FluentPattern::any, FluentPattern::fluent);
        Ok(p.monitor.reasoner().holds_at(&q, t))
    }

    /// Discard the patient's engine and rebuild it from the log.
    pub fn replay(&self, patient_id: &str) -> Result<ReplaySummary, ServiceError> {
        let rules = self.rules.read().unwrap_or_else(|e| e.into_inner());
        let mut table = self.patients.write().unwrap_or_else(|e| e.into_inner());
        // Rebuild in place, under the patient's own lock, so no upload can land
        // between reading the log and swapping the engine.
        let existing = table.get(patient_id).cloned();
        let mut guard = existing.as_deref().map(lock);
        let entries = lock(&self.log).read_events()?;
        let mine: Vec<&LogEntry> = entries.iter().filter(|e| e.patient_id == patient_id).collect();
        let p = rebuild(patient_id, &mine, &rules.theory)?
            .ok_or_else(|| ServiceError::UnknownPatient(patient_id.to_string()))?;
        let summary = ReplaySummary {
            events: mine.len(),
            mvis: p.monitor.reasoner().mvi_tree().len(),
            alerts: p.monitor.alerts().len(),
        };
        match guard.as_deref_mut() {
            Some(slot) => *slot = p,
            None => {
                table.insert(patient_id.to_string(), Arc::new(Mutex::new(p)));
            }
        }
        Ok(summary)
    }
}
