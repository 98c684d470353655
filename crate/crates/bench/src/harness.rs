//! Streaming a narrative through an engine while sampling latency, index work
//! and structure size.

use std::hint::black_box;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ceckd::pattern::{signal_theory, signal_value, AlertMonitor, Signal, DAY};
use ceckd::{
    DomainTheory, EcError, Engine, EventOccurrence, EventPattern, FluentPattern, NaiveState,
    Parallelism, QueryContext, Reasoner, Tick,
};
use ceckd_service::BootstrapError;

use crate::config::{BenchConfig, ConfigError, EngineKind, QueryMix, RuleSet};
use crate::stats::{mean, Stat};
use crate::workload::{narrative, patient_narratives, rule_book};

/// Metrics are sampled once per this many events.
pub const SAMPLE_EVERY: usize = 100;
/// Events excluded from latency statistics while the indexes warm up.
pub const WARMUP: usize = 100;
/// Events checked against the baseline before results are reported.
pub const VERIFY_PREFIX: usize = 1000;
/// Each sampled query is repeated this many times and averaged.
pub const QUERY_REPS: usize = 128;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("building workload: {0}")]
    Workload(#[from] BootstrapError),
    #[error("engine rejected an event: {0}")]
    Engine(#[from] EcError),
    #[error("ceckd and the baseline disagree: {0}")]
    Diverged(String),
    #[error("narrative ran out after {mvis} intervals, wanted {wanted}")]
    ShortNarrative { mvis: usize, wanted: usize },
    #[error("writing {path}: {source}")]
    Output { path: String, source: csv::Error },
}

/// An engine the harness can instrument.
pub trait Probe: Reasoner + Send {
    /// Index work so far: kd nodes visited, or entries scanned by the baseline.
    fn work(&self) -> u64;
    fn mvi_count(&self) -> usize;
}

impl Probe for Engine {
    fn work(&self) -> u64 {
        let s = self.stats();
        s.mvi_tree.visited_nodes + s.event_tree.visited_nodes
    }

    fn mvi_count(&self) -> usize {
        self.mvi_tree().len()
    }
}

impl Probe for NaiveState {
    fn work(&self) -> u64 {
        self.scan_count()
    }

    fn mvi_count(&self) -> usize {
        self.cached().len()
    }
}

pub fn bench_theory(rules: RuleSet) -> Arc<DomainTheory> {
    Arc::new(match rules {
        RuleSet::Observations => signal_theory(),
        RuleSet::Clinical => rule_book().theory(),
    })
}

/// One sampled point of a run, averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// Events processed when the sample was taken.
    pub event_index: usize,
    /// Mean update latency over the preceding sample period.
    pub update_ns: f64,
    pub update_ns_sd: f64,
    pub query_ns: f64,
    pub query_ns_sd: f64,
    /// Index work per query: kd nodes visited, or entries scanned.
    pub visits: f64,
    pub mvis: usize,
    pub structure_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    index: usize,
    query_ns: f64,
    visits: f64,
    mvis: usize,
    bytes: usize,
}

struct Trace {
    update_ns: Vec<u64>,
    samples: Vec<Sample>,
    elapsed: Duration,
    alerts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub engine: EngineKind,
    pub query_mix: QueryMix,
    pub rules: RuleSet,
    pub events: usize,
    pub repeats: usize,
    /// Mean update latency after warm-up, one value per repeat.
    pub update_ns: Stat,
    pub first_decile_ns: Stat,
    pub last_decile_ns: Stat,
    /// Last-decile over first-decile mean update latency.
    pub decile_ratio: Stat,
    /// Query latency over the samples of the last decile.
    pub final_query_ns: Stat,
    pub final_visits: f64,
    pub final_mvis: usize,
    pub final_bytes: usize,
    /// Events per second including sampling overhead.
    pub throughput_eps: Stat,
    pub alerts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub summary: Summary,
}

fn query_for<R: QueryContext>(r: &R, mix: QueryMix, now: Tick) -> FluentPattern {
    match mix {
        QueryMix::UnboundHoldsAt => FluentPattern::any(),
        QueryMix::GroundHoldsAt => {
            let cgm = Signal::Cgm.fluent();
            let value = r
                .holds_at(&FluentPattern::fluent(cgm.clone()), now)
                .into_iter()
                .next()
                .map_or_else(|| signal_value(0.0), |a| a.value);
            FluentPattern::ground(cgm, value)
        }
    }
}

fn sample<R: Probe>(r: &R, mix: QueryMix, now: Tick, index: usize) -> Sample {
    let q = query_for(r, mix, now);
    let w0 = r.work();
    let t0 = Instant::now();
    for _ in 0..QUERY_REPS {
        black_box(r.holds_at(black_box(&q), now));
    }
    let ns = t0.elapsed().as_nanos() as f64 / QUERY_REPS as f64;
    Sample {
        index,
        query_ns: ns,
        visits: (r.work() - w0) as f64 / QUERY_REPS as f64,
        mvis: r.mvi_count(),
        bytes: r.structure_bytes(),
    }
}

fn trace<R: Probe>(reasoner: R, events: &[EventOccurrence], mix: QueryMix) -> Result<Trace, EcError> {
    let mut m = AlertMonitor::new(reasoner);
    let mut update_ns = Vec::with_capacity(events.len());
    let mut samples = Vec::with_capacity(events.len() / SAMPLE_EVERY);
    let start = Instant::now();
    for (i, e) in events.iter().enumerate() {
        let now = e.time;
        let t0 = Instant::now();
        m.push(e.clone())?;
        update_ns.push(t0.elapsed().as_nanos() as u64);
        if (i + 1) % SAMPLE_EVERY == 0 || i + 1 == events.len() {
            samples.push(sample(m.reasoner(), mix, now, i + 1));
        }
    }
    Ok(Trace {
        update_ns,
        samples,
        elapsed: start.elapsed(),
        alerts: m.alerts().len(),
    })
}

fn trace_kind(kind: EngineKind, theory: &Arc<DomainTheory>, events: &[EventOccurrence], mix: QueryMix) -> Result<Trace, EcError> {
    match kind {
        EngineKind::Naive => trace(NaiveState::new(theory.clone())?, events, mix),
        EngineKind::Ceckd => trace(Engine::new(theory.clone())?, events, mix),
    }
}

/// Index ranges of the first and last deciles of `n` events. The first skips
/// the warm-up and is widened to a full decile if the warm-up swallows it.
pub fn decile_bounds(n: usize) -> ((usize, usize), (usize, usize)) {
    let warm = WARMUP.min(n / 10);
    let d = (n / 10).max(1);
    let end = if d > warm { d } else { warm + d };
    ((warm, end.min(n)), (n - d, n))
}

fn mean_u64(xs: &[u64]) -> f64 {
    mean(xs.iter().map(|&x| x as f64))
}

fn summarize(config: &BenchConfig, traces: &[Trace]) -> (Vec<BenchRow>, Summary) {
    let n = config.events;
    let ((f0, f1), (l0, l1)) = decile_bounds(n);
    let warm = WARMUP.min(n / 10);
    let per = |f: &dyn Fn(&Trace) -> f64| Stat::of(&traces.iter().map(f).collect::<Vec<_>>());

    let first = per(&|t| mean_u64(&t.update_ns[f0..f1]));
    let last = per(&|t| mean_u64(&t.update_ns[l0..l1]));
    let ratio = per(&|t| mean_u64(&t.update_ns[l0..l1]) / mean_u64(&t.update_ns[f0..f1]));
    let final_query = per(&|t| mean(t.samples.iter().filter(|s| s.index > l0).map(|s| s.query_ns)));

    let rows: Vec<BenchRow> = (0..traces[0].samples.len())
        .map(|k| {
            let s0 = traces[0].samples[k];
            let lo = if k == 0 { 0 } else { traces[0].samples[k - 1].index };
            let upd = Stat::of(&traces.iter().map(|t| mean_u64(&t.update_ns[lo..s0.index])).collect::<Vec<_>>());
            let q = Stat::of(&traces.iter().map(|t| t.samples[k].query_ns).collect::<Vec<_>>());
            BenchRow {
                event_index: s0.index,
                update_ns: upd.mean,
                update_ns_sd: upd.stddev,
                query_ns: q.mean,
                query_ns_sd: q.stddev,
                visits: mean(traces.iter().map(|t| t.samples[k].visits)),
                mvis: s0.mvis,
                structure_bytes: s0.bytes,
            }
        })
        .collect();
    let end = *traces[0].samples.last().expect("at least one sample");
    let summary = Summary {
        engine: config.engine,
        query_mix: config.query_mix,
        rules: config.rules,
        events: n,
        repeats: traces.len(),
        update_ns: per(&|t| mean_u64(&t.update_ns[warm..])),
        first_decile_ns: first,
        last_decile_ns: last,
        decile_ratio: ratio,
        final_query_ns: final_query,
        final_visits: rows.last().map_or(0.0, |r| r.visits),
        final_mvis: end.mvis,
        final_bytes: end.bytes,
        throughput_eps: per(&|t| n as f64 / t.elapsed.as_secs_f64()),
        alerts: traces[0].alerts,
    };
    (rows, summary)
}

/// Stream one bootstrapped patient through the configured engine `repeats`
/// times. Results are returned only once the engine has been checked against
/// the baseline on the first [`VERIFY_PREFIX`] events under the clinical
/// rules, which exercise every query operation.
pub fn run(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let events = narrative(config.events, config.rng_seed)?;
    let theory = bench_theory(config.rules);
    let traces = (0..config.repeats)
        .map(|_| trace_kind(config.engine, &theory, &events, config.query_mix))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, summary) = summarize(config, &traces);
    verify_prefix(&events[..VERIFY_PREFIX.min(events.len())])?;
    if let Some(path) = &config.output {
        crate::report::write_rows(path, &rows)?;
    }
    Ok(BenchReport {
        config: config.clone(),
        rows,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcurrentReport {
    pub engine: EngineKind,
    pub rules: RuleSet,
    pub threads: usize,
    pub events_per_thread: usize,
    pub repeats: usize,
    pub wall_secs: Stat,
    /// Events per second summed over all engines.
    pub throughput_eps: Stat,
    /// Mean per-event update latency seen inside each thread.
    pub update_ns: Stat,
    /// Structure bytes of all engines at the end of the run.
    pub summed_bytes: usize,
    pub alerts: usize,
}

struct Worker {
    elapsed: Duration,
    bytes: usize,
    alerts: usize,
}

fn feed<R: Probe>(reasoner: R, events: &[EventOccurrence]) -> Result<Worker, EcError> {
    let mut m = AlertMonitor::new(reasoner);
    let t0 = Instant::now();
    for e in events {
        m.push(e.clone())?;
    }
    let elapsed = t0.elapsed();
    Ok(Worker {
        elapsed,
        bytes: m.reasoner().structure_bytes(),
        alerts: m.alerts().len(),
    })
}

/// `threads` independent engines, one bootstrapped patient each, started
/// together on their own threads.
pub fn run_concurrent(config: &BenchConfig) -> Result<ConcurrentReport, BenchError> {
    config.validate()?;
    let k = config.threads;
    let streams = patient_narratives(config.events, k, config.rng_seed, Parallelism::available())?;
    let theory = bench_theory(config.rules);
    let mut walls = Vec::new();
    let mut thr = Vec::new();
    let mut upd = Vec::new();
    let mut last = Vec::new();
    for _ in 0..config.repeats {
        let barrier = Barrier::new(k + 1);
        let (workers, wall) = std::thread::scope(|s| {
            let handles: Vec<_> = streams
                .iter()
                .map(|ev| {
                    let (theory, barrier) = (&theory, &barrier);
                    s.spawn(move || {
                        let r = match config.engine {
                            EngineKind::Naive => NaiveState::new(theory.clone()).map(|n| {
                                barrier.wait();
                                feed(n, ev)
                            }),
                            EngineKind::Ceckd => Engine::new(theory.clone()).map(|n| {
                                barrier.wait();
                                feed(n, ev)
                            }),
                        };
                        r.and_then(|x| x)
                    })
                })
                .collect();
            barrier.wait();
            let t0 = Instant::now();
            let out: Vec<_> = handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect();
            (out, t0.elapsed())
        });
        let workers = workers.into_iter().collect::<Result<Vec<_>, _>>()?;
        let total = (k * config.events) as f64;
        walls.push(wall.as_secs_f64());
        thr.push(total / wall.as_secs_f64());
        upd.push(mean(workers.iter().map(|w| w.elapsed.as_nanos() as f64 / config.events as f64)));
        last = workers;
    }
    Ok(ConcurrentReport {
        engine: config.engine,
        rules: config.rules,
        threads: k,
        events_per_thread: config.events,
        repeats: config.repeats,
        wall_secs: Stat::of(&walls),
        throughput_eps: Stat::of(&thr),
        update_ns: Stat::of(&upd),
        summed_bytes: last.iter().map(|w| w.bytes).sum(),
        alerts: last.iter().map(|w| w.alerts).sum(),
    })
}

fn agree<T: PartialEq + std::fmt::Debug>(what: &str, i: usize, a: T, b: T) -> Result<(), BenchError> {
    if a == b {
        Ok(())
    } else {
        Err(BenchError::Diverged(format!("event {i}, {what}: baseline {a:?}, ceckd {b:?}")))
    }
}

/// Feed `events` to both engines and compare alerts, current state, recent
/// intervals and recent events after every one of them, plus the full
/// interval set every [`SAMPLE_EVERY`] events and at the end.
pub fn verify_prefix(events: &[EventOccurrence]) -> Result<(), BenchError> {
    let theory = bench_theory(RuleSet::Clinical);
    let mut base = AlertMonitor::new(NaiveState::new(theory.clone())?);
    let mut kd = AlertMonitor::new(Engine::new(theory)?);
    let any = FluentPattern::any();
    for (i, e) in events.iter().enumerate() {
        let now = e.time;
        agree("alerts", i, base.push(e.clone())?, kd.push(e.clone())?)?;
        let (b, k) = (base.reasoner(), kd.reasoner());
        agree("holds_at", i, b.holds_at(&any, now), k.holds_at(&any, now))?;
        agree("holds_at(past)", i, b.holds_at(&any, now / 2), k.holds_at(&any, now / 2))?;
        let ws = (now - DAY).max(0);
        agree("cached_between", i, b.cached_between(ws, now + 1, &any)?, k.cached_between(ws, now + 1, &any)?)?;
        let hw = (now - 3600).max(0);
        let ep = EventPattern::any();
        agree("happens_in_window", i, b.happens_in_window(&ep, hw, now)?, k.happens_in_window(&ep, hw, now)?)?;
        if (i + 1) % SAMPLE_EVERY == 0 || i + 1 == events.len() {
            agree("mholds_for", i, b.mholds_for(&any), k.mholds_for(&any))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub mvis: usize,
    /// Mean kd nodes visited per ground `holds_at`.
    pub kd_visits: f64,
    /// Mean intervals scanned per ground `holds_at` by the baseline.
    pub naive_scans: f64,
}

/// Grow one narrative through both engines and, each time the interval count
/// reaches the next of `sizes`, time `queries` ground `holds_at` lookups of
/// randomly chosen cached intervals at ticks inside them.
pub fn visit_scaling(
    sizes: &[usize],
    queries: usize,
    rules: RuleSet,
    seed: u64,
) -> Result<Vec<ScalingPoint>, BenchError> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    let wanted = sizes.last().copied().unwrap_or(0);
    let events = narrative(wanted + wanted / 2 + 100, seed)?;
    let theory = bench_theory(rules);
    let mut base = AlertMonitor::new(NaiveState::new(theory.clone())?);
    let mut kd = AlertMonitor::new(Engine::new(theory)?);
    let mut next = events.into_iter();
    let mut out = Vec::new();
    for n in sizes {
        while kd.reasoner().mvi_count() < n {
            let e = next.next().ok_or(BenchError::ShortNarrative {
                mvis: kd.reasoner().mvi_count(),
                wanted: n,
            })?;
            base.push(e.clone())?;
            kd.push(e)?;
        }
        let (b, k) = (base.reasoner(), kd.reasoner());
        let now = k.last_time().unwrap_or(0);
        let cached = k.mholds_for(&FluentPattern::any());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let (mut visits, mut scans) = (0u64, 0u64);
        for _ in 0..queries {
            let m = cached.choose(&mut rng).expect("intervals exist");
            let lo = m.start.max(0);
            let t = rng.gen_range(lo..m.end.min(now + 1).max(lo + 1));
            let q = FluentPattern::ground(m.assignment.fluent.clone(), m.assignment.value.clone());
            let (w0, s0) = (k.work(), b.work());
            let got = k.holds_at(&q, t);
            visits += k.work() - w0;
            let want = b.holds_at(&q, t);
            scans += b.work() - s0;
            agree("ground holds_at", n, want, got)?;
        }
        out.push(ScalingPoint {
            mvis: k.mvi_count(),
            kd_visits: visits as f64 / queries as f64,
            naive_scans: scans as f64 / queries as f64,
        });
    }
    Ok(out)
}
