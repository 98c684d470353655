//! Pattern compilation goldens, and the counting meta-predicates and compiled
//! alert rules against brute-force evaluation over the raw readings.

use std::path::PathBuf;

use ceckd::ec::{AxiomEvaluator, EventOccurrence, NaiveState, Tick};
use ceckd::pattern::{
    compile, constrained_more_or_equals_to, more_or_equals_to, signal_theory, AlertMonitor,
    Comparator, Pattern, PatternError, RuleBook, RuleSpec, Signal, ThresholdAtom, Window, DAY,
};
use ceckd::Engine;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn atom(s: Signal, c: Comparator, v: f64) -> ThresholdAtom {
    ThresholdAtom::new(s, c, v)
}

fn rule0() -> RuleSpec {
    RuleSpec::new(
        "rule0",
        &["doctor"],
        Pattern::complex(
            vec![atom(Signal::Cgm, Comparator::Gt, 13.0), atom(Signal::Hr, Comparator::Gt, 120.0)],
            1,
            DAY,
        ),
    )
}

fn rule1() -> RuleSpec {
    let hyper = Pattern::complex(
        vec![atom(Signal::Hr, Comparator::Gt, 130.0), atom(Signal::Cgm, Comparator::Gt, 15.0)],
        1,
        DAY,
    );
    let hypo = Pattern::complex(
        vec![atom(Signal::Cgm, Comparator::Lt, 5.0), atom(Signal::Hr, Comparator::Lt, 60.0)],
        1,
        DAY,
    );
    RuleSpec::new("rule1", &["doctor"], Pattern::complex_sequential(hyper, hypo, DAY))
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted from its golden file");
}

#[test]
fn rule0_golden() {
    let text = compile(&rule0()).unwrap().canonical_text;
    golden("rule0.txt", &text);
    assert!(text.contains("cgm>13.0"));
    assert!(text.contains("hr>120.0"));
    assert!(text.contains("not(query_kd(happens_at(sent_alert(generic_alert([doctor,rule0])), Th), [Tsuppress,T]))"));
}

#[test]
fn rule1_golden() {
    let text = compile(&rule1()).unwrap().canonical_text;
    golden("rule1.txt", &text);
    let first = text.find("more_or_equals_to(1, (hr>130.0, cgm>15.0)").expect("first leaf");
    let then = text.find("constrained_more_or_equals_to(1, (hr>130.0, cgm>15.0), (cgm<5.0, hr<60.0)").expect("then leaf");
    assert!(first < then);
}

#[test]
fn compilation_is_byte_stable() {
    for spec in [rule0(), rule1()] {
        let a = compile(&spec).unwrap().canonical_text;
        let round: RuleSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(round, spec);
        assert_eq!(compile(&round).unwrap().canonical_text, a);
    }
}

#[test]
fn depth_three_rejected() {
    let leaf = || Pattern::simple(atom(Signal::Cgm, Comparator::Gt, 1.0), 1, 60);
    let inner = Pattern::complex_sequential(leaf(), leaf(), 60);
    let outer = Pattern::complex_sequential(inner, leaf(), 60);
    let spec = RuleSpec::new("deep", &["doctor"], outer);
    assert_eq!(compile(&spec).unwrap_err(), PatternError::NestingTooDeep { depth: 3 });
    assert_eq!(RuleBook::new().deploy(&spec).unwrap_err(), PatternError::NestingTooDeep { depth: 3 });
}

#[test]
fn invalid_specs_rejected() {
    let mut s = rule0();
    s.recipients.clear();
    assert_eq!(compile(&s).unwrap_err(), PatternError::NoRecipients);
    let s = RuleSpec::new("r", &["d"], Pattern::simple(atom(Signal::Cgm, Comparator::Gt, f64::NAN), 1, 60));
    assert!(matches!(compile(&s), Err(PatternError::NonFiniteThreshold(Signal::Cgm))));
    let s = RuleSpec::new("r", &["d"], Pattern::simple(atom(Signal::Cgm, Comparator::Gt, 1.0), 0, 60));
    assert_eq!(compile(&s).unwrap_err(), PatternError::InvalidFrequency);
    let s = RuleSpec::new("r", &["d"], Pattern::simple(atom(Signal::Cgm, Comparator::Gt, 1.0), 1, 0));
    assert!(matches!(compile(&s), Err(PatternError::InvalidWindow(0))));
    let s = RuleSpec::new("r", &["d"], Pattern::complex(vec![], 1, 60));
    assert_eq!(compile(&s).unwrap_err(), PatternError::EmptyAtoms);
}

// Brute force: a signal's value at tick u is its last reading at or before u.

#[derive(Debug, Clone, Copy)]
struct Reading {
    t: Tick,
    signal: Signal,
    value: f64,
}

fn value_at(readings: &[Reading], s: Signal, u: Tick) -> Option<f64> {
    readings.iter().rfind(|r| r.signal == s && r.t <= u).map(|r| r.value)
}

fn all_hold(readings: &[Reading], atoms: &[ThresholdAtom], u: Tick) -> bool {
    atoms.iter().all(|a| {
        value_at(readings, a.signal, u).is_some_and(|v| a.comparator.test(v, a.threshold))
    })
}

/// Observation ticks in `[lo, hi]` of any atom's signal at which all atoms hold.
fn brute_ticks(readings: &[Reading], atoms: &[ThresholdAtom], lo: Tick, hi: Tick) -> Vec<Tick> {
    let mut ticks: Vec<Tick> = readings
        .iter()
        .filter(|r| lo <= r.t && r.t <= hi && atoms.iter().any(|a| a.signal == r.signal))
        .map(|r| r.t)
        .collect();
    ticks.dedup();
    ticks.retain(|&u| all_hold(readings, atoms, u));
    ticks
}

fn brute_pairs(a: &[Tick], b: &[Tick]) -> u64 {
    let mut n = 0;
    for t1 in a {
        for t2 in b {
            if t1 < t2 {
                n += 1;
            }
        }
    }
    n
}

fn brute_satisfied(readings: &[Reading], p: &Pattern, t: Tick) -> bool {
    let leaf = |p: &Pattern| match p {
        Pattern::Simple { atom, frequency, .. } => (vec![*atom], *frequency),
        Pattern::Complex { atoms, frequency, .. } => (atoms.clone(), *frequency),
        _ => unreachable!("nested leaf"),
    };
    match p {
        Pattern::Simple { .. } | Pattern::Complex { .. } => {
            let (atoms, f) = leaf(p);
            brute_ticks(readings, &atoms, (t - p.window()).max(0), t).len() as u64 >= f as u64
        }
        Pattern::Sequential { first, then, window } | Pattern::ComplexSequential { first, then, window } => {
            let ((a1, f1), (a2, f2)) = (leaf(first), leaf(then));
            let lo1 = (t - first.window().min(*window)).max(0);
            let lo2 = (t - then.window().min(*window)).max(0);
            let t1 = brute_ticks(readings, &a1, lo1, t);
            let t2 = brute_ticks(readings, &a2, lo2, t);
            t1.len() as u64 >= f1 as u64 && brute_pairs(&t1, &t2) >= f2 as u64
        }
    }
}

const SIGNALS: [Signal; 3] = [Signal::Cgm, Signal::Hr, Signal::Weight];

fn random_readings(rng: &mut impl Rng, n: usize, gap: Tick) -> Vec<Reading> {
    let mut t = 0;
    (0..n)
        .map(|_| {
            t += rng.gen_range(0..=gap);
            let signal = SIGNALS[rng.gen_range(0..SIGNALS.len())];
            Reading {
                t,
                signal,
                value: rng.gen_range(0..20) as f64 * 0.5,
            }
        })
        .collect()
}

fn random_atoms(rng: &mut impl Rng) -> Vec<ThresholdAtom> {
    let cmps = [Comparator::Lt, Comparator::Gt, Comparator::Le, Comparator::Ge];
    (0..rng.gen_range(1..=3))
        .map(|_| {
            atom(
                SIGNALS[rng.gen_range(0..SIGNALS.len())],
                cmps[rng.gen_range(0..cmps.len())],
                rng.gen_range(0..20) as f64 * 0.5,
            )
        })
        .collect()
}

fn signal_engine(readings: &[Reading]) -> AxiomEvaluator {
    let events: Vec<_> = readings
        .iter()
        .map(|r| EventOccurrence::new(r.signal.event(r.value), r.t))
        .collect();
    AxiomEvaluator::from_narrative(signal_theory(), &events).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn more_or_equals_to_matches_brute_force(seed in any::<u64>(), freq in 1u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let readings = random_readings(&mut rng, 40, 4);
        let atoms = random_atoms(&mut rng);
        let ctx = signal_engine(&readings);
        let horizon = readings.last().unwrap().t + 2;
        for _ in 0..10 {
            let t = rng.gen_range(0..=horizon);
            let span = rng.gen_range(0..=horizon);
            let w = Window::ending_at(t, span);
            let c = more_or_equals_to(&ctx, freq, &atoms, w).unwrap();
            let expected = brute_ticks(&readings, &atoms, w.start, t);
            prop_assert_eq!(&c.ticks, &expected);
            prop_assert_eq!(c.satisfied, expected.len() as u64 >= freq as u64);
            prop_assert_eq!(c.evidence.len(), expected.len() * atoms.len());
        }
    }

    #[test]
    fn constrained_count_matches_quadratic_enumeration(seed in any::<u64>(), freq in 1u32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let readings = random_readings(&mut rng, 40, 4);
        let (a1, a2) = (random_atoms(&mut rng), random_atoms(&mut rng));
        let ctx = signal_engine(&readings);
        let horizon = readings.last().unwrap().t + 2;
        for _ in 0..10 {
            let t = rng.gen_range(0..=horizon);
            let w1 = Window::ending_at(t, rng.gen_range(0..=horizon));
            let w2 = Window::ending_at(t, rng.gen_range(0..=horizon));
            let c = constrained_more_or_equals_to(&ctx, freq, &a1, &a2, w1, w2).unwrap();
            let t1 = brute_ticks(&readings, &a1, w1.start, t);
            let t2 = brute_ticks(&readings, &a2, w2.start, t);
            let pairs = brute_pairs(&t1, &t2);
            prop_assert_eq!(c.pairs, pairs);
            prop_assert_eq!(c.satisfied, pairs >= freq as u64);
            prop_assert_eq!(c.witnesses.len() as u64, pairs.min(freq as u64));
            for (x, y) in &c.witnesses {
                prop_assert!(x < y && t1.contains(x) && t2.contains(y));
            }
        }
    }
}

/// Alternating low and high glucose/heart-rate episodes with noise.
fn hypo_hyper_trace(rng: &mut impl Rng, episodes: usize) -> Vec<Reading> {
    let mut out = Vec::new();
    let mut t: Tick = 0;
    for i in 0..episodes {
        let hyper = i % 2 == 1;
        for _ in 0..rng.gen_range(2..6) {
            t += rng.gen_range(0..=900);
            let (cgm, hr): (f64, f64) = if hyper {
                (rng.gen_range(12.0..19.0), rng.gen_range(110.0..150.0))
            } else {
                (rng.gen_range(3.0..7.0), rng.gen_range(45.0..75.0))
            };
            let (cgm, hr) = ((cgm * 10.0f64).round() / 10.0, hr.round());
            if rng.gen_bool(0.5) {
                out.push(Reading { t, signal: Signal::Cgm, value: cgm });
                out.push(Reading { t, signal: Signal::Hr, value: hr });
            } else {
                out.push(Reading { t, signal: Signal::Hr, value: hr });
                t += rng.gen_range(1..=120);
                out.push(Reading { t, signal: Signal::Cgm, value: cgm });
            }
        }
        t += rng.gen_range(1_000..20_000);
    }
    out
}

fn trace_rules() -> Vec<RuleSpec> {
    let hour = 3600;
    let hyper = Pattern::complex(
        vec![atom(Signal::Hr, Comparator::Gt, 130.0), atom(Signal::Cgm, Comparator::Gt, 15.0)],
        1,
        2 * hour,
    );
    let hypo = Pattern::complex(
        vec![atom(Signal::Cgm, Comparator::Lt, 5.0), atom(Signal::Hr, Comparator::Lt, 60.0)],
        1,
        6 * hour,
    );
    let mut r0 = rule0();
    r0.pattern = Pattern::complex(
        vec![atom(Signal::Cgm, Comparator::Gt, 13.0), atom(Signal::Hr, Comparator::Gt, 120.0)],
        2,
        4 * hour,
    );
    r0.suppress_window = Some(3 * hour);
    let mut hypo_first = RuleSpec::new("hypo_then_hyper", &["doctor", "nurse"], Pattern::complex_sequential(hypo.clone(), hyper.clone(), 8 * hour));
    hypo_first.suppress_window = Some(hour);
    let hyper_first = RuleSpec::new("hyper_then_hypo", &["doctor"], Pattern::complex_sequential(hyper, hypo, 12 * hour));
    let low = RuleSpec::new(
        "low",
        &["nurse"],
        Pattern::sequential(
            Pattern::simple(atom(Signal::Cgm, Comparator::Le, 4.0), 2, hour),
            Pattern::simple(atom(Signal::Cgm, Comparator::Ge, 5.0), 1, 2 * hour),
            2 * hour,
        ),
    );
    vec![r0, hypo_first, hyper_first, low]
}

/// Replay `readings` through the monitor and through per-tick brute force.
fn alerts_vs_brute_force<R: ceckd::ec::Reasoner>(reasoner: R, specs: &[RuleSpec], readings: &[Reading]) -> Vec<(Tick, String)> {
    let mut monitor = AlertMonitor::new(reasoner);
    let mut actual = Vec::new();
    for r in readings {
        for a in monitor.push(EventOccurrence::new(r.signal.event(r.value), r.t)).unwrap() {
            actual.push((a.raised_at, a.rule_id));
        }
    }

    let mut expected = Vec::new();
    let mut last: Vec<Option<Tick>> = vec![None; specs.len()];
    for i in 0..readings.len() {
        let prefix = &readings[..=i];
        let t = readings[i].t;
        let mut fired: Vec<(Tick, String)> = Vec::new();
        for (j, spec) in specs.iter().enumerate() {
            let blocked = last[j].is_some_and(|l| l >= t - spec.suppress());
            if !blocked && brute_satisfied(prefix, &spec.pattern, t) {
                fired.push((t, spec.rule_id.clone()));
                last[j] = Some(t);
            }
        }
        fired.sort();
        expected.extend(fired);
    }
    assert_eq!(actual, expected);
    actual
}

#[test]
fn trace_alerts_match_brute_force() {
    let specs = trace_rules();
    let mut book = RuleBook::new();
    for s in &specs {
        book.deploy(s).unwrap();
    }
    let theory = std::sync::Arc::new(book.theory());
    let mut total = 0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let readings = hypo_hyper_trace(&mut rng, 12);
        let a = alerts_vs_brute_force(Engine::new(theory.clone()).unwrap(), &specs, &readings);
        let b = alerts_vs_brute_force(NaiveState::new(theory.clone()).unwrap(), &specs, &readings);
        assert_eq!(a, b, "seed {seed}");
        total += a.len();
    }
    assert!(total > 40, "trace too quiet to exercise the rules: {total} alerts");
}

#[test]
fn rule0_hand_trace_one_alert_per_suppress_window() {
    let mut book = RuleBook::new();
    book.deploy(&rule0()).unwrap();
    let mut m = AlertMonitor::new(Engine::new(book.theory()).unwrap());
    let mut push = |t: Tick, s: Signal, v: f64| m.push(EventOccurrence::new(s.event(v), t)).unwrap().len();
    let mut raised = 0;
    // Three days of readings that satisfy rule0 every ten minutes.
    for k in 0..(3 * DAY / 600) {
        let t = k * 600;
        raised += push(t, Signal::Cgm, 14.0);
        raised += push(t + 1, Signal::Hr, 125.0);
    }
    // Fires at tick 1. The guard covers [T - 1 day, T], so the next firing is
    // the first observation strictly more than a day later.
    assert_eq!(raised, 3);
    let ticks: Vec<Tick> = m.alerts().iter().map(|a| a.raised_at).collect();
    assert_eq!(ticks, vec![1, DAY + 600, 2 * DAY + 601]);
}
