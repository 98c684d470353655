//! Synthetic patient streams: a physiological seed generator and a day-segment
//! bootstrapper that grows a few seed streams into many long ones.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use ceckd::pattern::Signal;
use ceckd::Parallelism;

use crate::record::{PatientStream, SignalRecord};

/// Continuous glucose monitors sample every five minutes.
pub const CGM_PERIOD: i64 = 300;
pub const HR_PERIOD: i64 = 900;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("no seed stream has any records")]
    EmptySeed,
    #[error("target of {target} events is below the longest seed ({longest})")]
    TargetBelowSeed { target: usize, longest: usize },
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2014, 10, 1, 0, 0, 0).unwrap()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Glucose excursion `m` minutes after a meal: rises for an hour, decays over three.
fn meal_curve(m: f64) -> f64 {
    if m < 0.0 {
        0.0
    } else if m < 60.0 {
        m / 60.0
    } else {
        (-(m - 60.0) / 90.0).exp()
    }
}

struct Day {
    meals: Vec<(f64, f64)>,
    hypo: Option<(f64, f64)>,
    exercise: Option<(f64, f64, u8)>,
}

fn plan_day(rng: &mut impl Rng) -> Day {
    let meals = [7.5, 12.5, 19.0]
        .iter()
        .map(|h| (h * 60.0 + rng.gen_range(-30.0..30.0), rng.gen_range(2.5..10.0)))
        .collect();
    let hypo = rng
        .gen_bool(0.25)
        .then(|| (rng.gen_range(60.0..360.0), rng.gen_range(60.0..150.0)));
    let exercise = rng.gen_bool(0.6).then(|| {
        (
            rng.gen_range(9.0 * 60.0..20.0 * 60.0),
            rng.gen_range(30.0..90.0),
            rng.gen_range(1..=3),
        )
    });
    Day { meals, hypo, exercise }
}

/// One synthetic day of readings, sorted by time.
fn synth_day(rng: &mut impl Rng, day: DateTime<Utc>, baseline: f64, weight: f64) -> Vec<SignalRecord> {
    let plan = plan_day(rng);
    let at = |minute: f64| day + Duration::seconds((minute * 60.0) as i64);
    let in_span = |m: f64, (s, len): (f64, f64)| m >= s && m < s + len;
    let mut noise = 0.0;
    let glucose = |m: f64, noise: f64| {
        let meals: f64 = plan.meals.iter().map(|&(t, a)| a * meal_curve(m - t)).sum();
        let dip = if plan.hypo.is_some_and(|h| in_span(m, h)) { -5.0 } else { 0.0 };
        (baseline + meals + dip + noise).clamp(2.2, 22.0)
    };
    let mut out = Vec::with_capacity(400);

    for k in 0..(86_400 / CGM_PERIOD) {
        let m = (k * CGM_PERIOD) as f64 / 60.0;
        noise = 0.8 * noise + rng.gen_range(-0.4..0.4);
        out.push(SignalRecord::new(at(m), Signal::Cgm, round1(glucose(m, noise))));
    }
    for k in 0..(86_400 / HR_PERIOD) {
        let m = (k * HR_PERIOD) as f64 / 60.0;
        let asleep = !(6.5 * 60.0..23.0 * 60.0).contains(&m);
        let mut hr = if asleep { 57.0 } else { 74.0 } + rng.gen_range(-6.0..6.0);
        if let Some((s, len, level)) = plan.exercise {
            if in_span(m, (s, len)) {
                hr += 25.0 * level as f64 + rng.gen_range(0.0..15.0);
            }
        }
        out.push(SignalRecord::new(at(m), Signal::Hr, hr.round()));
    }
    for (i, &(t, _)) in plan.meals.iter().enumerate() {
        out.push(SignalRecord::new(at(t), Signal::Meal, (i + 1) as f64));
        let poc = glucose(t - 5.0, 0.0) + rng.gen_range(-0.5..0.5);
        out.push(SignalRecord::new(at(t - 5.0), Signal::Glucose, round1(poc)));
    }
    out.push(SignalRecord::new(at(22.5 * 60.0), Signal::Glucose, round1(glucose(22.5 * 60.0, 0.0))));
    if let Some((s, _, level)) = plan.exercise {
        out.push(SignalRecord::new(at(s), Signal::Activity, level as f64));
    }
    out.push(SignalRecord::new(at(7.0 * 60.0), Signal::Weight, round1(weight + rng.gen_range(-0.4..0.4))));
    out.sort_by_key(|r| r.timestamp);
    out
}

/// A synthetic seed patient: `days` days of CGM every five minutes, heart rate
/// every fifteen, meals, point-of-care glucose, activity and weight.
pub fn synthetic_stream(patient_id: &str, days: usize, seed: u64) -> PatientStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline = rng.gen_range(5.5..9.0);
    let weight = rng.gen_range(55.0..95.0);
    let records = (0..days)
        .flat_map(|d| synth_day(&mut rng, epoch() + Duration::days(d as i64), baseline, weight))
        .collect();
    PatientStream {
        patient_id: patient_id.to_string(),
        records,
    }
}

/// Seven seed patients of `days` days each.
pub fn synthetic_seeds(days: usize, seed: u64) -> Vec<PatientStream> {
    (0..7)
        .map(|i| synthetic_stream(&format!("seed{i}"), days, seed.wrapping_add(i)))
        .collect()
}

fn day_segments(stream: &PatientStream) -> Vec<&[SignalRecord]> {
    let mut by_day: BTreeMap<NaiveDate, (usize, usize)> = BTreeMap::new();
    for (i, r) in stream.records.iter().enumerate() {
        let e = by_day.entry(r.timestamp.date_naive()).or_insert((i, i));
        e.1 = i + 1;
    }
    by_day.values().map(|&(a, b)| &stream.records[a..b]).collect()
}

/// Build `patient_count` streams of at least `target_events` records each by
/// drawing day-long segments of the seeds with replacement and laying them on
/// consecutive days from [`epoch`]. Each output overshoots the target by less
/// than one segment. Patient `i` depends only on `rng_seed` and `i`.
pub fn bootstrap(
    seeds: &[PatientStream],
    target_events: usize,
    patient_count: usize,
    rng_seed: u64,
    par: Parallelism,
) -> Result<Vec<PatientStream>, BootstrapError> {
    let longest = seeds.iter().map(PatientStream::len).max().unwrap_or(0);
    if longest == 0 {
        return Err(BootstrapError::EmptySeed);
    }
    if target_events < longest {
        return Err(BootstrapError::TargetBelowSeed { target: target_events, longest });
    }
    let pool: Vec<&[SignalRecord]> = seeds.iter().flat_map(day_segments).collect();
    let base = epoch();
    Ok(par.map((0..patient_count).collect(), |i| {
        let mut rng = rng_for(rng_seed, i as u64);
        let mut records = Vec::with_capacity(target_events + 512);
        let mut day = 0i64;
        while records.len() < target_events {
            let seg = pool[rng.gen_range(0..pool.len())];
            let origin = seg[0].timestamp.date_naive().and_hms_opt(0, 0, 0).unwrap().and_utc();
            let shift = base + Duration::days(day) - origin;
            records.extend(seg.iter().map(|r| SignalRecord { timestamp: r.timestamp + shift, ..r.clone() }));
            day += 1;
        }
        PatientStream {
            patient_id: format!("p{i:03}"),
            records,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgm_cadence() {
        let s = synthetic_stream("x", 2, 1);
        let cgm: Vec<_> = s.records.iter().filter(|r| r.signal == Signal::Cgm).collect();
        assert_eq!(cgm.len(), 2 * 288);
        assert!(cgm.windows(2).all(|w| (w[1].timestamp - w[0].timestamp).num_seconds() == CGM_PERIOD));
        assert!(s.records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn errors() {
        assert_eq!(bootstrap(&[], 10, 1, 0, Parallelism::Sequential), Err(BootstrapError::EmptySeed));
        let empty = PatientStream { patient_id: "e".into(), records: vec![] };
        assert_eq!(bootstrap(&[empty], 10, 1, 0, Parallelism::Sequential), Err(BootstrapError::EmptySeed));
        let s = synthetic_stream("x", 1, 1);
        assert!(matches!(
            bootstrap(&[s], 10, 1, 0, Parallelism::Sequential),
            Err(BootstrapError::TargetBelowSeed { .. })
        ));
    }
}
