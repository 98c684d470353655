//! The kd index against a flat list filtered by brute force.

use ceckd::kd::{Kd4Key, KdTree, RangeBox, NEG_INF, POS_INF};
use ceckd::par::Parallelism;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Live = Vec<(Kd4Key, u32)>;

fn scan(live: &Live, b: &RangeBox) -> Vec<(Kd4Key, u32)> {
    let mut v: Vec<_> = live.iter().filter(|(k, _)| b.contains(k)).cloned().collect();
    v.sort();
    v
}

fn query(t: &KdTree<u32>, b: &RangeBox) -> Vec<(Kd4Key, u32)> {
    let mut v: Vec<_> = t.range_query(b).unwrap().into_iter().map(|(k, p)| (k, *p)).collect();
    v.sort();
    v
}

/// Coordinates from a small domain so duplicates and ties are common.
fn small_key(rng: &mut impl Rng, span: i64) -> Kd4Key {
    Kd4Key::new(
        rng.gen_range(-span..=span),
        rng.gen_range(0..4),
        rng.gen_range(-span..=span),
        if rng.gen_bool(0.2) { POS_INF } else { rng.gen_range(0..=span) },
    )
}

fn random_box(rng: &mut impl Rng, span: i64) -> RangeBox {
    let mut b = RangeBox::all();
    for d in 0..4 {
        match rng.gen_range(0..4) {
            0 => {}
            1 => {
                let v = rng.gen_range(-span..=span);
                b = b.with_point(d, v);
            }
            _ => {
                let x = rng.gen_range(-span - 2..=span + 2);
                let y = rng.gen_range(-span - 2..=span + 2);
                b = b.with(d, x.min(y), x.max(y));
            }
        }
    }
    b
}

/// 100 workloads of 2,000 interleaved insert / delete / range operations.
#[test]
fn interleaved_workloads_match_scan() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = KdTree::new();
        let mut live: Live = Vec::new();
        for op in 0..2000u32 {
            match rng.gen_range(0..10) {
                0..=4 => {
                    let k = small_key(&mut rng, 20);
                    t.insert(k, op).unwrap();
                    live.push((k, op));
                }
                5..=6 => {
                    let k = if !live.is_empty() && rng.gen_bool(0.8) {
                        live[rng.gen_range(0..live.len())].0
                    } else {
                        small_key(&mut rng, 20)
                    };
                    let parity = rng.gen_range(0..2);
                    let n = t.delete(&k, |p| p % 2 == parity);
                    let before = live.len();
                    live.retain(|(lk, p)| !(*lk == k && p % 2 == parity));
                    assert_eq!(n, before - live.len(), "seed {seed} op {op}");
                }
                _ => {
                    let b = random_box(&mut rng, 20);
                    assert_eq!(query(&t, &b), scan(&live, &b), "seed {seed} op {op} box {b:?}");
                }
            }
            assert_eq!(t.len(), live.len());
        }
        t.check_invariants().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(query(&t, &RangeBox::all()), scan(&live, &RangeBox::all()));
    }
}

/// Insert N keys, delete a random half, re-insert them.
#[test]
fn delete_half_and_reinsert() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(50..400);
        let mut t = KdTree::new();
        let pts: Live = (0..n).map(|i| (small_key(&mut rng, 1000), i)).collect();
        for &(k, p) in &pts {
            t.insert(k, p).unwrap();
        }
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
        let gone = &idx[..pts.len() / 2];
        for &i in gone {
            let (k, p) = pts[i];
            assert_eq!(t.delete(&k, |x| *x == p), 1);
        }
        t.check_invariants().unwrap();
        for &i in gone {
            t.insert(pts[i].0, pts[i].1).unwrap();
        }
        t.check_invariants().unwrap();
        for _ in 0..20 {
            let b = random_box(&mut rng, 1000);
            assert_eq!(query(&t, &b), scan(&pts, &b));
        }
    }
}

#[test]
fn ten_thousand_points_five_hundred_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pts: Live = (0..10_000)
        .map(|i| {
            let k = Kd4Key::new(
                rng.gen_range(-1_000_000..1_000_000),
                rng.gen_range(-1_000_000..1_000_000),
                rng.gen_range(0..1_000_000),
                rng.gen_range(0..1_000_000),
            );
            (k, i)
        })
        .collect();
    let mut t = KdTree::new();
    for &(k, p) in &pts {
        t.insert(k, p).unwrap();
    }
    assert_eq!(t.len(), 10_000);
    for _ in 0..500 {
        let b = random_box(&mut rng, 1_000_000);
        assert_eq!(query(&t, &b), scan(&pts, &b));
    }
}

#[test]
fn uniform_inserts_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = KdTree::new();
    for i in 0..1000u32 {
        t.insert(Kd4Key::new(rng.gen(), rng.gen(), rng.gen::<i32>() as i64, rng.gen::<i32>() as i64), i)
            .unwrap();
    }
    assert_eq!(t.len(), 1000);
}

/// On rebuilt trees of uniform points, visits <= 16 (sqrt(n) + k).
#[test]
fn visit_bound_on_uniform_points() {
    for n in [1_000usize, 4_000, 16_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut t = KdTree::new();
        for i in 0..n {
            let k = Kd4Key::new(
                rng.gen_range(0..1_000_000),
                rng.gen_range(0..1_000_000),
                rng.gen_range(0..1_000_000),
                rng.gen_range(0..1_000_000),
            );
            t.insert(k, i as u32).unwrap();
        }
        t.rebuild_all();
        assert!(t.height() <= (n as f64).log2().ceil() as usize + 1);
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            let b = random_box(&mut rng, 1_000_000);
            let (hits, visits) = t.range_query_counted(&b).unwrap();
            let bound = 16.0 * ((n as f64).sqrt() + hits.len() as f64);
            worst = worst.max(visits as f64 / bound);
            assert!(visits as f64 <= bound, "n={n}: {visits} visits for {} hits", hits.len());
        }
        eprintln!("n={n}: worst visits/bound = {worst:.3}");
    }
}

#[test]
fn identical_operations_identical_order() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = KdTree::new();
        for i in 0..3000u32 {
            t.insert(small_key(&mut rng, 50), i).unwrap();
            if i % 7 == 0 {
                let k = small_key(&mut rng, 50);
                t.delete(&k, |_| true);
            }
        }
        let b = random_box(&mut rng, 50);
        t.range_query(&b)
            .unwrap()
            .into_iter()
            .map(|(k, p)| (k, *p))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn bulk_load_sequential_and_parallel_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<(Kd4Key, u32)> = (0..30_000).map(|i| (small_key(&mut rng, 500), i)).collect();
    let a = KdTree::bulk_load(pts.clone(), Parallelism::Sequential).unwrap();
    let b = KdTree::bulk_load(pts.clone(), Parallelism::Parallel).unwrap();
    a.check_invariants().unwrap();
    b.check_invariants().unwrap();
    for _ in 0..50 {
        let bx = random_box(&mut rng, 500);
        let qa = query(&a, &bx);
        assert_eq!(qa, query(&b, &bx));
        assert_eq!(qa, scan(&pts, &bx));
    }
    assert!(KdTree::bulk_load(vec![(Kd4Key::new(NEG_INF, 0, 0, 0), 1u32)], Parallelism::Sequential).is_err());
}

#[derive(Debug, Clone)]
enum Op {
    Insert(Kd4Key),
    Delete(Kd4Key),
    DeleteExisting(usize),
    Query(RangeBox),
}

fn arb_key() -> impl Strategy<Value = Kd4Key> {
    (-8i64..8, 0i64..3, -8i64..8, prop_oneof![0i64..8, Just(POS_INF)])
        .prop_map(|(a, b, c, d)| Kd4Key::new(a, b, c, d))
}

fn arb_box() -> impl Strategy<Value = RangeBox> {
    let dim = prop_oneof![
        Just((NEG_INF, POS_INF)),
        (-9i64..9).prop_map(|v| (v, v)),
        (-9i64..9, -9i64..9).prop_map(|(a, b)| (a.min(b), a.max(b))),
    ];
    [dim.clone(), dim.clone(), dim.clone(), dim].prop_map(|d| {
        let mut b = RangeBox::all();
        for (i, (lo, hi)) in d.into_iter().enumerate() {
            b = b.with(i, lo, hi);
        }
        b
    })
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => arb_key().prop_map(Op::Insert),
        1 => arb_key().prop_map(Op::Delete),
        2 => any::<usize>().prop_map(Op::DeleteExisting),
        2 => arb_box().prop_map(Op::Query),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn prop_matches_linear_scan(ops in proptest::collection::vec(arb_op(), 1..400)) {
        let mut t = KdTree::new();
        let mut live: Live = Vec::new();
        for (i, op) in ops.into_iter().enumerate() {
            match op {
                Op::Insert(k) => {
                    t.insert(k, i as u32).unwrap();
                    live.push((k, i as u32));
                }
                Op::Delete(k) => {
                    let before = live.len();
                    live.retain(|(lk, _)| *lk != k);
                    prop_assert_eq!(t.delete(&k, |_| true), before - live.len());
                }
                Op::DeleteExisting(j) => {
                    if !live.is_empty() {
                        let (k, p) = live.remove(j % live.len());
                        prop_assert_eq!(t.delete(&k, |x| *x == p), 1);
                    }
                }
                Op::Query(b) => prop_assert_eq!(query(&t, &b), scan(&live, &b)),
            }
            prop_assert_eq!(t.len(), live.len());
        }
        prop_assert!(t.check_invariants().is_ok());
    }
}
