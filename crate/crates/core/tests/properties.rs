use memtrack_core::attention::{mha, AttentionParams};
use memtrack_core::linalg::random_tensor;
use memtrack_core::memory::MemoryConfig;
use memtrack_core::metrics::hungarian::assignment_cost;
use memtrack_core::metrics::{hota, hungarian, identity, Sequence};
use memtrack_core::oracle;
use memtrack_core::tim::{tim_forward_variant, TimParams, TrackBatch};
use memtrack_core::{Tensor2, TimVariant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TrackBatch {
    TrackBatch::new(
        (1..=n as u64).collect(),
        random_tensor(rng, n, d, 1.0),
        random_tensor(rng, n, d, 1.0),
        random_tensor(rng, n, d, 1.0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..9, scale in 0.1f64..300.0) {
        let x = random_tensor(&mut rng(seed), rows, cols, scale).softmax_rows();
        for r in 0..rows {
            let s: f64 = x.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(x.row(r).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), n in 1usize..6, k in 1usize..6, m in 1usize..6, p in 1usize..6) {
        let mut r = rng(seed);
        let a = random_tensor(&mut r, n, k, 1.0);
        let b = random_tensor(&mut r, k, m, 1.0);
        let c = random_tensor(&mut r, m, p, 1.0);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12 * (1.0 + k as f64 * m as f64));
    }

    #[test]
    fn matmul_matches_triple_loop(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_tensor(&mut r, 8, 8, 1.0);
        let b = random_tensor(&mut r, 8, 8, 1.0);
        prop_assert!(a.matmul(&b).unwrap().max_abs_diff(&oracle::matmul(&a, &b)) <= 1e-12);
    }

    #[test]
    fn attention_matches_oracle(seed in any::<u64>(), heads in 1usize..4, dh in 1usize..5, nq in 1usize..5, nk in 1usize..6, sinks in any::<bool>()) {
        let mut r = rng(seed);
        let d = heads * dh;
        let mut p = AttentionParams::random(&mut r, d, heads);
        if sinks {
            p = p.with_sinks(random_tensor(&mut r, 1, heads, 1.0)).unwrap();
        }
        let q = random_tensor(&mut r, nq, d, 1.0);
        let k = random_tensor(&mut r, nk, d, 1.0);
        let v = random_tensor(&mut r, nk, d, 1.0);
        let fast = mha(&q, &k, &v, &p).unwrap();
        prop_assert!(fast.max_abs_diff(&oracle::attention(&q, &k, &v, &p)) <= 1e-12);
    }

    #[test]
    fn attention_ignores_key_order(seed in any::<u64>(), heads in 1usize..4, nk in 1usize..8) {
        let mut r = rng(seed);
        let d = heads * 3;
        let p = AttentionParams::random(&mut r, d, heads);
        let q = random_tensor(&mut r, 3, d, 1.0);
        let k = random_tensor(&mut r, nk, d, 1.0);
        let v = random_tensor(&mut r, nk, d, 1.0);
        let perm = permutation(&mut r, nk);
        let a = mha(&q, &k, &v, &p).unwrap();
        let b = mha(&q, &k.select_rows(&perm), &v.select_rows(&perm), &p).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn attention_stays_in_value_hull(seed in any::<u64>(), heads in 1usize..4, nk in 1usize..8) {
        let mut r = rng(seed);
        let d = heads * 2;
        let mut p = AttentionParams::random(&mut r, d, heads);
        p.wo = Tensor2::identity(d);
        let q = random_tensor(&mut r, 4, d, 1.0);
        let k = random_tensor(&mut r, nk, d, 1.0);
        let v = random_tensor(&mut r, nk, d, 1.0);
        let out = mha(&q, &k, &v, &p).unwrap();
        let projected = v.matmul(&p.wv).unwrap();
        for c in 0..d {
            let lo = (0..nk).map(|i| projected.get(i, c)).fold(f64::INFINITY, f64::min);
            let hi = (0..nk).map(|i| projected.get(i, c)).fold(f64::NEG_INFINITY, f64::max);
            for row in 0..4 {
                let x = out.get(row, c);
                prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn temporal_module_is_track_equivariant(seed in any::<u64>(), n in 1usize..6, v in 0usize..4) {
        let mut r = rng(seed);
        let p = TimParams::random(&mut r, 8, 2);
        let b = batch(&mut r, n, 8);
        let perm = permutation(&mut r, n);
        let shuffled = TrackBatch::new(
            perm.iter().map(|&i| b.ids[i]).collect(),
            b.o_t.select_rows(&perm),
            b.o_prev.select_rows(&perm),
            b.memory.select_rows(&perm),
        ).unwrap();
        let mem = MemoryConfig::default();
        let variant = TimVariant::ALL[v];
        let (e, m) = tim_forward_variant(&b, &p, &mem, variant).unwrap();
        let (e2, m2) = tim_forward_variant(&shuffled, &p, &mem, variant).unwrap();
        prop_assert!(e.select_rows(&perm).max_abs_diff(&e2) <= 1e-12);
        prop_assert!(m.select_rows(&perm).max_abs_diff(&m2) <= 1e-12);
    }

    /// With a linear FFN and memory-independent attention weights the memory
    /// term enters linearly.
    #[test]
    fn memory_term_scales_linearly(seed in any::<u64>(), s in -4.0f64..4.0, attn_off in any::<bool>()) {
        let mut r = rng(seed);
        let mut p = TimParams::random(&mut r, 8, 2);
        p.ffn_activation = memtrack_core::attention::Activation::None;
        p.ffn.b1 = Tensor2::zeros(1, p.ffn.b1.cols());
        p.attn.wk = Tensor2::zeros(8, 8);
        let variant = if attn_off { TimVariant::AttnOff } else { TimVariant::Full };
        let b = batch(&mut r, 3, 8);
        let with = |m: Tensor2| {
            let bb = TrackBatch::new(b.ids.clone(), b.o_t.clone(), b.o_prev.clone(), m).unwrap();
            tim_forward_variant(&bb, &p, &MemoryConfig::default(), variant).unwrap().0
        };
        let zero = with(Tensor2::zeros(3, 8));
        let unit = with(b.memory.clone()).sub(&zero).unwrap();
        let scaled = with(b.memory.scale(s)).sub(&zero).unwrap();
        prop_assert!(scaled.max_abs_diff(&unit.scale(s)) <= 1e-9 * (1.0 + s.abs()));
    }

    #[test]
    fn hungarian_beats_random_permutations(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        let best = assignment_cost(&cost, &hungarian(&cost).unwrap());
        for _ in 0..1000 {
            let p = permutation(&mut r, n);
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            prop_assert!(best <= c + 1e-9);
        }
    }

    #[test]
    fn hota_is_geometric_mean_per_alpha(seed in any::<u64>()) {
        let (gt, pred) = oracle::random_instance(&mut rng(seed), 5, 15);
        let h = hota(&gt, &pred).unwrap();
        for a in &h.per_alpha {
            prop_assert!((a.hota - (a.det_a * a.ass_a).sqrt()).abs() <= 1e-12);
            for v in [a.hota, a.det_a, a.ass_a] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    /// Dropping a prediction never adds identity overlap, and dropping one that
    /// overlaps no ground truth never lowers IDF1.
    #[test]
    fn identity_monotone_under_removal(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (gt, pred) = oracle::random_instance(&mut rng(seed), 4, 12);
        let all: Vec<(u32, u64)> = pred.frames.iter().flat_map(|(t, l)| l.iter().map(move |(id, _)| (*t, *id))).collect();
        prop_assume!(!all.is_empty());
        let (t, id) = all[pick.index(all.len())];
        let mut fewer = Sequence::new();
        for (f, list) in &pred.frames {
            for (i, b) in list {
                if (*f, *i) != (t, id) {
                    fewer.push(*f, *i, *b).unwrap();
                }
            }
        }
        let before = identity(&gt, &pred).unwrap();
        let after = identity(&gt, &fewer).unwrap();
        prop_assert!(after.idtp <= before.idtp);
        let b = pred.get(t).iter().find(|(i, _)| *i == id).unwrap().1;
        if gt.get(t).iter().all(|(_, g)| memtrack_core::metrics::iou(g, &b) < 0.5) {
            prop_assert!(after.idf1 >= before.idf1 - 1e-12);
        }
    }
}

/// Removing a true positive can raise IDF1 when another trajectory ties for
/// the same identity: the overlap survives and the prediction count drops.
#[test]
fn tied_true_positive_removal_can_raise_idf1() {
    let b = memtrack_core::BoundingBox::new(0.5, 0.5, 0.2, 0.2);
    let mut gt = Sequence::new();
    gt.push(1, 1, b).unwrap();
    gt.push(2, 1, b).unwrap();
    let mut pred = Sequence::new();
    pred.push(1, 10, b).unwrap();
    pred.push(2, 20, b).unwrap();
    let before = identity(&gt, &pred).unwrap();
    let mut fewer = Sequence::new();
    fewer.push(2, 20, b).unwrap();
    let after = identity(&gt, &fewer).unwrap();
    assert_eq!(before.idtp, 1);
    assert_eq!(after.idtp, 1);
    assert!(after.idf1 > before.idf1);
}
