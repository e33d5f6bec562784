use memtrack_core::decoder::{heads, joint_decode, QuerySet};
use memtrack_core::io::config::{Init, RunConfig};
use memtrack_core::io::{mot, params};
use memtrack_core::linalg::random_tensor;
use memtrack_core::metrics::clear_mot;
use memtrack_core::scenario::max_pairwise_cosine;
use memtrack_core::tim::{tim_forward_variant, TimParams, TrackBatch};
use memtrack_core::{
    generate, oracle, run_sequence, Layout, MemoryConfig, Model, ScenarioConfig,
    ScenarioKind, Sequence, StructuredConfig, TimVariant, TrackerConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn temporal_module_matches_composed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = TimParams::random(&mut rng, 16, 4);
    let b = TrackBatch::new(
        vec![1, 2, 3, 4],
        random_tensor(&mut rng, 4, 16, 1.0),
        random_tensor(&mut rng, 4, 16, 1.0),
        random_tensor(&mut rng, 4, 16, 1.0),
    )
    .unwrap();
    for v in TimVariant::ALL {
        let (e, _) = tim_forward_variant(&b, &p, &MemoryConfig::default(), v).unwrap();
        let want = oracle::next_embedding(&b.o_t, &b.o_prev, &b.memory, &p, v);
        assert!(e.max_abs_diff(&want) <= 1e-12, "{v}");
    }
}

#[test]
fn orthogonal_targets_never_switch() {
    let model = Model::structured(&Layout::new(64).unwrap(), &StructuredConfig::default(), TimVariant::Full).unwrap();
    for kind in [ScenarioKind::Linear, ScenarioKind::Crossing] {
        for seed in 0..3 {
            let mut cfg = ScenarioConfig::new(kind, 6, 80, seed);
            cfg.sigma_sim = 0.0;
            let s = generate(&cfg).unwrap();
            let out = run_sequence(&model, &TrackerConfig::default(), &s.frames).unwrap();
            let c = clear_mot(&Sequence::from_truth(&s), &Sequence::from_results(&out)).unwrap();
            assert_eq!(c.idsw, 0, "{} seed {seed}", kind.name());
        }
    }
}

#[test]
fn confusability_grows_with_similarity() {
    let mut last = -1.0;
    for sigma in [0.0, 0.2, 0.4, 0.6, 0.8, 0.95] {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Dance, 8, 2, 1);
        cfg.sigma_sim = sigma;
        let c = max_pairwise_cosine(&generate(&cfg).unwrap().signatures);
        assert!(c >= last - 1e-12, "sigma {sigma}: {c} < {last}");
        last = c;
    }
}

#[test]
fn gt_rows_count_visible_targets() {
    let s = generate(&ScenarioConfig::new(ScenarioKind::Dance, 8, 200, 42)).unwrap();
    let rows = s.export_gt(mot::FrameSize::default());
    assert_eq!(rows.len(), s.visible_count());
    assert!(rows.len() < 8 * 200);
}

#[test]
fn heads_stay_in_the_unit_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let layout = Layout::new(32).unwrap();
    let model = Model::random(&mut rng, layout, 4, 3);
    let s = generate(&{
        let mut c = ScenarioConfig::new(ScenarioKind::Crossing, 3, 1, 2);
        c.d = 32;
        c
    })
    .unwrap();
    let det = QuerySet::from_queries(&model.queries, 32).unwrap();
    let tck = QuerySet::new(random_tensor(&mut rng, 2, 32, 3.0), vec![(0.1, 0.9), (0.7, 0.2)]).unwrap();
    let (o_det, o_tck) = joint_decode(&det, &tck, &s.frames[0], &model.decoder).unwrap();
    for out in [o_det, o_tck] {
        for (b, c) in heads(&out, &model.decoder).unwrap() {
            assert!((0.0..=1.0).contains(&c));
            assert!(b.left() >= -1e-12 && b.top() >= -1e-12 && b.right() <= 1.0 + 1e-12 && b.bottom() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn snapshot_reproduces_tracking() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        init: Init::Random,
        seed: 5,
        ..RunConfig::default()
    };
    let original = cfg.build_model().unwrap();
    let path = dir.path().join("model.par");
    params::write(&path, &original).unwrap();

    cfg.seed = 6;
    cfg.params = Some(path);
    let loaded = cfg.build_model().unwrap();
    assert_eq!(loaded, original);

    let s = generate(&ScenarioConfig::new(ScenarioKind::Linear, 3, 10, 1)).unwrap();
    let a = run_sequence(&original, &cfg.tracker, &s.frames).unwrap();
    let b = run_sequence(&loaded, &cfg.tracker, &s.frames).unwrap();
    assert_eq!(a, b);
}
