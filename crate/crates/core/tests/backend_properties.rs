use proptest::prelude::*;
use skytrack_core::backend::{detect, request_rng, OracleConfig};
use skytrack_core::{BBox, Frame, OracleNoise, PersonAttrs, Pose, Predicate, SemanticQuery};

const COLORS: [&str; 4] = ["gray", "green", "blue", "red"];

fn frame() -> Frame {
    Frame::new(0, 0.0, 200, 160, vec![90; 200 * 160]).unwrap()
}

fn arb_person() -> impl Strategy<Value = PersonAttrs> {
    (0u32..170, 0u32..130, 8u32..30, 8u32..30, 0usize..Pose::ALL.len(), 0usize..COLORS.len(), any::<bool>()).prop_map(
        |(x, y, w, h, p, c, injured)| {
            let pose = Pose::ALL[p];
            PersonAttrs {
                bbox: BBox::new(x as f64, y as f64, w as f64, h as f64).unwrap(),
                pose,
                shirt_color: COLORS[c].into(),
                injured: injured && pose.is_injury_candidate(),
            }
        },
    )
}

fn arb_predicate() -> impl Strategy<Value = Predicate> {
    (
        proptest::option::of(0usize..Pose::ALL.len()),
        proptest::option::of(0usize..COLORS.len()),
        proptest::option::of(any::<bool>()),
    )
        .prop_map(|(p, c, injured)| Predicate {
            pose: p.map(|i| Pose::ALL[i]),
            shirt_color: c.map(|i| COLORS[i].to_owned()),
            injured,
        })
}

fn query(predicate: Predicate) -> SemanticQuery {
    SemanticQuery::new("person", predicate, "fixture").unwrap()
}

/// Attribute filter written out field by field.
fn wanted(pred: &Predicate, p: &PersonAttrs) -> bool {
    if let Some(pose) = pred.pose {
        if pose != p.pose {
            return false;
        }
    }
    if let Some(color) = &pred.shirt_color {
        if *color != p.shirt_color {
            return false;
        }
    }
    match pred.injured {
        Some(true) => p.injured && matches!(p.pose, Pose::LayingDown | Pose::NotDefined | Pose::Null | Pose::Seated),
        Some(false) => {
            !(p.injured && matches!(p.pose, Pose::LayingDown | Pose::NotDefined | Pose::Null | Pose::Seated))
        }
        None => true,
    }
}

fn sorted(mut v: Vec<BBox>) -> Vec<(u64, u64, u64, u64)> {
    let mut keys: Vec<_> = v.drain(..).map(|b| (b.x.to_bits(), b.y.to_bits(), b.w.to_bits(), b.h.to_bits())).collect();
    keys.sort();
    keys
}

fn noiseless_boxes(persons: &[PersonAttrs], pred: &Predicate) -> Vec<BBox> {
    let cfg = OracleConfig::default();
    let mut rng = request_rng(&cfg.noise, 0, 1);
    detect(&frame(), &query(pred.clone()), persons, &cfg, &mut rng).0.into_iter().map(|d| d.bbox).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn noiseless_detect_is_exact(persons in proptest::collection::vec(arb_person(), 0..8), pred in arb_predicate()) {
        let expected: Vec<BBox> = persons.iter().filter(|p| wanted(&pred, p)).map(|p| p.bbox).collect();
        prop_assert_eq!(sorted(noiseless_boxes(&persons, &pred)), sorted(expected));
    }

    #[test]
    fn adding_a_constraint_never_adds_detections(
        persons in proptest::collection::vec(arb_person(), 0..8),
        pred in arb_predicate(),
        extra in arb_predicate(),
    ) {
        let tighter = Predicate {
            pose: pred.pose.or(extra.pose),
            shirt_color: pred.shirt_color.clone().or(extra.shirt_color),
            injured: pred.injured.or(extra.injured),
        };
        prop_assert!(noiseless_boxes(&persons, &tighter).len() <= noiseless_boxes(&persons, &pred).len());
    }

    #[test]
    fn only_verified_detections_leave_the_service(
        persons in proptest::collection::vec(arb_person(), 0..8),
        pred in arb_predicate(),
        miss in 0.0..1.0f64,
        spurious in 0.0..3.0f64,
        jitter in 0.0..4.0f64,
        flip in 0.0..0.5f64,
        seed in any::<u64>(),
    ) {
        let noise = OracleNoise { miss_rate: miss, spurious_rate: spurious, jitter_sigma: jitter, verify_flip_rate: flip, seed };
        let cfg = OracleConfig { noise, ..OracleConfig::default() };
        let mut rng = request_rng(&cfg.noise, 0, 3);
        let (dets, t) = detect(&frame(), &query(pred), &persons, &cfg, &mut rng);
        prop_assert!(dets.iter().all(|d| d.verified));
        prop_assert!(t.t_f >= t.stages.propose + t.stages.crop + t.stages.verify - 1e-15);
        prop_assert_eq!(t.t_obj.is_some(), t.verify_calls > 0);
    }
}

#[test]
fn frame_time_is_affine_in_proposal_count() {
    let cfg = OracleConfig::default();
    let person = |k: u32| PersonAttrs {
        bbox: BBox::new((k % 10) as f64 * 19.0, (k / 10) as f64 * 60.0, 15.0, 40.0).unwrap(),
        pose: Pose::Standing,
        shirt_color: "gray".into(),
        injured: false,
    };
    let t_f: Vec<f64> = (0..=20)
        .map(|n| {
            let persons: Vec<PersonAttrs> = (0..n).map(person).collect();
            let mut rng = request_rng(&cfg.noise, 0, 1);
            detect(&frame(), &SemanticQuery::any_person(), &persons, &cfg, &mut rng).1.t_f
        })
        .collect();
    let slope = t_f[1] - t_f[0];
    assert!(slope > 0.0);
    for (n, t) in t_f.iter().enumerate() {
        assert!((t - (t_f[0] + slope * n as f64)).abs() < 1e-12, "n={n}: {t}");
    }
}
