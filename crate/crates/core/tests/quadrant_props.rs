use gcn_diagnose::quadrant::{assign_quadrants, quadrant_summary, Quadrant, Thresholds};
use proptest::prelude::*;

fn class_metrics() -> impl Strategy<Value = (Vec<Option<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..=12).prop_flat_map(|c| {
        (
            prop::collection::vec(prop::option::weighted(0.9, 0.0..=1.0f64), c),
            prop::collection::vec(0.0..=1.0f64, c),
            prop::collection::vec(-0.5..=0.5f64, c),
        )
    })
}

proptest! {
    #[test]
    fn quadrants_partition_defined_classes((h, lr, delta) in class_metrics()) {
        let a = assign_quadrants(&h, &lr, &delta, Thresholds::default()).unwrap();
        let mut seen: Vec<usize> = Quadrant::ALL.iter().flat_map(|&q| a.members(q)).collect();
        seen.extend(&a.excluded);
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..h.len()).collect::<Vec<_>>());
        for (k, v) in h.iter().enumerate() {
            prop_assert_eq!(v.is_none(), a.excluded.contains(&k));
        }
    }

    #[test]
    fn monotone_rescaling_keeps_assignment((h, lr, delta) in class_metrics()) {
        let f = |x: f64| x * x * x + 2.0 * x;
        let g = |x: f64| (3.0 * x).exp();
        let t = Thresholds::default();
        let a = assign_quadrants(&h, &lr, &delta, t).unwrap();
        let h2: Vec<Option<f64>> = h.iter().map(|v| v.map(f)).collect();
        let lr2: Vec<f64> = lr.iter().map(|&v| g(v)).collect();
        let t2 = Thresholds { homophily: f(t.homophily), f1: g(t.f1) };
        let b = assign_quadrants(&h2, &lr2, &delta, t2).unwrap();
        for q in Quadrant::ALL {
            prop_assert_eq!(a.members(q), b.members(q));
        }
    }

    #[test]
    fn summary_means_match_members((h, lr, delta) in class_metrics()) {
        let a = assign_quadrants(&h, &lr, &delta, Thresholds::default()).unwrap();
        for s in quadrant_summary(&a) {
            match s.mean_delta_f1 {
                None => prop_assert!(s.classes.is_empty()),
                Some(m) => {
                    let want = s.classes.iter().map(|&c| delta[c]).sum::<f64>() / s.classes.len() as f64;
                    prop_assert!((m - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn values_at_thresholds_fall_low() {
    let a = assign_quadrants(
        &[Some(0.70), Some(0.71)],
        &[0.85, 0.86],
        &[0.0, 0.0],
        Thresholds::default(),
    )
    .unwrap();
    assert_eq!(a.quadrant_of(0), Some(Quadrant::LowHWeakF));
    assert_eq!(a.quadrant_of(1), Some(Quadrant::HighHStrongF));
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(assign_quadrants(&[Some(0.5)], &[0.5, 0.6], &[0.0], Thresholds::default()).is_err());
}

#[test]
fn quadrant_names_serialize_as_labels() {
    let json = serde_json::to_string(&Quadrant::LowHStrongF).unwrap();
    assert_eq!(json, "\"LowH-StrongF\"");
}
