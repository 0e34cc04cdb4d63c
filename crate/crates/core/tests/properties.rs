use proptest::prelude::*;

use ordmix::datagen::{generate, GenConfig};
use ordmix::metrics::EvalReport;
use ordmix::training::train_persist;
use ordmix::window::{build_windows, persistence_rate};
use ordmix::{OrdinalLabel, OrdinalScale};

fn labels(q: usize, n: usize) -> impl Strategy<Value = Vec<OrdinalLabel>> {
    prop::collection::vec((0..q).prop_map(OrdinalLabel::from_index), n)
}

fn label_pairs() -> impl Strategy<Value = (usize, Vec<OrdinalLabel>, Vec<OrdinalLabel>)> {
    (2usize..=6, 1usize..120).prop_flat_map(|(q, n)| (Just(q), labels(q, n), labels(q, n)))
}

proptest! {
    #[test]
    fn discretization_is_monotone(a in -100.0f64..5000.0, b in -100.0f64..5000.0) {
        let scale = OrdinalScale::rvr();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(scale.discretize(lo).unwrap() <= scale.discretize(hi).unwrap());
    }

    #[test]
    fn metrics_stay_in_range((q, truth, pred) in label_pairs()) {
        let r = EvalReport::from_labels(&truth, &pred, q).unwrap();
        prop_assert!((0.0..=100.0).contains(&r.acc));
        prop_assert!((0.0..=100.0).contains(&r.gms));
        prop_assert!(r.amae >= 0.0);
        prop_assert!(r.amae <= r.mmae + 1e-12);
        prop_assert!(r.mmae <= (q - 1) as f64);
        prop_assert_eq!(r.n_per_class.iter().sum::<usize>(), truth.len());
    }

    #[test]
    fn metrics_ignore_sample_order((q, truth, pred) in label_pairs(), shift in 0usize..120) {
        let k = shift % truth.len();
        let mut t2 = truth.clone();
        let mut p2 = pred.clone();
        t2.rotate_left(k);
        p2.rotate_left(k);
        let a = EvalReport::from_labels(&truth, &pred, q).unwrap();
        let b = EvalReport::from_labels(&t2, &p2, q).unwrap();
        prop_assert_eq!(a.n_per_class, b.n_per_class);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.per_class_sensitivity), bits(&b.per_class_sensitivity));
        prop_assert!((a.amae - b.amae).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_perfectly((q, truth, _) in label_pairs()) {
        let r = EvalReport::from_labels(&truth, &truth, q).unwrap();
        prop_assert_eq!(r.acc, 100.0);
        prop_assert_eq!(r.amae, 0.0);
        prop_assert_eq!(r.mmae, 0.0);
        prop_assert!((r.gms - 100.0).abs() < 1e-9);
    }

    #[test]
    fn windows_are_contiguous_and_standardized(
        seed in any::<u64>(),
        q in 2usize..=5,
        delta in 0usize..4,
        horizon in 1usize..5,
        gap in 0.0f64..0.2,
    ) {
        let cfg = GenConfig {
            num_steps: 200,
            num_classes: q,
            feature_dim: 2,
            gap_probability: gap,
            seed,
            ..GenConfig::default()
        };
        let series = generate(&cfg).unwrap();
        let scale = OrdinalScale::with_classes(q).unwrap();
        let Ok(ds) = build_windows(&series, delta, horizon, &scale) else {
            // heavy gaps can leave no complete window
            return Ok(());
        };
        let at = |t: i64| series.iter().find(|r| r.timestamp == t);
        for p in &ds.patterns {
            for d in 0..=delta as i64 {
                prop_assert!(at(p.origin_t - d).is_some());
            }
            prop_assert_eq!(at(p.origin_t).unwrap().label, p.current_label);
            prop_assert_eq!(at(p.origin_t + horizon as i64).unwrap().label, p.target);
        }
        let n = ds.len() as f64;
        for j in 0..ds.input_dim() {
            let mean = ds.patterns.iter().map(|p| p.z[j]).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9, "column {} mean {}", j, mean);
        }
    }

    #[test]
    fn persistence_accuracy_is_the_persistence_rate(seed in any::<u64>(), p in 0.3f64..1.0) {
        let cfg = GenConfig { num_steps: 150, base_persistence: p, seed, ..GenConfig::default() };
        let ds = build_windows(&generate(&cfg).unwrap(), 1, 2, &OrdinalScale::with_classes(4).unwrap()).unwrap();
        let pred = train_persist().predict_all(&ds).unwrap();
        let truth: Vec<_> = ds.targets().collect();
        let r = EvalReport::from_labels(&truth, &pred, 4).unwrap();
        prop_assert_eq!(r.acc, 100.0 * persistence_rate(&ds));
    }
}
