use std::collections::HashSet;

use driftcl::streams::{make_synthetic_stream, DatasetSpec, StreamConfig, TaskStream};
use driftcl::trainer::StrategyKind;

fn stream(drift: &[usize], seed: u64) -> TaskStream {
    let mut cfg = StreamConfig::synthetic(5, 2, seed);
    cfg.drift_tasks = drift.to_vec();
    if let DatasetSpec::Synthetic(s) = &mut cfg.dataset {
        s.train_per_class = 80;
        s.test_per_class = 30;
    }
    make_synthetic_stream(&cfg).unwrap()
}

#[test]
fn train_and_test_ids_never_overlap() {
    let s = stream(&[3], 11);
    let mut train_ids = HashSet::new();
    let mut test_ids = HashSet::new();
    for c in 0..s.num_classes() {
        for v in 0..=s.version_at(c, s.len() - 1) {
            train_ids.extend(s.class_train(c, v).iter().map(|x| x.id));
            test_ids.extend(s.class_test(c, v).iter().map(|x| x.id));
        }
    }
    assert!(!train_ids.is_empty() && !test_ids.is_empty());
    assert!(train_ids.is_disjoint(&test_ids));
}

#[test]
fn drift_keeps_sample_identity_and_bumps_version() {
    let s = stream(&[3], 2);
    let before = s.class_train(1, 0);
    let after = s.class_train(1, 1);
    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(after) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.label, b.label);
        assert_eq!((a.drift_version, b.drift_version), (0, 1));
        assert_ne!(a.features, b.features);
    }
}

#[test]
fn vanilla_gets_no_recurring_labels() {
    let s = stream(&[3], 4);
    let vanilla = s.task_view(3, StrategyKind::Vanilla).unwrap();
    let amr = s.task_view(3, StrategyKind::Amr).unwrap();
    assert_eq!(vanilla.recurring_pool_size(), 0);
    assert_eq!(amr.recurring_pool_size(), 6 * 80);
    assert_eq!(vanilla.recurring.len(), 6);
    for r in &vanilla.recurring {
        assert_eq!(r.incoming.len(), 30);
        assert!(r.incoming.iter().all(|x| x.drift_version == 1 && x.label == r.class));
    }
}

#[test]
fn test_splits_follow_the_current_version() {
    let s = stream(&[3], 6);
    let t2 = s.task_view(2, StrategyKind::Amr).unwrap();
    let t4 = s.task_view(4, StrategyKind::Amr).unwrap();
    assert!(t2.test_set().all(|x| x.drift_version == 0));
    assert_eq!(t4.test_by_task.len(), 5);
    for x in t4.test_by_task[0].iter().chain(&t4.test_by_task[2]) {
        assert_eq!(x.drift_version, 1);
    }
    assert!(t4.test_by_task[4].iter().all(|x| x.drift_version == 0));
}

#[test]
fn same_seed_same_stream_different_seed_different_stream() {
    assert_eq!(stream(&[3], 9).to_bytes(), stream(&[3], 9).to_bytes());
    assert_ne!(stream(&[3], 9).to_bytes(), stream(&[3], 10).to_bytes());
}

#[test]
fn out_of_range_task_view() {
    let s = stream(&[], 0);
    assert!(s.task_view(5, StrategyKind::Amr).is_err());
}
