use dglink_core::metrics::{pr_auc, roc_auc, threshold_metrics, MetricReport, ScoredSet};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec((0u32..20).prop_map(|v| f64::from(v) / 20.0), n),
            prop::collection::vec(0u8..2, n),
        )
    })
    .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
}

proptest! {
    #[test]
    fn aucs_are_probabilities((z, y) in scored()) {
        let s = ScoredSet::new(&z, &y).unwrap();
        let roc = roc_auc(s).unwrap();
        let pr = pr_auc(s).unwrap();
        prop_assert!((0.0..=1.0).contains(&roc));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pr));
    }

    #[test]
    fn roc_auc_is_rank_invariant((z, y) in scored()) {
        let squashed: Vec<f64> = z.iter().map(|v| (3.0 * v - 1.0).tanh()).collect();
        let a = roc_auc(ScoredSet::new(&z, &y).unwrap()).unwrap();
        let b = roc_auc(ScoredSet::new(&squashed, &y).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn flipping_labels_complements_roc_auc((z, y) in scored()) {
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let a = roc_auc(ScoredSet::new(&z, &y).unwrap()).unwrap();
        let b = roc_auc(ScoredSet::new(&z, &flipped).unwrap()).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_metrics_are_consistent((z, y) in scored(), t in 0.0f64..1.0) {
        let m = threshold_metrics(ScoredSet::new(&z, &y).unwrap(), t).unwrap();
        let p = y.iter().filter(|&&v| v == 1).count() as f64;
        let n = y.len() as f64 - p;
        // acc = (recall * P + spec * N) / (P + N)
        prop_assert!((m.acc - (m.recall * p + m.specificity * n) / (p + n)).abs() < 1e-12);
        prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
    }
}

#[test]
fn report_columns_follow_table_order() {
    let r = MetricReport::compute(&[0.9, 0.6, 0.4, 0.1], &[1, 0, 1, 0], 0.5).unwrap();
    assert_eq!(MetricReport::HEADER, "acc\tf1\tprec\trec\troc_auc\tpr_auc\tspec");
    assert_eq!(r.values(), [0.5, 0.5, 0.5, 0.5, 0.75, 0.8333333333333333, 0.5]);
}
