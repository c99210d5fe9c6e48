mod common;

use common::*;
use proptest::prelude::*;
use uavq_core::dru::{fit, fit_with_report, DruModel, DruSpec, TrainBudget};
use uavq_core::Matrix;

fn predictions(model: &DruModel, x: &Matrix) -> Vec<u8> {
    x.rows().map(|r| model.predict(r).unwrap()).collect()
}

#[test]
fn learns_separable_clusters() {
    let (x, y) = separable_task(40, 7);
    let (xe, ye) = separable_task(40, 8);
    let spec = DruSpec::new(5, 2, 3);
    let model = fit(spec, &x, &y, &TrainBudget::default()).unwrap();
    let train = accuracy(&predictions(&model, &x), &y);
    let held = accuracy(&predictions(&model, &xe), &ye);
    assert!(train >= 0.95, "train accuracy {train}");
    assert!(held >= 0.90, "held-out accuracy {held}");
    assert!(oracle_logreg_accuracy(&x, &y, &x, &y) >= 0.95);

    let again = fit(spec, &x, &y, &TrainBudget::default()).unwrap();
    assert_eq!(model.theta, again.theta);

    let untrained = DruModel::untrained(spec).unwrap();
    let diff: f64 = xe
        .rows()
        .map(|r| {
            let (a, b) = (model.extract_features(r).unwrap(), untrained.extract_features(r).unwrap());
            a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>() / a.len() as f64
        })
        .sum::<f64>()
        / xe.n_rows() as f64;
    assert!(diff > 0.0);
}

#[test]
fn budget_and_objective_contracts() {
    let (x, y) = separable_task(60, 1);
    let budget = TrainBudget {
        max_per_class: 25,
        max_optimizer_evals: 60,
        ..TrainBudget::default()
    };
    let (_, report) = fit_with_report(DruSpec::new(5, 2, 9), &x, &y, &budget).unwrap();
    let per_class = |c| report.training_rows.iter().filter(|&&i| y[i] == c).count();
    assert_eq!((per_class(0), per_class(1)), (25, 25));
    assert!(report.final_loss <= report.initial_loss);
    assert!(report.best_loss_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(report.n_evals <= 60);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_first_feature_and_bounded(seed in 0u64..1000, x in prop::collection::vec(-3.14f64..3.14, 5)) {
        let model = DruModel::untrained(DruSpec::new(5, 2, seed)).unwrap();
        let s = model.score(&x).unwrap();
        let f = model.extract_features(&x).unwrap();
        prop_assert_eq!(f.len(), 5);
        prop_assert_eq!(s, f[0]);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn text_form_round_trips(seed in 0u64..1000) {
        let model = DruModel::untrained(DruSpec::new(5, 2, seed)).unwrap();
        prop_assert_eq!(DruModel::from_text(&model.to_text()).unwrap(), model);
    }
}
