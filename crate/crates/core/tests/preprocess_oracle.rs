use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavq_core::preprocess::{
    discretize, equal_frequency_edges, mi_rank, nearest_neighbours, plugin_mi, select_top_k, smote, smote_tomek,
    tomek_links, AngleScalerFit, Origin, RobustScalerFit,
};
use uavq_core::Matrix;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn brute_nn(x: &Matrix, i: usize) -> Option<usize> {
    (0..x.n_rows())
        .filter(|&j| j != i)
        .min_by(|&a, &b| dist2(x.row(i), x.row(a)).total_cmp(&dist2(x.row(i), x.row(b))).then(a.cmp(&b)))
}

fn random_points(n: usize, d: usize, grid: bool, rng: &mut ChaCha8Rng) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if grid { f64::from(rng.random_range(0..4u8)) } else { rng.random_range(-1.0..1.0) })
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn neighbours_and_links_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..40 {
        let n = rng.random_range(2..40);
        // integer grids force distance ties
        let x = random_points(n, 2, trial % 2 == 0, &mut rng);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let nn = nearest_neighbours(&x);
        for i in 0..n {
            assert_eq!(nn[i], brute_nn(&x, i));
        }
        let mut expected = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if y[a] != y[b] && brute_nn(&x, a) == Some(b) && brute_nn(&x, b) == Some(a) {
                    expected.push((a, b));
                }
            }
        }
        assert_eq!(tomek_links(&x, &y), expected);
    }
}

#[test]
fn separated_clusters_balance_without_links() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (class, count, centre) in [(0u8, 50, 0.0), (1u8, 12, 10.0)] {
        for _ in 0..count {
            rows.push(vec![centre + rng.random_range(-1.0..1.0), centre + rng.random_range(-1.0..1.0)]);
            y.push(class);
        }
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let raw = smote(&x, &y, 5, 4).unwrap();
    assert_eq!(raw.class_counts(), [50, 50]);
    let cleaned = smote_tomek(&x, &y, 5, 4).unwrap();
    assert_eq!(cleaned, raw);
    assert!(tomek_links(&cleaned.x, &cleaned.y).is_empty());
}

#[test]
fn synthetic_rows_lie_between_minority_neighbours() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random_points(60, 3, false, &mut rng);
    let y: Vec<u8> = (0..60).map(|i| u8::from(i % 5 == 0)).collect();
    let k = 3;
    let fold = smote(&x, &y, k, 77).unwrap();
    let minority: Vec<usize> = (0..60).filter(|&i| y[i] == 1).collect();
    let knn = |i: usize| {
        let mut c: Vec<usize> = minority.iter().copied().filter(|&j| j != i).collect();
        c.sort_by(|&a, &b| dist2(x.row(i), x.row(a)).total_cmp(&dist2(x.row(i), x.row(b))).then(a.cmp(&b)));
        c.truncate(k);
        c
    };
    for s in (0..fold.len()).filter(|&i| fold.origin[i] == Origin::Synthetic) {
        assert_eq!(fold.y[s], 1);
        let p = fold.x.row(s);
        let on_segment = minority.iter().any(|&a| {
            knn(a).into_iter().any(|b| {
                let (xa, xb) = (x.row(a), x.row(b));
                let u = (p[0] - xa[0]) / (xb[0] - xa[0]);
                (0.0..=1.0).contains(&u) && (0..3).all(|j| (xa[j] + u * (xb[j] - xa[j]) - p[j]).abs() < 1e-9)
            })
        });
        assert!(on_segment, "synthetic row {s} is not on a neighbour segment");
    }
    assert_eq!(smote(&x, &y, k, 77).unwrap(), fold);
}

fn numpy_linear_quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[test]
fn robust_scaler_matches_quantile_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let train = random_points(37, 4, false, &mut rng);
    let fit = RobustScalerFit::fit(&train).unwrap();
    for j in 0..4 {
        let col = train.column(j);
        assert_eq!(fit.median[j], numpy_linear_quantile(&col, 0.5));
        let iqr = numpy_linear_quantile(&col, 0.75) - numpy_linear_quantile(&col, 0.25);
        assert!((fit.iqr[j] - iqr).abs() < 1e-15);
    }
    let hand = RobustScalerFit::fit(&Matrix::from_columns(&[[1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap()).unwrap();
    let out = hand.transform(&Matrix::from_columns(&[[5.0, 100.0]]).unwrap()).unwrap();
    assert_eq!(out.column(0), vec![1.0, 48.5]);
}

fn oracle_mi(bins: &[usize], y: &[u8]) -> f64 {
    let n = bins.len() as f64;
    let mut joint: HashMap<(usize, u8), f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<u8, f64> = HashMap::new();
    for (&b, &l) in bins.iter().zip(y) {
        *joint.entry((b, l)).or_default() += 1.0 / n;
        *pb.entry(b).or_default() += 1.0 / n;
        *py.entry(l).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(b, l), &p)| p * (p / (pb[&b] * py[&l])).ln()).sum()
}

#[test]
fn independent_feature_has_negligible_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 2000;
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let edges = equal_frequency_edges(&noise, 16);
    assert_eq!(edges.len(), 15);
    let bins = discretize(&noise, &edges);
    for b in 0..16 {
        let count = bins.iter().filter(|&&v| v == b).count();
        assert!((124..=126).contains(&count), "bin {b} has {count}");
    }
    let mi = plugin_mi(&bins, &y);
    assert!((mi - oracle_mi(&bins, &y)).abs() < 1e-12);
    assert!(mi < 0.05, "mi {mi}");
    let copy: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let ranking = mi_rank(&Matrix::from_columns(&[noise, copy]).unwrap(), &y).unwrap();
    assert_eq!(ranking.order, vec![1, 0]);
    assert!((ranking.scores[1] - oracle_mi(&y.iter().map(|&v| v as usize).collect::<Vec<_>>(), &y)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mi_scores_are_non_negative_and_match_oracle(seed in 0u64..10_000, d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(64, d, seed % 3 == 0, &mut rng);
        let mut y: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        y[0] = 0; y[1] = 0; y[2] = 1; y[3] = 1;
        let r = mi_rank(&x, &y).unwrap();
        for j in 0..d {
            let col = x.column(j);
            let bins = discretize(&col, &equal_frequency_edges(&col, 16));
            prop_assert!(r.scores[j] >= 0.0);
            prop_assert!((r.scores[j] - oracle_mi(&bins, &y).max(0.0)).abs() < 1e-12);
        }
        prop_assert_eq!(select_top_k(&r, d).unwrap(), r.order.clone());
    }

    #[test]
    fn fitted_scalers_ignore_rows_they_do_not_see(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = random_points(30, 3, false, &mut rng);
        let other = random_points(10, 3, false, &mut rng);
        let robust = RobustScalerFit::fit(&train).unwrap();
        let angle = AngleScalerFit::fit(&train).unwrap();
        let out = angle.transform(&robust.transform(&other).unwrap()).unwrap();
        prop_assert!(out.as_slice().iter().all(|v| v.abs() <= std::f64::consts::PI));
        let refit = RobustScalerFit::fit(&train.vstack(&Matrix::zeros(0, 3)).unwrap()).unwrap();
        prop_assert_eq!(refit, robust);
    }
}
