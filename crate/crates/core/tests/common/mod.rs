#![allow(dead_code)]

use std::collections::BTreeSet;

use hashens::ensemble::build_assignment;
use hashens::poison::{poison, select_targets};
use hashens::{DataPoint, Dataset, EnsembleConfig, ForestConfig, Perturbation, PoisonSpec};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Feature values on a coarse grid so duplicates and ties show up often.
fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => (-6i32..=6).prop_map(|v| f64::from(v) * 0.5),
        1 => -1e3f64..1e3,
    ]
}

/// Random binary datasets with `points` rows and `features` columns.
pub fn dataset(points: std::ops::RangeInclusive<usize>, features: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Dataset> {
    (points, features).prop_flat_map(|(n, f)| {
        prop::collection::vec((prop::collection::vec(value(), f), 0u8..=1), n).prop_map(|rows| {
            Dataset::from_points(rows.into_iter().map(|(x, y)| DataPoint::new(x, y)).collect()).unwrap()
        })
    })
}

/// Like [`dataset`] but with both classes present; needs at least two points.
pub fn two_class_dataset(points: std::ops::RangeInclusive<usize>, features: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Dataset> {
    dataset(points, features).prop_map(|d| {
        let [a, b] = d.class_counts();
        if a > 0 && b > 0 {
            return d;
        }
        let mut pts = d.points().to_vec();
        pts[0].label = 1 - pts[0].label;
        Dataset::from_points(pts).unwrap()
    })
}

/// Round-half-up of `percent * n / 100` in exact integer arithmetic.
pub fn expected_count(percent: u32, n: usize) -> usize {
    (2 * percent as usize * n + 100) / 200
}

fn range(d: &Dataset, feature: usize, class: Option<u8>) -> (f64, f64) {
    d.points()
        .iter()
        .filter(|p| class.is_none_or(|c| p.label == c))
        .map(|p| p.features[feature])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Checks one poisoning run against the clean data: selection sizes,
/// determinism, locality, and the per-kind value constraints.
pub fn check_perturbation(d: &Dataset, spec: &PoisonSpec, percent_p: u32, percent_f: u32) -> Result<(), TestCaseError> {
    let (out, t) = poison(d, spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&t, &select_targets(d.len(), d.n_features(), spec));
    prop_assert_eq!(t.point_indices.len(), expected_count(percent_p, d.len()));
    prop_assert_eq!(&out, &poison(d, spec).unwrap().0);
    let rows: BTreeSet<usize> = t.point_indices.iter().copied().collect();

    if spec.kind == Perturbation::LabelFlipping {
        let hamming = d.points().iter().zip(out.points()).filter(|(a, b)| a.label != b.label).count();
        prop_assert_eq!(hamming, expected_count(percent_p, d.len()));
        for (i, (a, b)) in d.points().iter().zip(out.points()).enumerate() {
            prop_assert_eq!(&a.features, &b.features);
            prop_assert_eq!(a.label != b.label, rows.contains(&i));
        }
        let (twice, _) = poison(&out, spec).unwrap();
        prop_assert_eq!(d.points(), twice.points());
        return Ok(());
    }

    prop_assert_eq!(t.feature_indices.len(), expected_count(percent_f, d.n_features()));
    let cols: BTreeSet<usize> = t.feature_indices.iter().copied().collect();
    for (i, (before, after)) in d.points().iter().zip(out.points()).enumerate() {
        prop_assert_eq!(before.label, after.label);
        for j in 0..d.n_features() {
            let (b, a) = (before.features[j], after.features[j]);
            if !(rows.contains(&i) && cols.contains(&j)) {
                prop_assert_eq!(b.to_bits(), a.to_bits());
                continue;
            }
            match spec.kind {
                Perturbation::Zeroing => prop_assert_eq!(a, 0.0),
                Perturbation::Noising => {
                    let (lo, hi) = range(d, j, Some(1 - before.label));
                    prop_assert!(lo <= a && a <= hi, "{} outside [{}, {}]", a, lo, hi);
                }
                _ => {
                    let (lo, hi) = range(d, j, None);
                    prop_assert!(a < lo || a > hi, "{} inside [{}, {}]", a, lo, hi);
                }
            }
        }
    }
    Ok(())
}

/// Structural partition invariants plus invariance under flipping every label.
pub fn check_partition(d: &Dataset, n: usize) -> Result<(), TestCaseError> {
    let cfg = EnsembleConfig::new(n, ForestConfig::default());
    let a = build_assignment(d, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sets = a.training_sets();
    prop_assert_eq!(sets.len(), n);
    let mut seen = vec![false; d.len()];
    for set in sets {
        for &i in set {
            prop_assert!(!seen[i], "point {} dealt twice", i);
            seen[i] = true;
        }
    }
    prop_assert!(seen.iter().all(|&s| s), "some point was not dealt");
    let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
    prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "sizes {:?}", sizes);

    let flipped = Dataset::from_points(d.points().iter().map(|p| DataPoint::new(p.features.clone(), 1 - p.label)).collect()).unwrap();
    let b = build_assignment(&flipped, &cfg).unwrap();
    prop_assert_eq!(a.partition_of(), b.partition_of());
    Ok(())
}
