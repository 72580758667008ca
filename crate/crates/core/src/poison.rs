//! Untargeted random poisoning of a training set: zeroing, noising,
//! out-of-ranging and label flipping.
//!
//! Victims are drawn by [`select_targets`] from the seed and rates only, so
//! every perturbation kind hits the same points and features for a given
//! [`PoisonSpec`] seed.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{round_count, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Perturbation {
    #[serde(rename = "zeroing")]
    Zeroing,
    #[serde(rename = "noising")]
    Noising,
    #[serde(rename = "out-of-ranging")]
    OutOfRanging,
    #[serde(rename = "label-flipping")]
    LabelFlipping,
}

impl Perturbation {
    pub const ALL: [Perturbation; 4] = [
        Perturbation::Zeroing,
        Perturbation::Noising,
        Perturbation::OutOfRanging,
        Perturbation::LabelFlipping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Perturbation::Zeroing => "zeroing",
            Perturbation::Noising => "noising",
            Perturbation::OutOfRanging => "out-of-ranging",
            Perturbation::LabelFlipping => "label-flipping",
        }
    }

    /// Whether the feature rate applies to this kind.
    pub fn uses_features(self) -> bool {
        self != Perturbation::LabelFlipping
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Perturbation::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownPerturbation(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoisonSpec {
    pub kind: Perturbation,
    /// Percentage of points to poison, in [0, 100].
    pub epsilon_p: f64,
    /// Percentage of features to poison per point, in [0, 100]. Ignored for
    /// label flipping.
    pub epsilon_f: f64,
    pub seed: u64,
}

impl PoisonSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon_p", self.epsilon_p), ("epsilon_f", self.epsilon_f)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSelection {
    /// Ascending point indices.
    pub point_indices: Vec<usize>,
    /// Ascending feature indices.
    pub feature_indices: Vec<usize>,
}

/// Draws `round(eps_p/100 * n_points)` points and `round(eps_f/100 * n_features)`
/// features uniformly without replacement. The perturbation kind does not
/// enter the random stream.
pub fn select_targets(n_points: usize, n_features: usize, spec: &PoisonSpec) -> TargetSelection {
    let mut rng = seed::rng(spec.seed);
    let k_points = round_count(spec.epsilon_p * n_points as f64 / 100.0).min(n_points);
    let k_features = round_count(spec.epsilon_f * n_features as f64 / 100.0).min(n_features);
    let mut point_indices = sample(&mut rng, n_points, k_points).into_vec();
    let mut feature_indices = sample(&mut rng, n_features, k_features).into_vec();
    point_indices.sort_unstable();
    feature_indices.sort_unstable();
    TargetSelection {
        point_indices,
        feature_indices,
    }
}

fn check_targets<T: Scalar>(d: &Dataset<T>, t: &TargetSelection, with_features: bool) -> Result<()> {
    if let Some(&i) = t.point_indices.iter().find(|&&i| i >= d.len()) {
        return Err(Error::IndexOutOfRange { index: i, len: d.len() });
    }
    if with_features {
        if let Some(&f) = t.feature_indices.iter().find(|&&f| f >= d.n_features()) {
            return Err(Error::IndexOutOfRange {
                index: f,
                len: d.n_features(),
            });
        }
    }
    Ok(())
}

/// Sets every selected cell to zero.
pub fn apply_zeroing<T: Scalar>(d: &Dataset<T>, t: &TargetSelection) -> Result<Dataset<T>> {
    check_targets(d, t, true)?;
    let mut points = d.points().to_vec();
    for &i in &t.point_indices {
        for &f in &t.feature_indices {
            points[i].features[f] = T::zero();
        }
    }
    Ok(d.derive(points, Provenance::Poisoned))
}

/// Replaces every selected cell of a class-`c` point with a uniform draw from
/// the `[min, max]` of that feature over the class `1 - c` points of `d`.
pub fn apply_noising<T: Scalar>(d: &Dataset<T>, t: &TargetSelection, seed: u64) -> Result<Dataset<T>> {
    check_targets(d, t, true)?;
    let ranges: [Vec<(T, T)>; 2] = [0u8, 1].map(|class| {
        t.feature_indices
            .iter()
            .map(|&f| d.feature_range(f, Some(class)).unwrap_or((T::nan(), T::nan())))
            .collect()
    });
    let mut rng = seed::rng(seed::derive(seed, stream::CELLS, 0));
    let mut points = d.points().to_vec();
    for &i in &t.point_indices {
        let opposite = 1 - points[i].label;
        if !t.feature_indices.is_empty() && ranges[opposite as usize][0].0.is_nan() {
            return Err(Error::EmptyClass(opposite));
        }
        for (slot, &f) in t.feature_indices.iter().enumerate() {
            let (lo, hi) = ranges[opposite as usize][slot];
            let u: f64 = rng.gen();
            let span = hi.to_f64().unwrap() - lo.to_f64().unwrap();
            let v = T::from_f64_lossy(lo.to_f64().unwrap() + u * span);
            points[i].features[f] = v.max(lo).min(hi);
        }
    }
    Ok(d.derive(points, Provenance::Poisoned))
}

/// Replaces every selected cell with a value just outside the feature's
/// observed range over all of `d`: `min - 1` or `max + 1`, chosen by a fair
/// seeded coin per cell.
pub fn apply_out_of_ranging<T: Scalar>(d: &Dataset<T>, t: &TargetSelection, seed: u64) -> Result<Dataset<T>> {
    check_targets(d, t, true)?;
    let ranges: Vec<(T, T)> = t
        .feature_indices
        .iter()
        .map(|&f| d.feature_range(f, None).unwrap_or((T::zero(), T::zero())))
        .collect();
    let low: Vec<T> = ranges.iter().map(|&(lo, _)| beyond(lo, -T::one())).collect();
    let high: Vec<T> = ranges.iter().map(|&(_, hi)| beyond(hi, T::one())).collect();
    let mut rng = seed::rng(seed::derive(seed, stream::CELLS, 0));
    let mut points = d.points().to_vec();
    for &i in &t.point_indices {
        for (slot, &f) in t.feature_indices.iter().enumerate() {
            points[i].features[f] = if rng.gen_bool(0.5) { low[slot] } else { high[slot] };
        }
    }
    Ok(d.derive(points, Provenance::Poisoned))
}

/// `edge + step`, widened until it actually leaves `edge` behind (a unit step
/// vanishes at large magnitudes in low precision).
fn beyond<T: Scalar>(edge: T, mut step: T) -> T {
    let two = T::one() + T::one();
    loop {
        let v = edge + step;
        if v != edge {
            return v;
        }
        step = step * two;
    }
}

/// Flips the labels of the selected points. Feature indices are ignored.
pub fn apply_label_flipping<T: Scalar>(d: &Dataset<T>, t: &TargetSelection) -> Result<Dataset<T>> {
    check_targets(d, t, false)?;
    let mut points = d.points().to_vec();
    for &i in &t.point_indices {
        points[i].label = 1 - points[i].label;
    }
    Ok(d.derive(points, Provenance::Poisoned))
}

/// Selects targets and applies `spec.kind` to `d`.
pub fn poison<T: Scalar>(d: &Dataset<T>, spec: &PoisonSpec) -> Result<(Dataset<T>, TargetSelection)> {
    spec.validate()?;
    if d.is_empty() || d.n_features() == 0 {
        return Err(Error::EmptyDataset);
    }
    let targets = select_targets(d.len(), d.n_features(), spec);
    let poisoned = match spec.kind {
        Perturbation::Zeroing => apply_zeroing(d, &targets)?,
        Perturbation::Noising => apply_noising(d, &targets, spec.seed)?,
        Perturbation::OutOfRanging => apply_out_of_ranging(d, &targets, spec.seed)?,
        Perturbation::LabelFlipping => apply_label_flipping(d, &targets)?,
    };
    Ok((poisoned, targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DataPoint;

    /// `p = <0,10,15,0,1>_0` plus class-1 points spanning [20, 40] on the
    /// second feature, so the whole feature ranges over [0, 40].
    fn example() -> Dataset<f64> {
        Dataset::from_points(vec![
            DataPoint::new(vec![0.0, 10.0, 15.0, 0.0, 1.0], 0),
            DataPoint::new(vec![1.0, 0.0, 14.0, 2.0, 1.0], 0),
            DataPoint::new(vec![3.0, 20.0, 11.0, 1.0, 0.0], 1),
            DataPoint::new(vec![2.0, 40.0, 12.0, 5.0, 0.0], 1),
        ])
        .unwrap()
    }

    fn second_feature_of_p() -> TargetSelection {
        TargetSelection {
            point_indices: vec![0],
            feature_indices: vec![1],
        }
    }

    fn spec(kind: Perturbation, epsilon_p: f64, epsilon_f: f64) -> PoisonSpec {
        PoisonSpec {
            kind,
            epsilon_p,
            epsilon_f,
            seed: 11,
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in Perturbation::ALL {
            assert_eq!(k.name().parse::<Perturbation>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("flipping".parse::<Perturbation>().is_err());
    }

    #[test]
    fn zero_rate_selects_nothing() {
        let t = select_targets(50, 10, &spec(Perturbation::Zeroing, 0.0, 0.0));
        assert!(t.point_indices.is_empty() && t.feature_indices.is_empty());
    }

    #[test]
    fn ten_percent_of_1628_points() {
        let t = select_targets(1628, 166, &spec(Perturbation::LabelFlipping, 10.0, 20.0));
        assert_eq!(t.point_indices.len(), 163);
        assert_eq!(t.feature_indices.len(), 33);
        assert!(t.point_indices.windows(2).all(|w| w[0] < w[1]));
        assert!(*t.point_indices.last().unwrap() < 1628);
    }

    #[test]
    fn selection_does_not_depend_on_kind() {
        let a = select_targets(300, 57, &spec(Perturbation::Zeroing, 25.0, 15.0));
        let b = select_targets(300, 57, &spec(Perturbation::Noising, 25.0, 15.0));
        assert_eq!(a, b);
    }

    #[test]
    fn zeroing_example() {
        let d = example();
        let out = apply_zeroing(&d, &second_feature_of_p()).unwrap();
        assert_eq!(out.points()[0], DataPoint::new(vec![0.0, 0.0, 15.0, 0.0, 1.0], 0));
        assert_eq!(&out.points()[1..], &d.points()[1..]);
        assert_eq!(out.provenance(), Provenance::Poisoned);
    }

    #[test]
    fn zeroing_a_zero_cell_changes_nothing() {
        let d = example();
        let t = TargetSelection {
            point_indices: vec![0],
            feature_indices: vec![0],
        };
        assert_eq!(apply_zeroing(&d, &t).unwrap().points(), d.points());
    }

    #[test]
    fn empty_selection_only_changes_provenance() {
        let d = example();
        let out = apply_zeroing(&d, &TargetSelection::default()).unwrap();
        assert_eq!(out.points(), d.points());
        assert_eq!(out.provenance(), Provenance::Poisoned);
    }

    #[test]
    fn noising_draws_from_opposite_class_range() {
        let d = example();
        let out = apply_noising(&d, &second_feature_of_p(), 5).unwrap();
        let v = out.points()[0].features[1];
        assert!((20.0..=40.0).contains(&v), "{v}");
        assert_eq!(out.points()[0].features[0], 0.0);
        assert_eq!(out.points()[0].features[2..], [15.0, 0.0, 1.0]);
    }

    #[test]
    fn noising_degenerate_range() {
        let d = example();
        let t = TargetSelection {
            point_indices: vec![0, 1],
            feature_indices: vec![4],
        };
        let out = apply_noising(&d, &t, 3).unwrap();
        // class 1 has feature 4 constant at 0
        assert_eq!(out.points()[0].features[4], 0.0);
        assert_eq!(out.points()[1].features[4], 0.0);
    }

    #[test]
    fn noising_thousand_draws_stay_in_range() {
        let d = example();
        for s in 0..1000 {
            let out = apply_noising(&d, &second_feature_of_p(), s).unwrap();
            let v = out.points()[0].features[1];
            assert!((20.0..=40.0).contains(&v), "seed {s}: {v}");
        }
    }

    #[test]
    fn noising_requires_opposite_class() {
        let d = Dataset::from_points(vec![DataPoint::new(vec![1.0], 0), DataPoint::new(vec![2.0], 0)]).unwrap();
        let t = TargetSelection {
            point_indices: vec![0],
            feature_indices: vec![0],
        };
        assert!(matches!(apply_noising(&d, &t, 0), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn out_of_ranging_example() {
        let d = example();
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..64 {
            let out = apply_out_of_ranging(&d, &second_feature_of_p(), s).unwrap();
            let v = out.points()[0].features[1];
            assert!(v == -1.0 || v == 41.0, "{v}");
            seen.insert(v as i64);
            if v == -1.0 {
                assert_eq!(out.points()[0].features, vec![0.0, -1.0, 15.0, 0.0, 1.0]);
            }
        }
        assert_eq!(seen.len(), 2, "both sides of the range are used");
    }

    #[test]
    fn out_of_ranging_zero_width_range() {
        let d = Dataset::from_points(vec![DataPoint::new(vec![0.0], 0), DataPoint::new(vec![0.0], 1)]).unwrap();
        let t = TargetSelection {
            point_indices: vec![0, 1],
            feature_indices: vec![0],
        };
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..32 {
            for p in apply_out_of_ranging(&d, &t, s).unwrap().points() {
                assert!(p.features[0] == -1.0 || p.features[0] == 1.0);
                seen.insert(p.features[0] as i64);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![-1, 1]);
    }

    #[test]
    fn out_of_ranging_escapes_large_f32_values() {
        let d = Dataset::from_points(vec![DataPoint::new(vec![3.0e9f32], 0), DataPoint::new(vec![-3.0e9f32], 1)])
            .unwrap();
        let t = TargetSelection {
            point_indices: vec![0, 1],
            feature_indices: vec![0],
        };
        for s in 0..16 {
            for p in apply_out_of_ranging(&d, &t, s).unwrap().points() {
                assert!(p.features[0] > 3.0e9 || p.features[0] < -3.0e9);
            }
        }
    }

    #[test]
    fn label_flipping_example_and_involution() {
        let d = example();
        let t = second_feature_of_p();
        let once = apply_label_flipping(&d, &t).unwrap();
        assert_eq!(once.points()[0], DataPoint::new(vec![0.0, 10.0, 15.0, 0.0, 1.0], 1));
        let twice = apply_label_flipping(&once, &t).unwrap();
        assert_eq!(twice.points(), d.points());
    }

    #[test]
    fn label_flipping_hamming_count() {
        let points = (0..100).map(|i| DataPoint::new(vec![i as f64], (i % 2) as u8)).collect();
        let d = Dataset::from_points(points).unwrap();
        let (out, _) = poison(&d, &spec(Perturbation::LabelFlipping, 35.0, 0.0)).unwrap();
        let differing = d
            .points()
            .iter()
            .zip(out.points())
            .filter(|(a, b)| a.label != b.label)
            .count();
        assert_eq!(differing, 35);
    }

    #[test]
    fn out_of_range_indices_are_rejected() {
        let d = example();
        let t = TargetSelection {
            point_indices: vec![4],
            feature_indices: vec![0],
        };
        assert!(matches!(apply_zeroing(&d, &t), Err(Error::IndexOutOfRange { index: 4, .. })));
        let t = TargetSelection {
            point_indices: vec![0],
            feature_indices: vec![5],
        };
        assert!(apply_out_of_ranging(&d, &t, 0).is_err());
        // feature indices are irrelevant for label flipping
        assert!(apply_label_flipping(&d, &t).is_ok());
    }

    #[test]
    fn rates_are_validated() {
        let d = example();
        assert!(poison(&d, &spec(Perturbation::Zeroing, 101.0, 10.0)).is_err());
        assert!(poison(&d, &spec(Perturbation::Zeroing, 10.0, -1.0)).is_err());
    }
}
