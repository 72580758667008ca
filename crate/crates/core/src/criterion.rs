//! Entropy and information gain for binary labels, shared by feature ranking
//! and tree induction.

use crate::scalar::Scalar;

/// Gains at or below this are treated as zero.
pub const GAIN_EPSILON: f64 = 1e-12;

/// Shannon entropy in bits of a two-class count vector.
pub fn entropy(counts: [usize; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold<T> {
    pub value: T,
    pub gain: f64,
}

/// Best `value <= threshold` split of `column`, which is sorted in place by
/// value. Candidate thresholds are midpoints between consecutive distinct
/// values; both sides must hold at least `min_leaf` points. Ties keep the
/// lowest threshold. Returns `None` when no admissible candidate exists.
pub fn best_threshold<T: Scalar>(column: &mut [(T, u8)], min_leaf: usize) -> Option<Threshold<T>> {
    let n = column.len();
    if n < 2 {
        return None;
    }
    column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
    let mut total = [0usize; 2];
    for &(_, y) in column.iter() {
        total[y as usize] += 1;
    }
    let parent = entropy(total);
    let nf = n as f64;
    let min_leaf = min_leaf.max(1);

    let mut left = [0usize; 2];
    let mut best: Option<Threshold<T>> = None;
    for i in 0..n - 1 {
        left[column[i].1 as usize] += 1;
        let (lo, hi) = (column[i].0, column[i + 1].0);
        if lo == hi {
            continue;
        }
        let n_left = i + 1;
        if n_left < min_leaf || n - n_left < min_leaf {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let children = (n_left as f64 / nf) * entropy(left) + ((n - n_left) as f64 / nf) * entropy(right);
        let gain = (parent - children).max(0.0);
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(Threshold {
                value: T::midpoint(lo, hi),
                gain,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy([0, 0]), 0.0);
        assert_eq!(entropy([5, 0]), 0.0);
        assert!((entropy([4, 4]) - 1.0).abs() < 1e-15);
        // H(1/4, 3/4) = 2 - 3/4 log2 3
        let expected = 2.0 - 0.75 * 3f64.log2();
        assert!((entropy([1, 3]) - expected).abs() < 1e-15);
    }

    #[test]
    fn perfect_split_has_unit_gain() {
        let mut col = vec![(3.0, 1u8), (1.0, 0), (4.0, 1), (2.0, 0)];
        let t = best_threshold(&mut col, 1).unwrap();
        assert_eq!(t.value, 2.5);
        assert!((t.gain - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_column_has_no_threshold() {
        let mut col = vec![(7.0f64, 0u8), (7.0, 1), (7.0, 1)];
        assert!(best_threshold(&mut col, 1).is_none());
    }

    #[test]
    fn min_leaf_excludes_small_children() {
        let mut col = vec![(1.0f64, 0u8), (2.0, 1), (3.0, 1), (4.0, 1)];
        let t = best_threshold(&mut col, 1).unwrap();
        assert_eq!(t.value, 1.5);
        let t = best_threshold(&mut col, 2).unwrap();
        assert_eq!(t.value, 2.5);
    }
}
