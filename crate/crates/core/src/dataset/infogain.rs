use super::Dataset;
use crate::criterion::best_threshold;
use crate::scalar::Scalar;

pub(super) fn gains<T: Scalar>(d: &Dataset<T>) -> Vec<f64> {
    (0..d.n_features())
        .map(|f| {
            let mut column: Vec<(T, u8)> = d.points().iter().map(|p| (p.features[f], p.label)).collect();
            best_threshold(&mut column, 1).map_or(0.0, |t| t.gain)
        })
        .collect()
}

pub(super) fn rank(gains: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap().then(a.cmp(&b)));
    order.truncate(k);
    order
}
