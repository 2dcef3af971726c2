use ndarray::{ArrayView2, Axis};

use super::kmeans::nearest_centroid;

/// Fraction of the given stationary observations nearest each centroid.
///
/// `None` when there are no observations or no centroids.
pub fn occupancy_distribution(points: ArrayView2<f64>, centroids: &[Vec<f64>]) -> Option<Vec<f64>> {
    if points.nrows() == 0 || centroids.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; centroids.len()];
    for x in points.axis_iter(Axis(0)) {
        counts[nearest_centroid(x, centroids)] += 1;
    }
    let n = points.nrows() as f64;
    Some(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn location_entropy(occupancy: &[f64]) -> f64 {
    -occupancy
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Euclidean distance between a day's occupancy and the user's mean occupancy.
pub fn circadian_movement(day: &[f64], mean: &[f64]) -> f64 {
    assert_eq!(day.len(), mean.len(), "occupancy vectors differ in length");
    day.iter()
        .zip(mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
