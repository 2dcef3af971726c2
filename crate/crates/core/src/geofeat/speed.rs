use crate::ingest::{CoordMode, LocationSample};

use super::geometry::{euclidean, haversine_km};

/// Speeds along one user-day trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeedTrace {
    /// Speed in km/h at each observation. Empty for fewer than two samples.
    pub speeds: Vec<f64>,
    /// Speeds of consecutive pairs whose time gap is within the limit.
    pub displacements: Vec<f64>,
}

fn distance_km(a: &[f64], b: &[f64], mode: CoordMode) -> f64 {
    match mode {
        CoordMode::Geodetic => haversine_km(a[0], a[1], b[0], b[1]),
        CoordMode::Planar => euclidean(a, b) / 1000.0,
    }
}

/// Finite-difference speed at each observation of a time-sorted day.
///
/// The speed at sample `i` is the distance from sample `i - 1` over the
/// elapsed time; the first sample takes the first computed speed. Pairs more
/// than `max_gap_s` apart still give a speed but are left out of
/// `displacements`.
pub fn pairwise_speed(samples: &[LocationSample], mode: CoordMode, max_gap_s: f64) -> SpeedTrace {
    if samples.len() < 2 {
        return SpeedTrace::default();
    }
    let mut speeds = Vec::with_capacity(samples.len());
    let mut displacements = Vec::with_capacity(samples.len() - 1);
    for pair in samples.windows(2) {
        let dt = pair[1].timestamp - pair[0].timestamp;
        let km = distance_km(&pair[0].coords, &pair[1].coords, mode);
        let speed = if dt > 0.0 {
            km / (dt / 3600.0)
        } else if km == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        speeds.push(speed);
        if dt > 0.0 && dt <= max_gap_s {
            displacements.push(speed);
        }
    }
    speeds.insert(0, speeds[0]);
    SpeedTrace {
        speeds,
        displacements,
    }
}

/// Stationary iff the speed is strictly below the threshold.
pub fn classify_stationary(speeds: &[f64], threshold_kmh: f64) -> Vec<bool> {
    speeds.iter().map(|&s| s < threshold_kmh).collect()
}

/// Stationary flags for a day: the dataset's own flags when every sample
/// carries one, otherwise the speed classification, otherwise `None`.
pub fn stationary_flags(
    samples: &[LocationSample],
    trace: &SpeedTrace,
    threshold_kmh: f64,
) -> Option<Vec<bool>> {
    if !samples.is_empty() && samples.iter().all(|s| s.stationary.is_some()) {
        return Some(samples.iter().map(|s| s.stationary.unwrap()).collect());
    }
    if trace.speeds.len() == samples.len() && !samples.is_empty() {
        return Some(classify_stationary(&trace.speeds, threshold_kmh));
    }
    None
}
