use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::gmm::GaussianMixture;
use super::kmeans::nearest_centroid;
use crate::ingest::seconds_of_day;

/// Half-open window of local clock hours, possibly wrapping past midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourWindow {
    pub start_hour: u32,
    pub end_hour: u32,
}

impl HourWindow {
    pub const HOME: Self = Self { start_hour: 23, end_hour: 6 };
    pub const WORK: Self = Self { start_hour: 11, end_hour: 16 };
    pub const NIGHT: Self = Self { start_hour: 0, end_hour: 6 };

    pub fn contains(&self, timestamp: f64) -> bool {
        let h = seconds_of_day(timestamp) / 3600.0;
        let (s, e) = (f64::from(self.start_hour), f64::from(self.end_hour));
        if s <= e {
            h >= s && h < e
        } else {
            h >= s || h < e
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchors {
    pub home_gmm_id: Option<usize>,
    pub work_gmm_id: Option<usize>,
    pub night_stationary_id: Option<usize>,
}

/// Most frequent label, lowest label on ties; `None` for no votes.
fn plurality(labels: impl Iterator<Item = usize>, n_labels: usize) -> Option<usize> {
    let mut counts = vec![0usize; n_labels];
    let mut any = false;
    for l in labels {
        counts[l] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Some(best)
}

/// Home and work are the mixture components holding the plurality of samples
/// in the evening and working-hour windows; the night cluster is the
/// stationary centroid holding the plurality of stationary samples between
/// midnight and six.
pub fn infer_anchor_clusters(
    timestamps: &[f64],
    points: ArrayView2<f64>,
    stationary: &[bool],
    gmm: Option<&GaussianMixture>,
    centroids: &[Vec<f64>],
) -> Anchors {
    let rows = || timestamps.iter().zip(points.axis_iter(Axis(0)));
    let by_component = |window: HourWindow| {
        gmm.and_then(|g| {
            plurality(
                rows().filter(|(t, _)| window.contains(**t)).map(|(_, x)| g.predict(x)),
                g.n_components(),
            )
        })
    };
    let night = if centroids.is_empty() {
        None
    } else {
        plurality(
            rows()
                .zip(stationary)
                .filter(|((t, _), &s)| s && HourWindow::NIGHT.contains(**t))
                .map(|((_, x), _)| nearest_centroid(x, centroids)),
            centroids.len(),
        )
    };
    Anchors {
        home_gmm_id: by_component(HourWindow::HOME),
        work_gmm_id: by_component(HourWindow::WORK),
        night_stationary_id: night,
    }
}
