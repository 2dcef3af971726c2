//! Per-user location models and per-day mobility features.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::anchors::{infer_anchor_clusters, Anchors};
use super::geometry::{enclosing_radius, Projection};
use super::gmm::{fit_gmm_bic, GaussianMixture, GmmConfig, DEFAULT_VARIANCE_FLOOR};
use super::kmeans::{nearest_centroid, select_kmeans, KMeansConfig};
use super::occupancy::{circadian_movement, location_entropy, occupancy_distribution};
use super::speed::{pairwise_speed, stationary_flags, SpeedTrace};
use super::GeoError;
use crate::ingest::{day_of, Cohort, CoordMode, LocationSample};
use crate::seed::{derive_seed, string_key};
use crate::table::FeatureRow;

pub const N_FEATURES: usize = 15;

/// Short names for f1..f15, in column order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "fraction_moving",
    "mean_speed_kmh",
    "speed_std_kmh",
    "log_location_variance",
    "circadian_movement",
    "location_entropy",
    "enclosing_radius",
    "home_fraction",
    "work_fraction",
    "night_cluster_fraction",
    "gmm_log_likelihood",
    "gmm_aic",
    "gmm_bic",
    "gmm_clusters_visited",
    "stationary_clusters_visited",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub mode: CoordMode,
    pub stationary_threshold_kmh: f64,
    /// Consecutive samples further apart than this are not a displacement.
    pub max_gap_s: f64,
    pub k_max: usize,
    pub m_max: usize,
    pub restarts: usize,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            mode: CoordMode::Geodetic,
            stationary_threshold_kmh: 1.0,
            max_gap_s: 3600.0,
            k_max: 20,
            m_max: 20,
            restarts: 5,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            seed: 0,
        }
    }
}

/// Location models fitted to one user's whole study period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBundle {
    pub user_id: String,
    pub mode: CoordMode,
    pub projection: Option<Projection>,
    pub dim: usize,
    pub gmm: GaussianMixture,
    pub gmm_bic: f64,
    pub stationary_centroids: Vec<Vec<f64>>,
    /// Average over days of the daily stationary-cluster occupancy.
    pub mean_occupancy: Vec<f64>,
    #[serde(flatten)]
    pub anchors: Anchors,
}

impl ClusterBundle {
    /// Working-plane coordinates (meters for geodetic input).
    pub fn project(&self, samples: &[LocationSample]) -> Array2<f64> {
        project(samples, self.projection.as_ref(), self.dim)
    }
}

fn project(samples: &[LocationSample], projection: Option<&Projection>, dim: usize) -> Array2<f64> {
    let mut data = Vec::with_capacity(samples.len() * dim);
    for s in samples {
        match projection {
            Some(p) => data.extend_from_slice(&p.project(s.coords[0], s.coords[1])),
            None => data.extend_from_slice(&s.coords[..dim]),
        }
    }
    Array2::from_shape_vec((samples.len(), dim), data).expect("consistent dimensionality")
}

/// One user-day of features. Missing entries hold NaN and are flagged in
/// `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct DayFeatureRecord {
    pub user_id: String,
    pub date: NaiveDate,
    pub values: [f64; N_FEATURES],
    pub missing: [bool; N_FEATURES],
}

impl DayFeatureRecord {
    fn empty(user_id: &str, date: NaiveDate) -> Self {
        Self {
            user_id: user_id.to_string(),
            date,
            values: [f64::NAN; N_FEATURES],
            missing: [true; N_FEATURES],
        }
    }

    fn set(&mut self, idx: usize, value: Option<f64>) {
        if let Some(v) = value {
            self.values[idx] = v;
            self.missing[idx] = false;
        }
    }

    /// Feature `index` (0-based), `None` when missing.
    pub fn get(&self, index: usize) -> Option<f64> {
        (!self.missing[index]).then_some(self.values[index])
    }

    pub fn to_row(&self) -> FeatureRow {
        FeatureRow {
            user_id: self.user_id.clone(),
            date: self.date,
            values: (0..N_FEATURES).map(|i| self.get(i)).collect(),
        }
    }
}

struct DayMotion {
    trace: SpeedTrace,
    flags: Option<Vec<bool>>,
}

fn day_motion(samples: &[LocationSample], config: &FeatureConfig) -> DayMotion {
    let trace = pairwise_speed(samples, config.mode, config.max_gap_s);
    let flags = stationary_flags(samples, &trace, config.stationary_threshold_kmh);
    DayMotion { trace, flags }
}

fn select_rows(points: ArrayView2<f64>, keep: &[bool]) -> Array2<f64> {
    let idx: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();
    points.select(Axis(0), &idx)
}

/// Splits a time-sorted single-user trace into calendar days.
fn split_days(samples: &[LocationSample]) -> Vec<(NaiveDate, &[LocationSample])> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || day_of(samples[i].timestamp) != day_of(samples[start].timestamp) {
            out.push((day_of(samples[start].timestamp), &samples[start..i]));
            start = i;
        }
    }
    out
}

/// Fits the mixture, the stationary clustering and the anchor clusters to
/// all of one user's samples (sorted by time).
pub fn fit_bundle(
    user_id: &str,
    samples: &[LocationSample],
    config: &FeatureConfig,
) -> Result<ClusterBundle, GeoError> {
    if samples.is_empty() {
        return Err(GeoError::NoData(format!("user {user_id} has no samples")));
    }
    let (projection, dim) = match config.mode {
        CoordMode::Geodetic => (
            Some(Projection::about_mean(samples.iter().map(|s| s.coords.as_slice()))),
            2,
        ),
        CoordMode::Planar => (None, samples[0].coords.len()),
    };
    if samples.iter().any(|s| s.coords.len() < dim) {
        return Err(GeoError::Config(format!("user {user_id} mixes coordinate dimensionality")));
    }
    let points = project(samples, projection.as_ref(), dim);
    let user_seed = derive_seed(config.seed, string_key(user_id));

    let gmm = fit_gmm_bic(
        points.view(),
        &GmmConfig {
            k_max: config.k_max,
            restarts: config.restarts,
            seed: derive_seed(user_seed, 1),
            em: super::gmm::EmConfig {
                variance_floor: config.variance_floor,
                ..Default::default()
            },
        },
    )?;

    let mut stationary = Vec::with_capacity(samples.len());
    let mut day_spans = Vec::new();
    let mut offset = 0;
    for (_, day) in split_days(samples) {
        let motion = day_motion(day, config);
        match motion.flags {
            Some(f) => stationary.extend(f),
            None => stationary.extend(std::iter::repeat_n(false, day.len())),
        }
        day_spans.push(offset..offset + day.len());
        offset += day.len();
    }

    let stationary_points = select_rows(points.view(), &stationary);
    let centroids = if stationary_points.nrows() > 0 {
        select_kmeans(
            stationary_points.view(),
            &KMeansConfig {
                m_max: config.m_max,
                restarts: config.restarts,
                seed: derive_seed(user_seed, 2),
                variance_floor: config.variance_floor,
            },
        )?
        .fit
        .centroids
    } else {
        Vec::new()
    };

    let mut mean_occupancy = vec![0.0; centroids.len()];
    let mut occupied_days = 0usize;
    for span in &day_spans {
        let day_stationary = select_rows(points.slice(ndarray::s![span.clone(), ..]), &stationary[span.clone()]);
        if let Some(occ) = occupancy_distribution(day_stationary.view(), &centroids) {
            occupied_days += 1;
            mean_occupancy.iter_mut().zip(occ).for_each(|(m, o)| *m += o);
        }
    }
    if occupied_days > 0 {
        mean_occupancy.iter_mut().for_each(|m| *m /= occupied_days as f64);
    }

    let timestamps: Vec<f64> = samples.iter().map(|s| s.timestamp).collect();
    let anchors = infer_anchor_clusters(
        &timestamps,
        points.view(),
        &stationary,
        Some(&gmm.model),
        &centroids,
    );

    Ok(ClusterBundle {
        user_id: user_id.to_string(),
        mode: config.mode,
        projection,
        dim,
        gmm_bic: gmm.bic,
        gmm: gmm.model,
        stationary_centroids: centroids,
        mean_occupancy,
        anchors,
    })
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Computes the fifteen features for one user-day from that day's samples
/// (time-sorted) and the user's fitted bundle.
pub fn day_feature_vector(
    user_id: &str,
    date: NaiveDate,
    samples: &[LocationSample],
    bundle: &ClusterBundle,
    config: &FeatureConfig,
) -> DayFeatureRecord {
    let mut rec = DayFeatureRecord::empty(user_id, date);
    if samples.is_empty() {
        return rec;
    }
    let n = samples.len() as f64;
    let points = bundle.project(samples);
    let motion = day_motion(samples, config);

    if let Some(flags) = &motion.flags {
        rec.set(0, Some(flags.iter().filter(|s| !**s).count() as f64 / n));
    }
    if let Some((mean, std)) = mean_std(&motion.trace.displacements) {
        rec.set(1, Some(mean));
        rec.set(2, Some(std));
    }
    let total_var: f64 = points.var_axis(Axis(0), 0.0).sum();
    rec.set(3, Some((total_var + config.variance_floor).ln()));

    let centroids = &bundle.stationary_centroids;
    let occupancy = motion.flags.as_ref().and_then(|flags| {
        occupancy_distribution(select_rows(points.view(), flags).view(), centroids)
    });
    if let Some(occ) = &occupancy {
        if occ.len() == bundle.mean_occupancy.len() {
            rec.set(4, Some(circadian_movement(occ, &bundle.mean_occupancy)));
        }
        rec.set(5, Some(location_entropy(occ)));
    }

    let rows: Vec<Vec<f64>> = points.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    rec.set(6, enclosing_radius(&rows));

    let assigned: Vec<usize> = points.axis_iter(Axis(0)).map(|x| bundle.gmm.predict(x)).collect();
    let fraction_at = |id: usize| assigned.iter().filter(|&&a| a == id).count() as f64 / n;
    rec.set(7, bundle.anchors.home_gmm_id.map(fraction_at));
    rec.set(8, bundle.anchors.work_gmm_id.map(fraction_at));
    if let (Some(night), Some(flags)) = (bundle.anchors.night_stationary_id, &motion.flags) {
        let at_night_cluster = points
            .axis_iter(Axis(0))
            .zip(flags)
            .filter(|(x, &s)| s && nearest_centroid(*x, centroids) == night)
            .count();
        rec.set(9, Some(at_night_cluster as f64 / n));
    }

    let ll = bundle.gmm.log_likelihood(points.view());
    let p = bundle.gmm.param_count() as f64;
    rec.set(10, Some(ll));
    rec.set(11, Some(2.0 * p - 2.0 * ll));
    rec.set(12, Some(p * n.ln() - 2.0 * ll));

    let mut visited = vec![false; bundle.gmm.n_components()];
    assigned.iter().for_each(|&a| visited[a] = true);
    rec.set(13, Some(visited.iter().filter(|v| **v).count() as f64));

    if motion.flags.is_some() && !centroids.is_empty() {
        let count = occupancy.map_or(0, |occ| occ.iter().filter(|&&p| p > 0.0).count());
        rec.set(14, Some(count as f64));
    }
    rec
}

/// Fits a bundle for one user and emits a record for every day that has
/// samples (or only for `days`, when given).
pub fn extract_user_features(
    user_id: &str,
    samples: &[LocationSample],
    days: Option<&std::collections::BTreeSet<NaiveDate>>,
    config: &FeatureConfig,
) -> Result<(ClusterBundle, Vec<DayFeatureRecord>), GeoError> {
    let bundle = fit_bundle(user_id, samples, config)?;
    let by_day: BTreeMap<NaiveDate, &[LocationSample]> = split_days(samples).into_iter().collect();
    let records = match days {
        Some(days) => days
            .iter()
            .map(|d| {
                let day = by_day.get(d).copied().unwrap_or(&[]);
                day_feature_vector(user_id, *d, day, &bundle, config)
            })
            .collect(),
        None => by_day
            .iter()
            .map(|(d, day)| day_feature_vector(user_id, *d, day, &bundle, config))
            .collect(),
    };
    Ok((bundle, records))
}

/// Runs [`extract_user_features`] for every user in `samples` (sorted by
/// user then time), restricted to the cohort when one is given. Users are
/// processed in parallel; output order is by user id then date.
pub fn extract_features(
    samples: &[LocationSample],
    cohort: Option<&Cohort>,
    config: &FeatureConfig,
) -> Result<(Vec<ClusterBundle>, Vec<DayFeatureRecord>), GeoError> {
    let mut users: Vec<(&str, &[LocationSample])> = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || samples[i].user_id != samples[start].user_id {
            users.push((samples[start].user_id.as_str(), &samples[start..i]));
            start = i;
        }
    }
    if let Some(c) = cohort {
        users.retain(|(u, _)| c.days.contains_key(*u));
    }
    let results: Vec<_> = users
        .par_iter()
        .map(|(user, s)| extract_user_features(user, s, cohort.and_then(|c| c.days.get(*user)), config))
        .collect::<Result<_, _>>()?;
    let mut bundles = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    for (b, r) in results {
        bundles.push(b);
        records.extend(r);
    }
    Ok((bundles, records))
}
