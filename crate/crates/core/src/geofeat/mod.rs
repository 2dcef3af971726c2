//! Location clustering and daily mobility features.
//!
//! For each user a diagonal Gaussian mixture is fit to every location sample
//! (component count by BIC, up to twenty), and k-means is fit to the
//! stationary samples only. Home and work anchors come from the mixture,
//! the night anchor from the stationary clusters. Each day is then reduced
//! to fifteen features; see [`FEATURE_NAMES`].

mod anchors;
mod features;
pub mod geometry;
pub mod gmm;
pub mod kmeans;
mod occupancy;
mod speed;

use thiserror::Error;

pub use anchors::{infer_anchor_clusters, Anchors, HourWindow};
pub use features::{
    day_feature_vector, extract_features, extract_user_features, fit_bundle, ClusterBundle,
    DayFeatureRecord, FeatureConfig, FEATURE_NAMES, N_FEATURES,
};
pub use geometry::{haversine_km, min_enclosing_circle, Circle, Projection};
pub use gmm::{fit_em, fit_gmm_bic, EmConfig, GaussianMixture, GmmConfig, GmmSelection};
pub use kmeans::{select_kmeans, KMeansConfig, KMeansSelection};
pub use occupancy::{circadian_movement, location_entropy, occupancy_distribution};
pub use speed::{classify_stationary, pairwise_speed, stationary_flags, SpeedTrace};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("not enough data: {0}")]
    NoData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
