//! Latent-space outlier detection: DBSCAN over encoder outputs, detection
//! scoring, eps selection aids, and 2D projection for scatter plots.

pub mod dbscan;
pub mod detect;
pub mod scatter;
pub mod score;

pub use dbscan::{dbscan, euclidean, ClusterAssignment, ClusterLabel};
pub use detect::{detect, elbow_eps, k_distance_profile, DetectConfig, Detection};
pub use scatter::{latent_scatter, pca_2d, ScatterPoint, ScatterTag};
pub use score::{score, ClassMetrics, Confusion, DetectionReport};
