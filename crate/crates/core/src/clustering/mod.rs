//! Clustering detector bank: k-means distance, DBSCAN noise and the
//! one-class kernel machine.

pub mod dbscan;
pub mod kmeans;
pub mod ocsvm;

pub use dbscan::{dbscan, estimate_eps, estimate_eps_quantile, DbscanLabel, DbscanModel, DbscanParams};
pub use kmeans::{kmeans_fit, kmeans_fit_with, kmeans_score, select_k, silhouette, KMeansModel};
pub use ocsvm::ocsvm_detect;
