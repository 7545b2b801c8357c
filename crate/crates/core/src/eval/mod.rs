//! Downstream evaluation: linear SVM on random features, baseline kernel
//! selectors, k-means labeling and retrieval metrics.

pub mod baselines;
pub mod kmeans;
pub mod retrieval;
pub mod svm;
pub mod tasks;

pub use baselines::{importance_sampling_weights, knn_bandwidth, ImportanceWeights};
pub use kmeans::{kmeans_label, KMeansResult};
pub use retrieval::{pr_curve, precision_recall};
pub use svm::{svm_error, svm_train, LinearModel};
