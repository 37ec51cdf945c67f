//! Feature selection driven by a spatially-aware class separability
//! criterion, with a small evaluation harness.
//!
//! The pipeline is: load and scale a labeled table ([`dataset`]), score
//! feature subsets ([`separability`]), grow a subset greedily
//! ([`selector`]), then evaluate the ranking with kNN accuracy or k-means NMI
//! curves ([`evaluation`]) and compare algorithms across datasets
//! ([`stats`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod selector;
pub mod separability;
pub mod stats;

pub use dataset::{
    load_csv, minmax_normalize, partition_by_class, stratified_folds, ClassPartition, Dataset,
    FoldAssignment, LabelColumn,
};
pub use error::{Error, Result};
pub use evaluation::{
    curve_for_ranking, kmeans_deterministic, kmeans_seeds, knn_accuracy, nmi, performance_curve,
    EvalConfig, EvaluationCurve, Metric,
};
pub use selector::{gain, select, select_with_workers, SelectionStep, SelectionTrace};
pub use separability::{
    separability, Centroids, FeatureSubset, SeparabilityParams, SeparabilityScore, Variant,
};
pub use stats::{friedman, nemenyi_cd, rank_rows, FriedmanResult, RankTable};
