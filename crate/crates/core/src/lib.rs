//! Change point detection and post-segmentation inference for linear
//! regression models whose coefficient vector shifts at unknown times.
//!
//! The pipeline has three stages:
//!
//! 1. [`mcscan`] locates change points by scanning local covariances between
//!    the regressors and the response over a deterministic multiscale
//!    collection of intervals ([`seeded`]), selecting estimates with the
//!    narrowest-over-threshold rule.
//! 2. [`estimate`] estimates the parameter change at each detected location
//!    directly, either by an l1-penalised quadratic program (LOPE) or by
//!    constrained l1 minimisation (CLOM).
//! 3. [`inference`] de-sparsifies those estimates using a CLIME precision
//!    matrix ([`precision`]) and builds simultaneous confidence intervals.
//!
//! [`sim`] provides the synthetic scenarios and evaluation metrics used to
//! validate the pipeline.
//!
//! Intervals are half-open `(a, b]` over 1-based observation times, so the
//! interval `(a, b]` covers the rows with 0-based indices `a..b`. A change
//! point `θ` means observations `1..=θ` follow the old regime.

pub mod data;
pub mod error;
pub mod estimate;
pub mod inference;
mod linalg;
pub mod lp;
pub mod mcscan;
pub mod precision;
pub mod rng;
pub mod seeded;
pub mod sim;

pub use data::{
    interval_gram, mad_standardize, CrossProductSums, IntervalGram, IntervalMean,
    RegressionDataset, Standardized, MAD_CONSISTENCY,
};
pub use error::{Error, Result};
pub use estimate::{
    anchor_intervals, clom, cv_lambda, estimate_all, lope, naive_diff, AnchorInterval,
    DiffEstimate, DiffMethod, LambdaCvOptions, Tuning,
};
pub use inference::{
    bootstrap_ci, desparsify, gamma_hat, gaussian_ci, infer_all, location_weights,
    split_even_odd, BandReport, CiMethod, ConfidenceBand, DesparsifiedEstimate,
    InferenceOptions, NoiseCovariance, SplitData,
};
pub use mcscan::{
    auto_select, default_threshold, default_trimming, detect, detect_single, detector,
    scan_interval, solution_path, DetectorPeak, PathEntry, SegmentationResult, SolutionPath,
    ThresholdKind, ThresholdPolicy, Trimming, DEFAULT_C_PI,
};
pub use precision::{clime, cv_eta, EtaCvOptions, PrecisionEstimate};
pub use rng::RNG_ALGORITHM;
pub use seeded::{IntervalSet, SeededInterval};
pub use sim::{
    evaluate_detection, evaluate_inference, DetectionReport, InferenceReport, Scenario,
    ScenarioConfig, Truth,
};
