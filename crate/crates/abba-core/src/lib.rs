//! Relative evaluation of two keyword-spotting models from accept-only data.
//!
//! A deployed keyword spotter collects audio only when it fires, so absolute
//! recall and false-positive rate cannot be measured from production data.
//! When a baseline model A and a candidate B run on two randomized user
//! populations and each model is additionally decoded offline over the
//! other's collected utterances, the recall and FPR *ratios* between the
//! models become estimable from accepted data alone.
//!
//! The crate provides:
//!
//! - the line-delimited record model and thresholded aggregation into
//!   weighted contingency counts ([`Dataset`], [`build_counts`]);
//! - direct, low-variance approximate, semi-supervised, and classic
//!   A/B-test ratio estimators, plus threshold sweeps ([`estimators`]);
//! - seeded percentile-bootstrap confidence intervals ([`bootstrap_ci`]);
//! - cubic score-to-probability calibration for machine labels
//!   ([`CalibrationModel`]);
//! - Neyman annotation planning across agreement strata
//!   ([`neyman_allocate`]);
//! - reproducible Monte Carlo generators with known ground truth
//!   ([`simulator`]).

pub mod bootstrap;
pub mod calibration;
pub mod counts;
pub mod error;
pub mod estimators;
pub mod planner;
pub mod record;
pub mod simulator;

pub use bootstrap::{bootstrap_ci, BootstrapCi, BootstrapConfig, Estimator};
pub use calibration::{annotate_soft, CalibrationModel};
pub use counts::{build_counts, ContingencyCounts};
pub use error::{Error, Result};
pub use estimators::{
    base_metrics, rfpr_ab_test, rfpr_approx, rfpr_direct, rrecall_approx, rrecall_direct,
    select_threshold, ss_rfpr, ss_rrecall, threshold_sweep, BaseMetrics, Method, Metric,
    RatioEstimate, Region, SelectionGoal, SweepMethod, SweepRow,
};
pub use planner::{
    derive_weights, neyman_allocate, AllocationPlan, StratumAllocation, StratumSpec,
};
pub use record::{Arm, ArmTraffic, Dataset, Thresholds, UtteranceRecord};
pub use simulator::{
    derived_reverse_conditionals, simulate_abba, simulate_ss, AbbaSimConfig, BetaParams,
    GroundTruth, LabelMachineSpec, SsSimConfig, SIMULATED_THRESHOLD,
};
