//! Modeling, identification and robust gait optimization for a compliant
//! worm robot in a corrugated pipe.
//!
//! The pipeline maps a commanded sinusoidal gait through a slack-aware
//! first-order actuation model to the realized body length, drives a hybrid
//! locomotion model (continuous two-state dynamics plus discrete
//! anchoring-position switching on the ridge lattice), recovers the cable
//! force and evaluates power, energy and the speed/power/cost-of-transport
//! metrics. On top of that sit least-squares parameter identification from
//! logged runs and a margin-robustified NSGA-II gait optimizer with a
//! price-of-robustness margin scan.

pub mod actuation;
pub mod config;
pub mod energy;
pub mod error;
pub mod hybrid;
pub mod identify;
pub mod io;
pub mod model;
pub mod optimize;
pub mod simplex;

pub use actuation::{
    propagate_actuation, propagate_effective, slack_clip, ActuationParams, BodyLengthTrace,
};
pub use config::ModelConfig;
pub use energy::{
    accumulate_energy, estimate_idle_power, gait_metrics, instantaneous_power, power_series,
    EnergyParams, GaitMetrics,
};
pub use error::{Error, Result};
pub use hybrid::{
    apply_switching, recover_cable_force, reduced_dynamics, simulate, simulate_measured,
    HybridState, MarginSetting, SimTrace, SwitchEvent,
};
pub use identify::{
    fit_actuation, fit_energy, fit_locomotion, EnergyRun, FitOptions, FitReport, PowerLog,
    TrackingLog,
};
pub use model::{
    commanded_gait, fin_force, FinForceLaw, GaitBounds, GaitParams, RobotParams,
};
pub use optimize::{
    evaluate_gait, margin_scan, nsga2_optimize, select_representative_points, MarginScanResult,
    Models, OptimizerConfig, ParetoPoint,
};
