//! Cohort-based simulation of bilateral remittance flows.
//!
//! Migrants are grouped into cohorts by origin, destination, sex, age and month.
//! Each cohort's monthly probability of remitting comes from a logistic score
//! over earnings surplus, family presence, income gaps and recent disasters in
//! the origin country. Expected flows are calibrated against an observed panel,
//! and counterfactual runs attribute the share of flows mobilised by disasters.

pub mod baseline;
pub mod behavior;
pub mod calibration;
pub mod cli;
pub mod dataio;
pub mod fixtures;
pub mod flows;
pub mod output;
pub mod population;
pub mod scenarios;
pub mod scalar;
pub mod time;

pub use scalar::Scalar;

/// Behavioural parameters in double precision.
pub type Params = behavior::BehaviorParams<f64>;
/// Behavioural parameters in single precision.
pub type Params32 = behavior::BehaviorParams<f32>;
/// Covariates in double precision.
pub type Covariates = behavior::CovariateVector<f64>;
/// Natural spline in double precision.
pub type Spline = dataio::NaturalCubicSpline<f64>;
