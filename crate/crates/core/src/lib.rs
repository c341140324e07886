//! Analytic and simulated symbol error rates for unamplified IM-DD links
//! limited by laser relative intensity noise (RIN).
//!
//! The link collapses to a memoryless Gaussian channel whose noise variance
//! grows with the transmitted level:
//!
//! ```text
//! Y = X + Z * sqrt(sigma_ele^2 + (X + beta)^2 * sigma_rin^2)
//! ```
//!
//! On top of that channel the crate provides MAP decision thresholds for
//! arbitrary PAM geometries and input distributions, closed-form SER,
//! mutual information, a seeded Monte Carlo simulator and the geometric and
//! probabilistic shaping optimizers.

pub mod constellation;
pub mod detection;
pub mod error;
pub mod link;
pub mod metrics;
pub mod monte_carlo;
pub mod optim;
pub mod shaping;
pub mod special;

pub use constellation::{entropy, oma_dbm_to_watts, solve_bias, solve_eta, Constellation, ImBias};
pub use detection::{build_thresholds, detect_map, detect_threshold, ThresholdRule, ThresholdSet};
pub use error::{Error, PairError, Result, ThresholdError};
pub use link::{fiber_loss, tia_gain, ChannelModel, LinkParams};
pub use metrics::{analytic_ser, mutual_information, SerBreakdown};
pub use monte_carlo::{
    simulate, simulate_many, sweep, Detector, McConfig, McResult, PointStatus, RuleOutcome, SweepResult,
};
pub use special::q_function;
