//! Empirical Bayes estimation of a vector of Poisson means.
//!
//! Estimators:
//!
//! * [`robbins::classical_rule`]: Robbins' plug-in `(y+1) P̂(y+1) / P̂(y)`;
//! * [`robbins::adjusted_robbins`]: `Δ_h`, Poisson-noise smoothing,
//!   averaging over the noise and isotonic projection;
//! * [`normal::modified_normal`]: `Δ_{N,h}`, square-root transform, a
//!   kernel Tweedie rule, back-transform and isotonic projection;
//! * [`losses::kl_plugin_rule`]: plug-in rule for the KL-type loss;
//! * [`npmle`]: Bayes rule of a grid NPMLE of the mixing distribution.
//!
//! [`cv`] chooses the smoothing parameter by binomial thinning and [`sim`]
//! estimates risks by Monte Carlo for fixed mean vectors.

pub mod counts;
pub mod cv;
pub mod error;
pub mod estimator;
pub mod io;
pub mod isotonic;
pub mod losses;
pub mod normal;
pub mod npmle;
pub mod report;
pub mod robbins;
pub mod sampling;
pub mod sim;

pub use counts::{
    apply_rule, empirical_pmf, poisson_pmf, CountSample, DecisionRule, DiscretePrior, EmpiricalPmf,
};
pub use error::{Error, Result};
pub use estimator::Estimator;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_100_601;
