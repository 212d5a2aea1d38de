//! Quantile-criterion policy optimization.
//!
//! This crate trains stochastic policies to maximize an `alpha`-quantile of the
//! episodic return distribution rather than its mean. Two algorithms drive a
//! coupled pair of stochastic-approximation recursions on different timescales:
//! a fast tracker for the running quantile estimate and a slow ascent on policy
//! parameters.
//!
//! * [`algos`] implements QPO (on-policy, single update per batch) and QPPO
//!   (proximal variant with importance-weighted tracking and a clipped
//!   surrogate), plus mean-based REINFORCE and PPO baselines for comparison.
//! * [`autodiff`] is a small reverse-mode tape over affine layers and tanh,
//!   enough to differentiate log-densities of MLP policies.
//! * [`policy`] provides the MLP policy with categorical, Gaussian, and
//!   simplex heads.
//! * [`env`] contains the experiment environments: a zero-mean synthetic
//!   benchmark, and a stock-trading environment over generated or CSV prices.
//! * [`quantile`] holds the quantile tracker, its step-size schedule, and the
//!   density estimators used to rescale the policy gradient.
//! * [`harness`] wires everything into reproducible multi-replication
//!   experiments with learning-curve output.
//! * [`bandit`] is a one-parameter analytic benchmark used to validate the
//!   two-timescale coupling end to end.

pub mod algos;
pub mod autodiff;
pub mod bandit;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod quantile;

pub use error::{Error, Result};
