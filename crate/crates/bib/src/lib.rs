//! Sequential estimation of a stochastically drifting Gaussian mean via
//! discounted Bayesian inference and Bayesian/inverse-Bayesian (BIB) inference,
//! plus the analysis pipeline built on top of it: split-interval RMSE metrics,
//! active/rest burst dynamics, reset-interval statistics, and discrete
//! truncated-power-law vs. exponential tail fitting with AIC-weight model
//! selection.

pub mod analysis;
pub mod environment;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod tailfit;
