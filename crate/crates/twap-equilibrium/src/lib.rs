//! Closed-form continuous-time equilibria for benchmark-tracking trading.
//!
//! Strategic investors track intraday cumulative-trading targets (TWAP-style
//! deterministic schedules or VWAP-style stochastic volume curves) under
//! quadratic deviation penalties while absorbing an inelastic, mean-reverting
//! noise-trader supply. Each admissible price-impact function pins down one
//! equilibrium; the crate solves the coefficient ODE systems in closed form,
//! computes welfare and its decomposition, maps empirical price-impact curves
//! to the implied equilibrium, extends the model to gamma-bridge targets and
//! exponential utilities, and simulates sample paths for the moment checks.
//!
//! Sign conventions follow the supply view throughout: `w_t` is the stock
//! the strategic investors must hold, so `sigma_w(t) <= 0` whenever
//! `phi1 <= 0` and a positive supply shock depresses prices.

pub mod calibrate;
pub mod equilibrium;
pub mod error;
pub mod exputil;
pub mod grid;
pub mod model;
pub mod montecarlo;
pub mod tables;
pub mod vwap;
pub mod welfare;

pub use error::{Error, Result};
pub use grid::{Grid, PowerTail, TimeFunction};
pub use model::{
    builtin_gamma, builtin_kappa, resolve_mu1, BuiltinKappa, EquilibriumSelector, ModelParams,
    TargetMoments, TargetRatio,
};
