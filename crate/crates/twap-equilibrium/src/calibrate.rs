//! Maps an empirically estimated price-impact curve lambda(t) to the implied
//! price-impact selector mu1(t) and terminal loading phi1.
//!
//! With uncorrelated order flow (pi = 0) the equilibrium identifies
//! lambda(t) = sigma_w(t) eta, so differentiating gives
//! mu1(t) = 2 kappa(t) - M lambda'(t)/eta and phi1 = lambda(1)/eta.

use crate::error::{Error, Result};
use crate::grid::{Grid, TimeFunction};
use crate::model::ModelParams;

/// An estimated price-impact curve. Under the supply sign convention the
/// curve is negative and must flatten over the day (lambda' > kappa eta / M)
/// for a calibration to exist.
#[derive(Debug, Clone)]
pub struct LambdaCurve {
    pub lambda: TimeFunction,
    /// Closed-form derivative when the data source provides one; otherwise
    /// the implied map falls back to finite differences on the grid.
    pub derivative: Option<TimeFunction>,
}

impl LambdaCurve {
    pub fn new(lambda: TimeFunction) -> Self {
        LambdaCurve { lambda, derivative: None }
    }

    pub fn with_derivative(lambda: TimeFunction, derivative: TimeFunction) -> Self {
        assert_eq!(lambda.n(), derivative.n());
        LambdaCurve { lambda, derivative: Some(derivative) }
    }

    /// Extract the curve implied by a solved equilibrium (lambda = sigma_w
    /// eta), tagging the exact derivative eta [(2 kappa - mu1)/M + pi sigma_w].
    pub fn from_solution(sol: &crate::equilibrium::EquilibriumSolution) -> Self {
        let p = &sol.params;
        let m = p.m as f64;
        let n = sol.n();
        let lambda = sol.sigma_w.scaled(p.eta);
        let deriv = TimeFunction::from_values(
            (0..=n)
                .map(|k| {
                    p.eta
                        * ((2.0 * sol.kappa.value(k) - sol.mu1.value(k)) / m
                            + p.pi * sol.sigma_w.value(k))
                })
                .collect(),
        );
        LambdaCurve { lambda, derivative: Some(deriv) }
    }
}

/// Second-order finite differences on the grid: central in the interior,
/// 3-point one-sided at the endpoints (exact for quadratics).
pub fn finite_difference_derivative(f: &TimeFunction) -> TimeFunction {
    let n = f.n();
    let h = 1.0 / n as f64;
    let v = f.values();
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    for k in 1..n {
        d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    TimeFunction::from_values(d)
}

/// Implied price impact and terminal loading from an estimated lambda curve.
///
/// Validates the second-order condition, which here reads
/// lambda'(t) > kappa(t) eta / M; on failure reports the largest shortfall.
pub fn implied_mu1(
    curve: &LambdaCurve,
    params: &ModelParams,
    kappa: &TimeFunction,
) -> Result<(TimeFunction, f64)> {
    if params.pi != 0.0 {
        return Err(Error::NonzeroPi { pi: params.pi });
    }
    if params.eta <= 0.0 {
        return Err(Error::InvalidParams { reason: "calibration needs eta > 0".into() });
    }
    let n = kappa.n();
    if curve.lambda.n() != n {
        return Err(Error::GridMismatch { expected: n, got: curve.lambda.n() });
    }
    let grid = Grid::new(n);
    let m = params.m as f64;
    let deriv = match &curve.derivative {
        Some(d) => d.clone(),
        None => finite_difference_derivative(&curve.lambda),
    };

    let mut worst_shortfall = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    let mut values = vec![0.0; n + 1];
    for k in 0..=n {
        values[k] = 2.0 * kappa.value(k) - m * deriv.value(k) / params.eta;
        let shortfall = kappa.value(k) * params.eta / m - deriv.value(k);
        if shortfall > worst_shortfall {
            worst_shortfall = shortfall;
            worst_t = grid.node(k);
        }
    }
    if worst_shortfall >= 0.0 {
        return Err(Error::InfeasibleCalibration { t: worst_t, shortfall: worst_shortfall });
    }
    // reconstruct the singular tail when both pieces carry one
    let tail = match (kappa.tail(), deriv.tail()) {
        (Some(kt), Some(dt)) => {
            Some(crate::grid::PowerTail {
                coef: 2.0 * kt.coef - m * dt.coef / params.eta,
                exponent: kt.exponent,
            })
        }
        _ => None,
    };
    let mu1 = match tail {
        Some(t) if t.coef != 0.0 => TimeFunction::with_tail(values, t),
        _ => TimeFunction::from_values(values),
    };
    let phi1 = curve.lambda.value(n) / params.eta;
    Ok((mu1, phi1))
}
