//! Reproduction of the welfare tables on the discrete trading-round grid.
//!
//! The reference table values were produced by dividing the day into N
//! trading rounds and accumulating integrals as per-round sums evaluated at
//! round-end times t_k = k/N, k = 1..=N (exploding severities store
//! kappa(1 - 1/(2N)) at the final round). The solvers elsewhere in this crate
//! use higher-order quadrature; this module exists so the emitted tables are
//! comparable digit-for-digit with the reference values, which carry the
//! round-sum convention's O(1/N) bias.

use crate::error::Result;
use crate::grid::Grid;
use crate::model::{
    builtin_gamma, builtin_kappa, resolve_mu1, BuiltinKappa, EquilibriumSelector, ModelParams,
    TargetRatio,
};
use crate::welfare::WelfareReport;

/// Welfare totals per penalty profile (rows) and selector
/// (columns: welfare-max, competitive, demand-curve).
#[derive(Debug, Clone, Copy)]
pub struct TableOne {
    pub rows: [[f64; 3]; 4],
}

/// Welfare components of the welfare-maximizing equilibrium per penalty
/// profile: total, S0*w0, trading profit, penalties.
#[derive(Debug, Clone, Copy)]
pub struct TableTwo {
    pub rows: [[f64; 4]; 4],
}

pub const SELECTOR_LABELS: [&str; 3] = ["welfare", "radner", "vayanos"];

/// Round-sum welfare decomposition for one penalty profile and selector.
pub fn round_sum_report(
    params: &ModelParams,
    kappa_id: BuiltinKappa,
    selector: &EquilibriumSelector,
    grid: &Grid,
) -> Result<WelfareReport> {
    let kappa = builtin_kappa(kappa_id, grid);
    let gamma = builtin_gamma(TargetRatio::FrontLoaded, grid);
    let mu1 = resolve_mu1(selector, params, &kappa, &gamma)?;
    let moments = params.target_moments.ok_or_else(|| crate::error::Error::InvalidParams {
        reason: "table reproduction needs target_moments".into(),
    })?;

    let n = grid.n();
    let h = grid.h();
    let m = params.m as f64;
    let (w0, alpha, eta) = (params.w0, params.alpha, params.eta);
    let m2_sum = m * moments.individual_sq;
    let s2 = moments.aggregate_sq;

    // sigma_w at round starts from the remaining round-end sums
    let mut sigma_w = vec![0.0; n + 1];
    for k in (0..n).rev() {
        sigma_w[k] = sigma_w[k + 1] - h * (2.0 * kappa.value(k + 1) - mu1.value(k + 1)) / m;
    }
    let mut g0_0 = 0.0;
    let mut profit = 0.0;
    let mut penalty = 0.0;
    for k in 1..=n {
        let t = grid.node(k);
        let ka = kappa.value(k);
        let ga = gamma.value(k);
        let m1 = mu1.value(k);
        g0_0 += h * (alpha * sigma_w[k] + w0 * 2.0 * ka * (1.0 - ga) / m);
        let ew = w0 + alpha * t;
        let ew2 = w0 * w0 + (2.0 * w0 * alpha + eta * eta) * t + alpha * alpha * t * t;
        profit += h * ((2.0 * ka - m1) * ew2 + 2.0 * ka * (ga - 1.0) * w0 * ew) / m;
        let y = 2.0 * ka * ga / (2.0 * ka - m1);
        let sum_a2 = (ga - y) * (ga - y) * m2_sum + 2.0 * (ga - y) * (y / m) * s2 + y * y * s2 / m;
        let eb2 = (ga * w0 / m) * (ga * w0 / m)
            + 2.0 * (ga * w0 / m) * (alpha * t / m)
            + (alpha * alpha * t * t + eta * eta * t) / (m * m);
        penalty += h * ka * (sum_a2 + m * eb2);
    }
    let initial_wealth = (g0_0 + sigma_w[0] * w0 + params.d0) * w0;
    Ok(WelfareReport {
        total: initial_wealth + profit - penalty,
        initial_wealth,
        trading_profit: profit,
        penalty,
    })
}

/// Welfare totals for all four penalty profiles and three selectors.
pub fn table_one(params: &ModelParams, grid: &Grid) -> Result<TableOne> {
    let mut rows = [[0.0; 3]; 4];
    for (r, id) in BuiltinKappa::ALL.into_iter().enumerate() {
        for (c, sel) in [
            EquilibriumSelector::WelfareMax,
            EquilibriumSelector::Radner,
            EquilibriumSelector::Vayanos,
        ]
        .iter()
        .enumerate()
        {
            rows[r][c] = round_sum_report(params, id, sel, grid)?.total;
        }
    }
    Ok(TableOne { rows })
}

/// Welfare components of the welfare-maximizing equilibrium.
pub fn table_two(params: &ModelParams, grid: &Grid) -> Result<TableTwo> {
    let mut rows = [[0.0; 4]; 4];
    for (r, id) in BuiltinKappa::ALL.into_iter().enumerate() {
        let rep = round_sum_report(params, id, &EquilibriumSelector::WelfareMax, grid)?;
        rows[r] = [rep.total, rep.initial_wealth, rep.trading_profit, rep.penalty];
    }
    Ok(TableTwo { rows })
}
