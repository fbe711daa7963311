//! Certainty equivalents via the quadratic value-function coefficients, the
//! welfare decomposition into initial wealth / trading profit / penalties,
//! and pointwise welfare gaps between equilibria.
//!
//! Two independent routes compute total welfare: the coefficient-ODE route
//! (backward RK4 of the ten beta functions) and the analytic moment route
//! (valid under pi = 0, theta_{i,-} = w0/M, phi0 = phi1 = 0). They must agree
//! to quadrature tolerance, which the acceptance suite checks.

use crate::equilibrium::{self, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::grid::{BackwardOdeOptions, Grid, PowerTail, TimeFunction, rk4_backward};
use crate::model::{ModelParams, TargetMoments};

/// The ten value-function coefficient curves for one initial holding.
#[derive(Debug, Clone)]
pub struct BetaSystem {
    /// beta_j on the grid, j = 0..=9; all vanish at t = 1.
    pub betas: [TimeFunction; 10],
    /// theta_{i,-} this system was solved for (beta0, beta7, beta8, beta9
    /// depend on it).
    pub theta_initial: f64,
}

/// Aggregate welfare split per the risk-neutral decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareReport {
    /// Total expected aggregate certainty equivalent ($).
    pub total: f64,
    /// Initial stock valuation component S0 * w0.
    pub initial_wealth: f64,
    /// Expected profit from absorbing noise-trader flow.
    pub trading_profit: f64,
    /// Sum of expected benchmark-deviation penalties.
    pub penalty: f64,
}

/// Backward-solve the coefficient ODE system for one initial holding.
pub fn solve_betas(
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
    mu1: &TimeFunction,
    theta_initial: f64,
) -> Result<BetaSystem> {
    params.validate()?;
    let n = kappa.n();
    let grid = Grid::new(n);
    let m = params.m as f64;
    let (alpha, pi, eta, w0) = (params.alpha, params.pi, params.eta, params.w0);
    let th = theta_initial;

    let opts = BackwardOdeOptions {
        singular: kappa.singular_at_one() || mu1.singular_at_one(),
        blowup_threshold: 1e12,
        ..Default::default()
    };
    let rhs = |t: f64, b: &[f64], db: &mut [f64]| {
        let ka = kappa.eval(t);
        let ga = gamma.eval(t);
        let m1 = mu1.eval(t);
        let d = m1 - 2.0 * ka; // (mu1 - 2 kappa), squared below
        let d2 = d * d;
        let gm1 = ga - 1.0;
        db[0] = -alpha * b[7] - b[4] * eta * eta
            + (gm1 * gm1 * ka * ka * (ka - m1) * (4.0 * w0 * w0 - 8.0 * m * w0 * th)
                - m * m * gm1 * gm1 * th * th * ka * m1 * m1)
                / (m * m * d2);
        db[1] = -ga * ga * ka * m1 * m1 / d2;
        db[2] = 8.0 * ga * ga * ka * ka * (m1 - ka) / (m * d2);
        db[3] = 4.0 * ga * ga * ka * ka * (ka - m1) / (m * m * d2);
        db[4] = (ka - m1) / (m * m) + 2.0 * b[4] * pi;
        db[5] = 4.0 * ga * ka * (ka - m1) / (m * (2.0 * ka - m1)) + b[5] * pi;
        db[6] = 4.0 * ga * ka * (m1 - ka) / (m * m * (2.0 * ka - m1)) + b[6] * pi;
        db[7] = -2.0 * alpha * b[4]
            + b[7] * pi
            + 4.0 * gm1 * (w0 - m * th) * ka * (ka - m1) / (m * m * (2.0 * ka - m1));
        db[8] = -alpha * b[5]
            + 2.0 * gm1 * ga * ka * (4.0 * w0 * ka * (ka - m1) + m * th * m1 * m1) / (m * d2);
        db[9] = -alpha * b[6] + 8.0 * gm1 * ga * ka * ka * (m * th - w0) * (ka - m1) / (m * m * d2);
    };
    let states = rk4_backward(&grid, &[0.0; 10], opts, rhs)
        .map_err(|t| Error::IntegrationOverflow { t, threshold: 1e12 })?;

    let betas: [TimeFunction; 10] = std::array::from_fn(|j| {
        TimeFunction::from_values((0..=n).map(|k| states[k][j]).collect())
    });
    Ok(BetaSystem { betas, theta_initial })
}

/// Certainty equivalent of investor i at time 0 for realized targets:
/// CE_i = X_{i,0} - quadratic(beta(0)), X_{i,0} = theta_{i,-} S0 + money.
pub fn certainty_equivalent(
    betas: &BetaSystem,
    sol: &EquilibriumSolution,
    i: usize,
    initial_money: f64,
) -> f64 {
    let p = &sol.params;
    let a_i = p.targets[i];
    let a_s = p.target_sum();
    let w0 = p.w0;
    let s0 = sol.price(w0, p.d0, 0.0);
    let b: Vec<f64> = betas.betas.iter().map(|f| f.value(0)).collect();
    let quad = b[0]
        + b[1] * a_i * a_i
        + b[2] * a_i * a_s
        + b[3] * a_s * a_s
        + b[4] * w0 * w0
        + b[5] * w0 * a_i
        + b[6] * a_s * w0
        + b[7] * w0
        + b[8] * a_i
        + b[9] * a_s;
    p.initial_holdings[i] * s0 + initial_money - quad
}

/// Ex-ante expected aggregate certainty equivalent, taking expectations over
/// the mean-zero exchangeable targets (E[a_i a_Sigma] = E[a_Sigma^2]/M).
/// This is the coefficient-ODE route to total welfare.
pub fn expected_ce_sum(sol: &EquilibriumSolution) -> Result<f64> {
    let p = &sol.params;
    let moments = need_moments(p)?;
    let m2_sum = p.m as f64 * moments.individual_sq;
    let s2 = moments.aggregate_sq;
    let e_s0 = sol.g0.value(0) + sol.sigma_w.value(0) * p.w0 + p.d0;

    // beta0 and beta7 depend on theta_{i,-}; solve once per distinct value
    let mut cache: Vec<(u64, BetaSystem)> = Vec::new();
    let mut total = 0.0;
    for i in 0..p.m {
        let th = p.initial_holdings[i];
        let key = th.to_bits();
        let betas = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, b)) => b.clone(),
            None => {
                let b = solve_betas(p, &sol.kappa, &sol.gamma, &sol.mu1, th)?;
                cache.push((key, b.clone()));
                b
            }
        };
        let b: Vec<f64> = betas.betas.iter().map(|f| f.value(0)).collect();
        let quad = b[0]
            + b[1] * moments.individual_sq
            + b[2] * s2 / p.m as f64
            + b[3] * s2
            + b[4] * p.w0 * p.w0
            + b[7] * p.w0;
        total += th * e_s0 - quad;
    }
    let _ = m2_sum;
    Ok(total)
}

fn need_moments(p: &ModelParams) -> Result<TargetMoments> {
    p.target_moments.ok_or_else(|| Error::InvalidParams {
        reason: "welfare computations need target_moments".into(),
    })
}

/// Check the parameter regime of the analytic moment shortcut.
fn check_restrictions(p: &ModelParams) -> Result<()> {
    if p.pi != 0.0 {
        return Err(Error::RestrictionViolation {
            reason: format!("analytic welfare route needs pi = 0, got {}", p.pi),
        });
    }
    if p.phi0 != 0.0 || p.phi1 != 0.0 {
        return Err(Error::RestrictionViolation {
            reason: "analytic welfare route needs phi0 = phi1 = 0".into(),
        });
    }
    let share = p.w0 / p.m as f64;
    for (i, &th) in p.initial_holdings.iter().enumerate() {
        if (th - share).abs() > 1e-9 * 1.0_f64.max(share.abs()) {
            return Err(Error::RestrictionViolation {
                reason: format!(
                    "analytic welfare route needs theta_{{i,-}} = w0/M; investor {i} holds {th}"
                ),
            });
        }
    }
    Ok(())
}

fn combine_tails(a: Option<PowerTail>, b: Option<PowerTail>) -> Option<PowerTail> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            assert!((x.exponent - y.exponent).abs() < 1e-12);
            Some(PowerTail { coef: x.coef + y.coef, exponent: x.exponent })
        }
    }
}

/// Analytic-moment welfare decomposition (Table-2 style components) for one
/// resolved mu1. Valid only under pi = 0, theta_{i,-} = w0/M, phi0 = phi1 = 0;
/// use the Monte Carlo estimator otherwise.
pub fn welfare_decomposition(
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
    mu1: &TimeFunction,
) -> Result<WelfareReport> {
    check_restrictions(params)?;
    let moments = need_moments(params)?;
    let sol = equilibrium::solve(params, kappa, gamma, mu1)?;
    let n = kappa.n();
    let grid = Grid::new(n);
    let m = params.m as f64;
    let (w0, alpha, eta) = (params.w0, params.alpha, params.eta);

    let e_s0 = sol.g0.value(0) + sol.sigma_w.value(0) * w0 + params.d0;
    let initial_wealth = e_s0 * w0;

    // E[w_t mu^_t] = (2k - mu1)/M E[w_t^2] + 2k(gamma-1)/M w0 E[w_t]
    let ew = |t: f64| w0 + alpha * t;
    let ew2 = |t: f64| w0 * w0 + (2.0 * w0 * alpha + eta * eta) * t + alpha * alpha * t * t;
    let profit_vals: Vec<f64> = (0..=n)
        .map(|k| {
            let t = grid.node(k);
            let ka = kappa.value(k);
            let m1 = mu1.value(k);
            ((2.0 * ka - m1) * ew2(t) + 2.0 * ka * (gamma.value(k) - 1.0) * w0 * ew(t)) / m
        })
        .collect();
    let profit_tail = combine_tails(
        kappa.tail().map(|t| t.scaled((2.0 * ew2(1.0) + 2.0 * (gamma.value(n) - 1.0) * w0 * ew(1.0)) / m)),
        mu1.tail().map(|t| t.scaled(-ew2(1.0) / m)),
    );
    let profit_f = match profit_tail {
        Some(t) => TimeFunction::with_tail(profit_vals, t),
        None => TimeFunction::from_values(profit_vals),
    };
    let trading_profit = profit_f.integral();

    // Sum_i E[L_{i,1}] with the target-deviation split into the target part
    // A_i = (gamma - y) a_i + (y/M) a_Sigma and the supply part
    // b = gamma w0/M + (w_t - w0)/M, independent of each other.
    let m2_sum = m * moments.individual_sq;
    let s2 = moments.aggregate_sq;
    let psi = |k: usize, t: f64| -> f64 {
        let ka = kappa.value(k);
        let ga = gamma.value(k);
        let m1 = mu1.value(k);
        let y = 2.0 * ka * ga / (2.0 * ka - m1);
        let sum_a2 = (ga - y) * (ga - y) * m2_sum + 2.0 * (ga - y) * (y / m) * s2 + y * y * s2 / m;
        let eb2 = (ga * w0 / m) * (ga * w0 / m)
            + 2.0 * (ga * w0 / m) * (alpha * t / m)
            + (alpha * alpha * t * t + eta * eta * t) / (m * m);
        sum_a2 + m * eb2
    };
    let pen_vals: Vec<f64> =
        (0..=n).map(|k| kappa.value(k) * psi(k, grid.node(k))).collect();
    let pen_tail = kappa.tail().map(|t| t.scaled(psi(n, 1.0)));
    let pen_f = match pen_tail {
        Some(t) => TimeFunction::with_tail(pen_vals, t),
        None => TimeFunction::from_values(pen_vals),
    };
    let penalty = pen_f.integral();

    Ok(WelfareReport {
        total: initial_wealth + trading_profit - penalty,
        initial_wealth,
        trading_profit,
        penalty,
    })
}

/// Pointwise welfare gaps relative to the competitive equilibrium:
/// the wealth difference f(mu1(t), t) - f(0, t) and the penalty difference
/// h(mu1(t), t) - h(0, t). Their integral difference is total welfare minus
/// competitive welfare.
pub fn welfare_gap(
    mu1: &TimeFunction,
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
) -> Result<(TimeFunction, TimeFunction)> {
    check_restrictions(params)?;
    let moments = need_moments(params)?;
    let n = mu1.n();
    let grid = Grid::new(n);
    let m = params.m as f64;
    let m2_sum = m * moments.individual_sq;
    let s2 = moments.aggregate_sq;
    let mut f_diff = vec![0.0; n + 1];
    let mut h_diff = vec![0.0; n + 1];
    for k in 0..=n {
        let t = grid.node(k);
        let c2 = t * (params.eta * params.eta
            + params.alpha * params.alpha * t
            + params.alpha * params.w0);
        let m1 = mu1.value(k);
        let ka = kappa.value(k);
        let ga = gamma.value(k);
        f_diff[k] = -m1 * c2 / m;
        let denom = 2.0 * ka - m1;
        h_diff[k] = m1 * m1 * ga * ga * ka / (denom * denom) * (m2_sum - s2 / m);
    }
    Ok((TimeFunction::from_values(f_diff), TimeFunction::from_values(h_diff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_gamma, builtin_kappa, resolve_mu1, BuiltinKappa, EquilibriumSelector,
        TargetRatio,
    };
    use approx::assert_abs_diff_eq;

    fn reference_params() -> ModelParams {
        ModelParams {
            m: 10,
            w0: 10.0,
            alpha: -1.0,
            pi: 0.0,
            eta: 1.0,
            phi0: 0.0,
            phi1: 0.0,
            d0: 20.0,
            targets: vec![1.0; 10],
            initial_holdings: vec![1.0; 10],
            target_moments: Some(TargetMoments { individual_sq: 1.0, aggregate_sq: 10.0 }),
        }
    }

    #[test]
    fn beta3_constant_forcing_closed_form() {
        // Radner, kappa = 1, gamma = 1, M = 10: beta3' = 4/(400) = 0.01 with
        // beta3(1) = 0, so beta3(t) = -0.01 (1 - t).
        let g = Grid::new(200);
        let params = reference_params();
        let kappa = builtin_kappa(BuiltinKappa::K1, &g);
        let gamma = TimeFunction::constant(&g, 1.0);
        let mu1 = TimeFunction::zeros(&g);
        let betas = solve_betas(&params, &kappa, &gamma, &mu1, 1.0).unwrap();
        for k in (0..=200).step_by(23) {
            let t = g.node(k);
            assert_abs_diff_eq!(betas.betas[3].value(k), -0.01 * (1.0 - t), epsilon = 1e-12);
        }
    }

    #[test]
    fn vanishing_penalty_kills_all_betas() {
        let g = Grid::new(100);
        let params = reference_params();
        let kappa = TimeFunction::constant(&g, 1e-9);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 = TimeFunction::zeros(&g);
        let betas = solve_betas(&params, &kappa, &gamma, &mu1, 1.0).unwrap();
        for f in &betas.betas {
            assert!(f.values().iter().all(|v| v.abs() < 1e-8));
        }
    }

    #[test]
    fn no_penalty_means_ce_equals_initial_wealth() {
        let g = Grid::new(100);
        let params = reference_params();
        let kappa = TimeFunction::constant(&g, 1e-9);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 = TimeFunction::zeros(&g);
        let sol = equilibrium::solve(&params, &kappa, &gamma, &mu1).unwrap();
        let betas = solve_betas(&params, &kappa, &gamma, &mu1, 1.0).unwrap();
        let s0 = sol.price(params.w0, params.d0, 0.0);
        let ce = certainty_equivalent(&betas, &sol, 0, 0.0);
        assert_abs_diff_eq!(ce, 1.0 * s0, epsilon = 1e-7);
    }

    #[test]
    fn two_routes_agree_on_total_welfare() {
        let g = Grid::new(1000);
        let params = reference_params();
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        for id in [BuiltinKappa::K1, BuiltinKappa::K3] {
            let kappa = builtin_kappa(id, &g);
            for sel in [
                EquilibriumSelector::Radner,
                EquilibriumSelector::Vayanos,
                EquilibriumSelector::WelfareMax,
            ] {
                let mu1 = resolve_mu1(&sel, &params, &kappa, &gamma).unwrap();
                let sol = equilibrium::solve(&params, &kappa, &gamma, &mu1).unwrap();
                let via_betas = expected_ce_sum(&sol).unwrap();
                let via_moments =
                    welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap().total;
                assert_abs_diff_eq!(via_betas, via_moments, epsilon = 2e-3);
            }
        }
    }

    #[test]
    fn decomposition_identity_holds() {
        let g = Grid::new(500);
        let params = reference_params();
        let kappa = builtin_kappa(BuiltinKappa::K2, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 =
            resolve_mu1(&EquilibriumSelector::WelfareMax, &params, &kappa, &gamma).unwrap();
        let rep = welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap();
        assert_abs_diff_eq!(
            rep.total,
            rep.initial_wealth + rep.trading_profit - rep.penalty,
            epsilon = 1e-12
        );
    }

    #[test]
    fn radner_k1_exact_decomposition() {
        // by-hand integrals: S0 w0 = 190, profit = 9.46667, penalty = 3.45333
        let g = Grid::new(1000);
        let params = reference_params();
        let kappa = builtin_kappa(BuiltinKappa::K1, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 = TimeFunction::zeros(&g);
        let rep = welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap();
        assert_abs_diff_eq!(rep.initial_wealth, 190.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.trading_profit, 9.46667, epsilon = 1e-4);
        assert_abs_diff_eq!(rep.penalty, 3.45333, epsilon = 1e-4);
    }

    #[test]
    fn restriction_violations_are_rejected() {
        let g = Grid::new(50);
        let mut params = reference_params();
        params.pi = 0.5;
        let kappa = builtin_kappa(BuiltinKappa::K1, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 = TimeFunction::zeros(&g);
        let err = welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap_err();
        assert_eq!(err.name(), "RestrictionViolation");
    }

    #[test]
    fn welfare_gap_signs_and_degenerate_cases() {
        let g = Grid::new(200);
        let params = reference_params();
        let kappa = builtin_kappa(BuiltinKappa::K1, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);

        // mu1 = 0 gives identically zero differences
        let zero = TimeFunction::zeros(&g);
        let (f0, h0) = welfare_gap(&zero, &params, &kappa, &gamma).unwrap();
        assert!(f0.values().iter().all(|&v| v == 0.0));
        assert!(h0.values().iter().all(|&v| v == 0.0));

        // the penalty difference is nonnegative for any admissible mu1
        let mu1 =
            resolve_mu1(&EquilibriumSelector::Vayanos, &params, &kappa, &gamma).unwrap();
        let (_, h) = welfare_gap(&mu1, &params, &kappa, &gamma).unwrap();
        assert!(h.values().iter().all(|&v| v >= 0.0));

        // equal targets with a_i = a_Sigma/M kill the dispersion term:
        // E[a_Sigma^2] = M^2 E[a_i^2] makes (sum E[a_i^2] - E[a_Sigma^2]/M) = 0
        let mut degen = params.clone();
        degen.target_moments =
            Some(TargetMoments { individual_sq: 1.0, aggregate_sq: 100.0 });
        let (_, hd) = welfare_gap(&mu1, &degen, &kappa, &gamma).unwrap();
        assert!(hd.values().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn gap_integral_equals_welfare_difference() {
        let g = Grid::new(1000);
        let params = reference_params();
        let kappa = builtin_kappa(BuiltinKappa::K2, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let mu1 =
            resolve_mu1(&EquilibriumSelector::Vayanos, &params, &kappa, &gamma).unwrap();
        let zero = TimeFunction::zeros(&g);
        let (f, h) = welfare_gap(&mu1, &params, &kappa, &gamma).unwrap();
        let gap = f.linear_combination(1.0, &h, -1.0).integral();
        let w_v = welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap().total;
        let w_r = welfare_decomposition(&params, &kappa, &gamma, &zero).unwrap().total;
        assert_abs_diff_eq!(gap, w_v - w_r, epsilon = 1e-6);
    }

    #[test]
    fn welfare_max_dominates_on_all_penalty_profiles() {
        let g = Grid::new(400);
        let params = reference_params();
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        for id in BuiltinKappa::ALL {
            let kappa = builtin_kappa(id, &g);
            let totals: Vec<f64> = [
                EquilibriumSelector::WelfareMax,
                EquilibriumSelector::Radner,
                EquilibriumSelector::Vayanos,
            ]
            .iter()
            .map(|sel| {
                let mu1 = resolve_mu1(sel, &params, &kappa, &gamma).unwrap();
                welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap().total
            })
            .collect();
            assert!(totals[0] >= totals[1] - 1e-9, "{}", id.label());
            assert!(totals[1] >= totals[2] - 1e-9, "{}", id.label());
        }
    }

    #[test]
    fn no_noise_trading_makes_competitive_optimal() {
        // eta = alpha = 0: the maximizer is mu1 = 0, so the totals coincide
        let g = Grid::new(300);
        let mut params = reference_params();
        params.eta = 0.0;
        params.alpha = 0.0;
        let kappa = builtin_kappa(BuiltinKappa::K1, &g);
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let zero = TimeFunction::zeros(&g);
        let w_r = welfare_decomposition(&params, &kappa, &gamma, &zero).unwrap().total;
        // any admissible mu1 only subtracts the nonnegative h difference
        let mu1 = kappa.scaled(-0.5);
        let w_other = welfare_decomposition(&params, &kappa, &gamma, &mu1).unwrap().total;
        assert!(w_other <= w_r + 1e-12);
    }

    #[test]
    fn expected_holdings_kappa_invariant_under_welfare_max() {
        // the welfare maximizer scales with kappa, so the expected holdings
        // profile does not move when kappa is rescaled
        let g = Grid::new(200);
        let mut params = reference_params();
        params.targets = vec![5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let gamma = builtin_gamma(TargetRatio::FrontLoaded, &g);
        let kappa = builtin_kappa(BuiltinKappa::K2, &g);
        let scaled = kappa.scaled(4.0);
        let mu_a =
            resolve_mu1(&EquilibriumSelector::WelfareMax, &params, &kappa, &gamma).unwrap();
        let mu_b =
            resolve_mu1(&EquilibriumSelector::WelfareMax, &params, &scaled, &gamma).unwrap();
        let sol_a = equilibrium::solve(&params, &kappa, &gamma, &mu_a).unwrap();
        let sol_b = equilibrium::solve(&params, &scaled, &gamma, &mu_b).unwrap();
        for &t in &[0.1, 0.4, 0.9] {
            assert_abs_diff_eq!(
                sol_a.expected_holdings(0, t),
                sol_b.expected_holdings(0, t),
                epsilon = 1e-9
            );
        }
    }
}
