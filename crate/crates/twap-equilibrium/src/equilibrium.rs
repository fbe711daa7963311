//! The benchmark-tracking equilibrium under linear preferences: coefficient
//! functions (g0, g, sigma_w), drift loadings mu0..mu5, optimal holdings, and
//! the affine price map.
//!
//! All backward integrals use the closed-form solutions of the linear ODE
//! system; the exponential kernel e^{pi (t-u)} is evaluated analytically
//! inside the quadrature, so large |pi| poses no stiffness problem.

use crate::error::{Error, Result};
use crate::grid::{Grid, TimeFunction};
use crate::model::{self, ModelParams};

/// Solved equilibrium coefficients on the grid, plus a snapshot of the inputs.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub params: ModelParams,
    pub kappa: TimeFunction,
    pub gamma: TimeFunction,
    pub mu1: TimeFunction,
    /// Deterministic liquidity-premium component ($/share).
    pub g0: TimeFunction,
    /// Loading of the price on the aggregate target imbalance.
    pub g: TimeFunction,
    /// Loading of the price on the current noise-trader supply (<= 0 when phi1 <= 0).
    pub sigma_w: TimeFunction,
    pub mu0: TimeFunction,
    pub mu2: TimeFunction,
    pub mu3: TimeFunction,
    pub mu4: TimeFunction,
    pub mu5: TimeFunction,
}

/// Per-time loadings of the optimal holdings formula.
#[derive(Debug, Clone, Copy)]
pub struct HoldingsProfile {
    /// Coefficient on the noise-trader supply: always 1/M.
    pub load_w: f64,
    /// Coefficient on (a_i - a_Sigma/M): 2 kappa gamma / (2 kappa - mu1).
    pub load_target: f64,
    /// Coefficient on (theta_{i,-} - w0/M): 2 kappa (1 - gamma) / (2 kappa - mu1).
    pub load_initial: f64,
}

/// Shared sigma_w solve, used verbatim by the VWAP solver so the two agree
/// bit for bit:
/// sigma_w(t) = e^{pi(t-1)} phi1 - int_t^1 e^{pi(t-u)} (2 kappa - mu1)/M du.
pub(crate) fn solve_sigma_w(
    params: &ModelParams,
    kappa: &TimeFunction,
    mu1: &TimeFunction,
    grid: &Grid,
) -> TimeFunction {
    let m = params.m as f64;
    let integrand = kappa.linear_combination(2.0 / m, mu1, -1.0 / m);
    let cum = integrand.cumulative_exp_kernel_integral(params.pi);
    let values = (0..=grid.n())
        .map(|k| {
            let t = grid.node(k);
            (params.pi * (t - 1.0)).exp() * params.phi1 - cum[k]
        })
        .collect();
    TimeFunction::from_values(values)
}

/// Solve the equilibrium for a resolved price-impact function.
pub fn solve(
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
    mu1: &TimeFunction,
) -> Result<EquilibriumSolution> {
    params.validate()?;
    let n = kappa.n();
    if gamma.n() != n || mu1.n() != n {
        return Err(Error::GridMismatch { expected: n, got: gamma.n().min(mu1.n()) });
    }
    let grid = Grid::new(n);
    model::check_second_order(mu1, kappa, &grid)?;
    kappa.square_integral_estimate()?;
    mu1.square_integral_estimate()?;
    if kappa.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParams {
            reason: "penalty severity must be strictly positive".into(),
        });
    }
    if gamma.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParams {
            reason: "target ratio must be nonnegative".into(),
        });
    }

    let m = params.m as f64;
    let sigma_w = solve_sigma_w(params, kappa, mu1, &grid);

    // g(t) = phi0 + int_t^1 2 gamma kappa / M
    let gk = product_with_kappa(gamma, kappa, &grid, 2.0 / m);
    let cum_gk = gk.cumulative_integral_to_one();
    let g = TimeFunction::from_values(
        (0..=n).map(|k| params.phi0 + cum_gk[k]).collect(),
    );

    // g0(t) = alpha int_t^1 sigma_w + w0 int_t^1 2 kappa (1 - gamma) / M
    let one_minus_gamma =
        TimeFunction::constant(&grid, 1.0).linear_combination(1.0, gamma, -1.0);
    let k1g = product_with_kappa(&one_minus_gamma, kappa, &grid, 2.0 / m);
    let cum_sw = sigma_w.cumulative_integral_to_one();
    let cum_k1g = k1g.cumulative_integral_to_one();
    let g0 = TimeFunction::from_values(
        (0..=n)
            .map(|k| params.alpha * cum_sw[k] + params.w0 * cum_k1g[k])
            .collect(),
    );

    // drift loadings (finite at every stored node thanks to the cap convention)
    let node = |f: &TimeFunction, k: usize| f.value(k);
    let mut mu0 = vec![0.0; n + 1];
    let mut mu2 = vec![0.0; n + 1];
    let mut mu3 = vec![0.0; n + 1];
    let mut mu4 = vec![0.0; n + 1];
    let mut mu5 = vec![0.0; n + 1];
    for k in 0..=n {
        let ka = node(kappa, k);
        let ga = node(gamma, k);
        let m1 = node(mu1, k);
        let d = 2.0 * ka - m1;
        mu0[k] = 4.0 * ka * ga * (m1 - ka) / (m * d);
        mu2[k] = -2.0 * ka * ga * m1 / d;
        mu3[k] = 2.0 * (ka - m1) / m;
        mu4[k] = 4.0 * (ga - 1.0) * ka * (ka - m1) / (m * d);
        mu5[k] = 2.0 * (ga - 1.0) * ka * m1 / d;
    }

    Ok(EquilibriumSolution {
        params: params.clone(),
        kappa: kappa.clone(),
        gamma: gamma.clone(),
        mu1: mu1.clone(),
        g0,
        g,
        sigma_w,
        mu0: TimeFunction::from_values(mu0),
        mu2: TimeFunction::from_values(mu2),
        mu3: TimeFunction::from_values(mu3),
        mu4: TimeFunction::from_values(mu4),
        mu5: TimeFunction::from_values(mu5),
    })
}

/// Sample c * f * kappa on kappa's grid, carrying the kappa tail scaled by the
/// smooth factor's value at t = 1.
fn product_with_kappa(
    f: &TimeFunction,
    kappa: &TimeFunction,
    grid: &Grid,
    c: f64,
) -> TimeFunction {
    let values: Vec<f64> =
        (0..=grid.n()).map(|k| c * f.value(k) * kappa.value(k)).collect();
    match kappa.tail() {
        Some(tail) => {
            TimeFunction::with_tail(values, tail.scaled(c * f.value(grid.n())))
        }
        None => TimeFunction::from_values(values),
    }
}

impl EquilibriumSolution {
    pub fn n(&self) -> usize {
        self.sigma_w.n()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n())
    }

    /// The holdings loadings at time t.
    pub fn holdings_profile(&self, t: f64) -> HoldingsProfile {
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        let d = 2.0 * ka - m1;
        HoldingsProfile {
            load_w: 1.0 / self.params.m as f64,
            load_target: 2.0 * ka * ga / d,
            load_initial: 2.0 * ka * (1.0 - ga) / d,
        }
    }

    /// Optimal equilibrium holdings of investor i given the current supply.
    pub fn holdings(&self, i: usize, w_t: f64, t: f64) -> f64 {
        let p = &self.params;
        let prof = self.holdings_profile(t);
        let m = p.m as f64;
        let a_sum = p.target_sum();
        prof.load_w * w_t
            + prof.load_target * (p.targets[i] - a_sum / m)
            + prof.load_initial * (p.initial_holdings[i] - p.w0 / m)
    }

    /// Equilibrium stock-price drift, a function of public information only.
    pub fn drift(&self, w_t: f64, t: f64) -> f64 {
        let p = &self.params;
        let m = p.m as f64;
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        (2.0 * ka - m1) / m * w_t + 2.0 * ka * (ga - 1.0) / m * p.w0
            - 2.0 * ka * ga / m * p.target_sum()
    }

    /// Drift perceived by investor i holding theta_i, the affine form in all
    /// six loadings. Equals `drift` when theta_i is the optimal holding.
    /// Coefficients are computed pointwise from the primitives (not by
    /// interpolating the stored loading grids) so the identity is exact at
    /// off-node times too.
    pub fn perceived_drift(&self, i: usize, theta_i: f64, w_t: f64, t: f64) -> f64 {
        let p = &self.params;
        let m = p.m as f64;
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        let d = 2.0 * ka - m1;
        let mu0 = 4.0 * ka * ga * (m1 - ka) / (m * d);
        let mu2 = -2.0 * ka * ga * m1 / d;
        let mu3 = 2.0 * (ka - m1) / m;
        let mu4 = 4.0 * (ga - 1.0) * ka * (ka - m1) / (m * d);
        let mu5 = 2.0 * (ga - 1.0) * ka * m1 / d;
        mu0 * p.target_sum()
            + m1 * theta_i
            + mu2 * p.targets[i]
            + mu3 * w_t
            + mu4 * p.w0
            + mu5 * p.initial_holdings[i]
    }

    /// Equilibrium price S_t = g0 + g a_Sigma + sigma_w w_t + D_t.
    pub fn price(&self, w_t: f64, d_t: f64, t: f64) -> f64 {
        self.g0.eval(t) + self.g.eval(t) * self.params.target_sum()
            + self.sigma_w.eval(t) * w_t
            + d_t
    }

    /// Invert the time-0 price for the aggregate target (needs g(0) != 0).
    pub fn infer_aggregate_target(&self, s0: f64) -> Result<f64> {
        let g0v = self.g.value(0);
        if g0v == 0.0 {
            return Err(Error::DomainError {
                reason: "g(0) = 0: the opening price does not reveal the aggregate target".into(),
            });
        }
        let p = &self.params;
        Ok((s0 - self.g0.value(0) - self.sigma_w.value(0) * p.w0 - p.d0) / g0v)
    }

    /// Deviation of investor i's optimal holdings from their target
    /// trajectory theta_{i,-} + gamma(t)(a_i - theta_{i,-}).
    pub fn twap_deviation(&self, i: usize, w_t: f64, t: f64) -> f64 {
        let p = &self.params;
        let ga = self.gamma.eval(t);
        let trajectory = p.initial_holdings[i] + ga * (p.targets[i] - p.initial_holdings[i]);
        self.holdings(i, w_t, t) - trajectory
    }

    /// The cross-investor average deviation: w_t/M - [w0/M + gamma (a_Sigma/M - w0/M)].
    pub fn average_deviation(&self, w_t: f64, t: f64) -> f64 {
        let p = &self.params;
        let m = p.m as f64;
        let ga = self.gamma.eval(t);
        w_t / m - (p.w0 / m + ga * (p.target_sum() / m - p.w0 / m))
    }

    /// E[theta_i,t | targets]: exact when pi = 0 and theta_{i,-} = w0/M.
    pub fn expected_holdings(&self, i: usize, t: f64) -> f64 {
        self.holdings(i, self.params.expected_supply(t), t)
    }

    /// Conditional holdings variance eta^2 t / M^2 (supply risk shared equally).
    pub fn holdings_variance(&self, t: f64) -> f64 {
        let m = self.params.m as f64;
        self.params.supply_variance(t) / (m * m)
    }

    /// E[drift_t | a_Sigma] along the expected supply path.
    pub fn expected_drift_profile(&self) -> TimeFunction {
        let grid = self.grid();
        let values = (0..=grid.n())
            .map(|k| {
                let t = grid.node(k);
                self.drift(self.params.expected_supply(t), t)
            })
            .collect();
        TimeFunction::from_values(values)
    }

    /// Conditional variance of the liquidity premium S_t - D_t:
    /// sigma_w(t)^2 V[w_t].
    pub fn liquidity_premium_variance(&self, t: f64) -> f64 {
        let s = self.sigma_w.eval(t);
        s * s * self.params.supply_variance(t)
    }

    /// Instantaneous quadratic variation of the price: sigma_w^2 eta^2 + 1.
    pub fn price_qv_rate(&self, t: f64) -> f64 {
        let s = self.sigma_w.eval(t);
        s * s * self.params.eta * self.params.eta + 1.0
    }

    /// Smallest margin kappa(t) - mu1(t) over the grid.
    pub fn second_order_margin(&self) -> f64 {
        (0..=self.n())
            .map(|k| self.kappa.value(k) - self.mu1.value(k))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pointwise comparative-statics verdicts between two solved equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparativeStatics {
    /// sigma_w(t) of `a` <= that of `b` at every node.
    pub sigma_w_below: bool,
    /// |sigma_w| of `a` <= |sigma_w| of `b` at every node (a is more liquid).
    pub more_liquid: bool,
}

pub fn compare(a: &EquilibriumSolution, b: &EquilibriumSolution) -> ComparativeStatics {
    let n = a.n().min(b.n());
    let mut below = true;
    let mut liquid = true;
    for k in 0..=n {
        let x = a.sigma_w.value(k);
        let y = b.sigma_w.value(k);
        if x > y + 1e-12 {
            below = false;
        }
        if x.abs() > y.abs() + 1e-12 {
            liquid = false;
        }
    }
    ComparativeStatics { sigma_w_below: below, more_liquid: liquid }
}
