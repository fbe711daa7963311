//! Exponential-utility equilibrium: the coupled Riccati pair (beta4, sigma_w),
//! the remaining value-function coefficients, pricing loadings, and holdings.
//!
//! Unlike the risk-neutral model the coefficient ODEs are nonlinear and can
//! blow up in finite time, so the backward sweep watches for explosion and
//! confirms any hit at four times the resolution before reporting it.

use crate::error::{Error, Result};
use crate::grid::{rk4_backward, BackwardOdeOptions, Grid, TimeFunction};
use crate::model::ModelParams;

/// Model parameters under the exponential-utility restrictions
/// alpha = 0, pi = 0, eta = 1, theta_{i,-} = w0/M, with risk tolerance tau.
#[derive(Debug, Clone)]
pub struct ExpParams {
    pub base: ModelParams,
    pub tau: f64,
}

impl ExpParams {
    pub fn new(base: ModelParams, tau: f64) -> Result<Self> {
        base.validate()?;
        if tau <= 0.0 {
            return Err(Error::InvalidParams { reason: "risk tolerance tau must be > 0".into() });
        }
        if base.alpha != 0.0 || base.pi != 0.0 || base.eta != 1.0 {
            return Err(Error::InvalidParams {
                reason: "exponential model requires alpha = 0, pi = 0, eta = 1".into(),
            });
        }
        let share = base.w0 / base.m as f64;
        if base.initial_holdings.iter().any(|&th| (th - share).abs() > 1e-12) {
            return Err(Error::InvalidParams {
                reason: "exponential model requires theta_{i,-} = w0/M".into(),
            });
        }
        Ok(ExpParams { base, tau })
    }
}

/// Solved exponential-utility coefficients. Index positions of the state
/// vector used internally: [beta4, sigma_w, beta5, beta6, beta1, beta2,
/// beta3, beta8, beta0].
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub params: ExpParams,
    pub kappa: TimeFunction,
    pub gamma: TimeFunction,
    pub mu1: TimeFunction,
    pub beta4: TimeFunction,
    pub sigma_w: TimeFunction,
    pub beta0: TimeFunction,
    pub beta1: TimeFunction,
    pub beta2: TimeFunction,
    pub beta3: TimeFunction,
    pub beta5: TimeFunction,
    pub beta6: TimeFunction,
    pub beta8: TimeFunction,
    pub g: TimeFunction,
    pub g0: TimeFunction,
}

const STATE_DIM: usize = 9;

fn exp_rhs<'a>(
    params: &'a ExpParams,
    kappa: &'a TimeFunction,
    gamma: &'a TimeFunction,
    mu1: &'a TimeFunction,
) -> impl Fn(f64, &[f64], &mut [f64]) + 'a {
    let m = params.base.m as f64;
    let tau = params.tau;
    let w0 = params.base.w0;
    move |t: f64, y: &[f64], dy: &mut [f64]| {
        let ka = kappa.eval(t);
        let ga = gamma.eval(t);
        let m1 = mu1.eval(t);
        let (b4, sw, b5, b6) = (y[0], y[1], y[2], y[3]);
        let s2 = sw * sw;
        // denominators shared across the linear coefficients
        let d1 = 1.0 + 2.0 * tau * ka - tau * m1 + s2;
        let n1 = 1.0 + 2.0 * tau * ka - 2.0 * tau * m1 + s2;
        let core = 2.0 * ga * ka + b5 * sw;

        dy[0] = (1.0 + s2 + 2.0 * ka * tau - 2.0 * tau * (m1 + 2.0 * m * m * b4 * b4 * tau))
            / (2.0 * m * m * tau * tau);
        dy[1] = (1.0 + s2 + 2.0 * ka * tau - m1 * tau - 2.0 * m * b4 * sw * tau) / (m * tau);
        dy[2] = -2.0 * b4 * b5 + core * n1 / (tau * m * d1);
        dy[3] = -2.0 * b4 * b6 - core * n1 / (tau * m * m * d1);
        dy[4] = (4.0 * tau * b5 * ga * ka * sw * n1
            - tau
                * b5
                * b5
                * ((1.0 + 2.0 * tau * ka - tau * m1).powi(2) + (1.0 + 2.0 * tau * ka) * s2)
            - 2.0 * ga * ga * ka * (2.0 * tau * ka * (1.0 + s2) + (1.0 - tau * m1 + s2).powi(2)))
            / (2.0 * tau * d1 * d1);
        dy[5] = -b5 * b6 - core * core * n1 / (m * d1 * d1);
        dy[6] = -b6 * b6 / 2.0 + core * core * n1 / (2.0 * m * m * d1 * d1);
        dy[7] = 2.0 * w0 * (ga - 1.0) * ga * ka / (tau * m);
        dy[8] = -b4 - w0 * w0 * (ga - 1.0) * (ga - 1.0) * ka / (m * m * tau);
    }
}

fn sweep(
    params: &ExpParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
    mu1: &TimeFunction,
    grid: &Grid,
    threshold: f64,
) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let mut terminal = [0.0; STATE_DIM];
    terminal[1] = params.base.phi1;
    let opts = BackwardOdeOptions {
        singular: kappa.singular_at_one() || mu1.singular_at_one(),
        blowup_threshold: threshold,
        ..Default::default()
    };
    rk4_backward(grid, &terminal, opts, exp_rhs(params, kappa, gamma, mu1))
}

/// Solve the exponential-utility system.
///
/// The second-order condition mu1 < (1 + sigma_w^2)/(2 tau) + kappa depends on
/// the solved sigma_w, so it is validated after the sweep. Explosions are
/// confirmed at 4x resolution before being reported; a confirmed hit carries
/// the first blow-up time.
pub fn solve_exp(
    eparams: &ExpParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
    mu1: &TimeFunction,
) -> Result<RiccatiSolution> {
    let n = kappa.n();
    if gamma.n() != n || mu1.n() != n {
        return Err(Error::GridMismatch { expected: n, got: gamma.n().min(mu1.n()) });
    }
    let grid = Grid::new(n);
    kappa.square_integral_estimate()?;
    mu1.square_integral_estimate()?;

    let threshold = 1e8;
    let states = match sweep(eparams, kappa, gamma, mu1, &grid, threshold) {
        Ok(s) => s,
        Err(_coarse_t) => {
            // confirm at 4x resolution to rule out plain stiffness
            let fine = Grid::new(4 * n);
            let refine = |f: &TimeFunction| {
                match f.tail() {
                    Some(tl) => TimeFunction::sample_singular(&fine, |t| f.eval(t), *tl),
                    None => TimeFunction::sample(&fine, |t| f.eval(t)),
                }
            };
            let (kf, gf, mf) = (refine(kappa), refine(gamma), refine(mu1));
            match sweep(eparams, &kf, &gf, &mf, &fine, threshold) {
                Err(t_fine) => return Err(Error::RiccatiExplosion { t: t_fine }),
                Ok(fine_states) => {
                    // stiffness, not blow-up: keep every 4th node
                    (0..=n).map(|k| fine_states[4 * k].clone()).collect()
                }
            }
        }
    };

    let take = |j: usize| {
        TimeFunction::from_values((0..=n).map(|k| states[k][j]).collect())
    };
    let beta4 = take(0);
    let sigma_w = take(1);

    // solution-dependent second-order condition, checked pointwise
    for k in 0..=n {
        let bound = (1.0 + sigma_w.value(k) * sigma_w.value(k)) / (2.0 * eparams.tau)
            + kappa.value(k);
        if mu1.value(k) >= bound {
            return Err(Error::SecondOrderViolation {
                t: grid.node(k),
                mu1: mu1.value(k),
                kappa: bound,
            });
        }
    }

    let m = eparams.base.m as f64;
    let w0 = eparams.base.w0;
    let (beta5, beta6) = (take(2), take(3));

    // g' = -(2 gamma kappa + (beta5 + M beta6) sigma_w)/M, g(1) = phi0
    let g_vals: Vec<f64> = (0..=n)
        .map(|k| {
            (2.0 * gamma.value(k) * kappa.value(k)
                + (beta5.value(k) + m * beta6.value(k)) * sigma_w.value(k))
                / m
        })
        .collect();
    let g_tail = kappa.tail().map(|t| t.scaled(2.0 * gamma.value(n) / m));
    let g_integrand = match g_tail {
        Some(t) => TimeFunction::with_tail(g_vals, t),
        None => TimeFunction::from_values(g_vals),
    };
    let cum_g = g_integrand.cumulative_integral_to_one();
    let g = TimeFunction::from_values(
        (0..=n).map(|k| eparams.base.phi0 + cum_g[k]).collect(),
    );

    // g0' = 2 w0 (gamma - 1) kappa / M, g0(1) = 0
    let g0_vals: Vec<f64> = (0..=n)
        .map(|k| 2.0 * w0 * (1.0 - gamma.value(k)) * kappa.value(k) / m)
        .collect();
    let g0_tail = kappa.tail().map(|t| t.scaled(2.0 * w0 * (1.0 - gamma.value(n)) / m));
    let g0_integrand = match g0_tail {
        Some(t) => TimeFunction::with_tail(g0_vals, t),
        None => TimeFunction::from_values(g0_vals),
    };
    let g0 = TimeFunction::from_values(g0_integrand.cumulative_integral_to_one());

    Ok(RiccatiSolution {
        params: eparams.clone(),
        kappa: kappa.clone(),
        gamma: gamma.clone(),
        mu1: mu1.clone(),
        beta4,
        sigma_w,
        beta0: take(8),
        beta1: take(4),
        beta2: take(5),
        beta3: take(6),
        beta5,
        beta6,
        beta8: take(7),
        g,
        g0,
    })
}

impl RiccatiSolution {
    pub fn n(&self) -> usize {
        self.sigma_w.n()
    }

    /// Risk-averse holdings coefficient on (a_i - a_Sigma/M).
    pub fn target_loading(&self, t: f64) -> f64 {
        let tau = self.params.tau;
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        let sw = self.sigma_w.eval(t);
        let b5 = self.beta5.eval(t);
        (2.0 * ka * ga + b5 * sw) * tau / ((2.0 * ka - m1) * tau + 1.0 + sw * sw)
    }

    pub fn holdings(&self, i: usize, w_t: f64, t: f64) -> f64 {
        let p = &self.params.base;
        let m = p.m as f64;
        w_t / m + self.target_loading(t) * (p.targets[i] - p.target_sum() / m)
    }

    /// Price S_t = g0 + g a_Sigma + sigma_w w_t + D_t.
    pub fn price(&self, w_t: f64, d_t: f64, t: f64) -> f64 {
        self.g0.eval(t) + self.g.eval(t) * self.params.base.target_sum()
            + self.sigma_w.eval(t) * w_t
            + d_t
    }

    /// Pricing loadings (mu0, mu2, mu3, mu4, mu5); mu5 is identically zero
    /// in the exponential model.
    pub fn pricing_coefficients(&self, t: f64) -> [f64; 5] {
        let tau = self.params.tau;
        let m = self.params.base.m as f64;
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        let sw = self.sigma_w.eval(t);
        let b4 = self.beta4.eval(t);
        let b5 = self.beta5.eval(t);
        let b6 = self.beta6.eval(t);
        let d1 = 1.0 + sw * sw + 2.0 * ka * tau - m1 * tau;
        let mu0 = -(2.0 * ga * ka + sw * b5) * (1.0 + 2.0 * tau * (ka - m1) + sw * sw)
            / (m * d1)
            - sw * b6;
        let mu2 = -m1 * (2.0 * ka * ga + b5 * sw) * tau / d1;
        let mu3 = (1.0 + sw * sw + 2.0 * (ka - m1 - m * b4 * sw) * tau) / (m * tau);
        let mu4 = 2.0 * ka * (ga - 1.0) / m;
        [mu0, mu2, mu3, mu4, 0.0]
    }

    /// Equilibrium drift (public-information form).
    pub fn drift(&self, w_t: f64, t: f64) -> f64 {
        let p = &self.params.base;
        let tau = self.params.tau;
        let m = p.m as f64;
        let ka = self.kappa.eval(t);
        let ga = self.gamma.eval(t);
        let m1 = self.mu1.eval(t);
        let sw = self.sigma_w.eval(t);
        let b4 = self.beta4.eval(t);
        let b5 = self.beta5.eval(t);
        let b6 = self.beta6.eval(t);
        (1.0 + sw * sw + (2.0 * ka - m1) * tau - 2.0 * m * b4 * sw * tau) / (m * tau) * w_t
            + 2.0 * (ga - 1.0) * ka / m * p.w0
            - (2.0 * ga * ka + (b5 + m * b6) * sw) / m * p.target_sum()
    }

    /// Perceived drift of investor i at holdings theta_i (mu5 = 0).
    pub fn perceived_drift(&self, i: usize, theta_i: f64, w_t: f64, t: f64) -> f64 {
        let p = &self.params.base;
        let [mu0, mu2, mu3, mu4, _] = self.pricing_coefficients(t);
        mu0 * p.target_sum()
            + self.mu1.eval(t) * theta_i
            + mu2 * p.targets[i]
            + mu3 * w_t
            + mu4 * p.w0
    }
}
