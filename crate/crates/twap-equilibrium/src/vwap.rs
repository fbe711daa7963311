//! Stochastic-target extension: the benchmark ratio is a gamma bridge rather
//! than a deterministic schedule, covering volume-indexed (VWAP-style)
//! benchmarking. Solves the sigma_w / sigma_gamma / g0 system, evaluates the
//! predictable holdings rule, and samples gamma-bridge paths by exact beta
//! increments.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use crate::equilibrium::solve_sigma_w;
use crate::error::{Error, Result};
use crate::grid::{Grid, TimeFunction};
use crate::model::{self, ModelParams};

/// psi0(t) = 1/(1-t) and psi1(t) = 1/((1-t)(2-t)): the jump-intensity
/// weights of the unit gamma bridge. Undefined at t = 1.
pub fn psi(t: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::DomainError {
            reason: format!("psi is defined on [0,1) only, got t={t}"),
        });
    }
    Ok((1.0 / (1.0 - t), 1.0 / ((1.0 - t) * (2.0 - t))))
}

/// Parameters of the stochastic-target model: zero initial holdings and
/// supply, plus the coupling `rho` between supply and the target ratio.
#[derive(Debug, Clone)]
pub struct VwapParams {
    pub base: ModelParams,
    /// Loading of the extra supply component rho * a_Sigma * gamma_{t-}.
    pub rho: f64,
}

impl VwapParams {
    pub fn new(base: ModelParams, rho: f64) -> Result<Self> {
        base.validate()?;
        if base.w0 != 0.0 || base.initial_holdings.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParams {
                reason: "the stochastic-target model sets theta_{i,-} = w0 = 0".into(),
            });
        }
        Ok(VwapParams { base, rho })
    }
}

/// Solved coefficients of the stochastic-target equilibrium.
#[derive(Debug, Clone)]
pub struct VwapEquilibriumSolution {
    pub params: VwapParams,
    pub kappa: TimeFunction,
    pub mu1: TimeFunction,
    pub sigma_w: TimeFunction,
    /// Price loading on a_Sigma * gamma_t; vanishes as t -> 1.
    pub sigma_gamma: TimeFunction,
    pub g0: TimeFunction,
    pub mu2: TimeFunction,
    pub mu3: TimeFunction,
    pub mu4: TimeFunction,
}

/// Solve the stochastic-target equilibrium for a resolved mu1.
pub fn solve_vwap(
    vparams: &VwapParams,
    kappa: &TimeFunction,
    mu1: &TimeFunction,
) -> Result<VwapEquilibriumSolution> {
    let n = kappa.n();
    if mu1.n() != n {
        return Err(Error::GridMismatch { expected: n, got: mu1.n() });
    }
    let grid = Grid::new(n);
    model::check_second_order(mu1, kappa, &grid)?;
    kappa.square_integral_estimate()?;
    mu1.square_integral_estimate()?;

    let p = &vparams.base;
    let m = p.m as f64;
    let rho = vparams.rho;
    let a_sum = p.target_sum();

    // identical ODE to the deterministic-target model
    let sigma_w = solve_sigma_w(p, kappa, mu1, &grid);

    // q(u) = (2 kappa (1-rho) + mu1 rho)/M;
    // sigma_gamma(t) = psi0(t) * int_t^1 (1-u) q(u) du, with limit 0 at t = 1
    let q = kappa.linear_combination(2.0 * (1.0 - rho) / m, mu1, rho / m);
    let weighted: Vec<f64> = (0..=n)
        .map(|k| {
            let f = 1.0 - grid.node(k);
            f * q.value(k)
        })
        .collect();
    let cum_weighted = TimeFunction::from_values(weighted).cumulative_integral_to_one();
    let mut sg = vec![0.0; n + 1];
    for k in 0..n {
        sg[k] = cum_weighted[k] / (1.0 - grid.node(k));
    }
    sg[n] = 0.0;
    let sigma_gamma = TimeFunction::from_values(sg);

    // g0(t) = phi0 a_Sigma + a_Sigma int_t^1 sigma_gamma psi0 + alpha int_t^1 sigma_w.
    // The first integral reduces exactly: int_t^1 sigma_gamma psi0 du
    // = int_t^1 q du - sigma_gamma(t), since (sigma_gamma)' = sigma_gamma psi0 - q.
    let cum_q = q.cumulative_integral_to_one();
    let cum_sw = sigma_w.cumulative_integral_to_one();
    let g0 = TimeFunction::from_values(
        (0..=n)
            .map(|k| {
                p.phi0 * a_sum + a_sum * (cum_q[k] - sigma_gamma.value(k))
                    + p.alpha * cum_sw[k]
            })
            .collect(),
    );

    let mut mu2 = vec![0.0; n + 1];
    let mut mu3 = vec![0.0; n + 1];
    let mut mu4 = vec![0.0; n + 1];
    for k in 0..=n {
        let ka = kappa.value(k);
        let m1 = mu1.value(k);
        mu2[k] = 2.0 * (ka - m1) * (2.0 * ka * (rho - 1.0) - m1 * rho) / (m * (2.0 * ka - m1));
        mu3[k] = 2.0 * (ka - m1) / m;
        mu4[k] = -2.0 * ka * m1 / (2.0 * ka - m1);
    }

    Ok(VwapEquilibriumSolution {
        params: vparams.clone(),
        kappa: kappa.clone(),
        mu1: mu1.clone(),
        sigma_w,
        sigma_gamma,
        g0,
        mu2: TimeFunction::from_values(mu2),
        mu3: TimeFunction::from_values(mu3),
        mu4: TimeFunction::from_values(mu4),
    })
}

impl VwapEquilibriumSolution {
    pub fn n(&self) -> usize {
        self.sigma_w.n()
    }

    /// Predictable optimal holdings: the target leg scales with the realized
    /// bridge value gamma_{t-}.
    pub fn holdings(&self, i: usize, w_t: f64, gamma_tminus: f64, t: f64) -> f64 {
        let p = &self.params.base;
        let m = p.m as f64;
        let ka = self.kappa.eval(t);
        let m1 = self.mu1.eval(t);
        let a_sum = p.target_sum();
        w_t / m
            + gamma_tminus
                * (2.0 * ka / (2.0 * ka - m1) * (p.targets[i] - a_sum / m)
                    + self.params.rho * a_sum / m)
    }

    /// Equilibrium price S_t = g0 + sigma_w w_t + D_t + sigma_gamma a_Sigma gamma_t.
    pub fn price(&self, w_t: f64, d_t: f64, gamma_t: f64, t: f64) -> f64 {
        self.g0.eval(t) + self.sigma_w.eval(t) * w_t + d_t
            + self.sigma_gamma.eval(t) * self.params.base.target_sum() * gamma_t
    }

    /// Equilibrium drift: (2k - mu1)/M w_t + (2k(rho-1) - mu1 rho)/M gamma_{t-} a_Sigma.
    pub fn drift(&self, w_t: f64, gamma_tminus: f64, t: f64) -> f64 {
        let p = &self.params.base;
        let m = p.m as f64;
        let ka = self.kappa.eval(t);
        let m1 = self.mu1.eval(t);
        (2.0 * ka - m1) / m * w_t
            + (2.0 * ka * (self.params.rho - 1.0) - m1 * self.params.rho) / m
                * gamma_tminus
                * p.target_sum()
    }

    /// Predictable quadratic-variation rate of the liquidity premium:
    /// sigma_w^2 eta^2 + sigma_gamma^2 a_Sigma^2 (1-gamma_{t-})^2 psi1(t).
    pub fn premium_qv_rate(&self, gamma_tminus: f64, t: f64) -> Result<f64> {
        let (_, psi1) = psi(t)?;
        let p = &self.params.base;
        let sw = self.sigma_w.eval(t);
        let sg = self.sigma_gamma.eval(t);
        let a = p.target_sum();
        let g1 = 1.0 - gamma_tminus;
        Ok(sw * sw * p.eta * p.eta + sg * sg * a * a * g1 * g1 * psi1)
    }
}

/// ln of a Gamma(shape, 1) draw, stable for arbitrarily small shapes via the
/// boosting identity G(a) = G(a+1) U^{1/a}.
fn log_gamma_sample<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boosted = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng);
        let u: f64 = Open01.sample(rng);
        boosted.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).unwrap().sample(rng).ln()
    }
}

/// Fill `out` (length N+1) with one gamma-bridge path on the uniform grid:
/// increments are (1 - gamma) Beta(h, 1 - t - h), the exact conditional law of
/// the unit-shape bridge, so the final node lands on 1 exactly.
pub fn sample_gamma_bridge_path<R: Rng + ?Sized>(rng: &mut R, grid: &Grid, out: &mut [f64]) {
    let n = grid.n();
    assert_eq!(out.len(), n + 1);
    let h = grid.h();
    out[0] = 0.0;
    for k in 0..n {
        let b_shape = 1.0 - grid.node(k + 1);
        let frac = if b_shape <= 0.0 {
            1.0
        } else {
            // Beta(h, b_shape) in log space: 1/(1 + exp(lg_b - lg_a))
            let lg_a = log_gamma_sample(rng, h);
            let lg_b = log_gamma_sample(rng, b_shape);
            1.0 / (1.0 + (lg_b - lg_a).exp())
        };
        out[k + 1] = out[k] + (1.0 - out[k]) * frac;
    }
}

/// Sample `n_paths` bridge paths with independent per-path counter streams.
pub fn simulate_gamma_bridge(grid: &Grid, n_paths: usize, seed: u64) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = crate::montecarlo::path_rng(seed, p as u64);
            let mut out = vec![0.0; grid.n() + 1];
            sample_gamma_bridge_path(&mut rng, grid, &mut out);
            out
        })
        .collect()
}
