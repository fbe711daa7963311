//! Path simulation of the solved equilibria (exact OU supply transitions,
//! Brownian dividends, gamma-bridge targets) and the statistics used to check
//! the model's moment predictions.
//!
//! Reproducibility: every path owns a counter-derived RNG stream
//! (seed, path index), and cross-path statistics are reduced over fixed-size
//! blocks combined in a pairwise tree, so results are bit-identical for a
//! given seed regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::vwap::{sample_gamma_bridge_path, VwapEquilibriumSolution};
use crate::welfare::WelfareReport;

/// Simulation request: grid must match the solution's grid.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

/// Per-path RNG stream for (seed, path-index).
pub(crate) fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_add(1));
    rng
}

/// Which solved model drives the simulation.
#[derive(Clone, Copy)]
pub enum SimTarget<'a> {
    Twap(&'a EquilibriumSolution),
    Vwap(&'a VwapEquilibriumSolution),
}

impl<'a> SimTarget<'a> {
    fn n(&self) -> usize {
        match self {
            SimTarget::Twap(s) => s.n(),
            SimTarget::Vwap(s) => s.n(),
        }
    }

    fn params(&self) -> &ModelParams {
        match self {
            SimTarget::Twap(s) => &s.params,
            SimTarget::Vwap(s) => &s.params.base,
        }
    }
}

/// Exact one-step OU transition for the supply process.
struct SupplyStep {
    decay: f64,
    drift: f64,
    vol: f64,
}

impl SupplyStep {
    fn new(p: &ModelParams, h: f64) -> Self {
        if p.pi == 0.0 {
            SupplyStep { decay: 1.0, drift: p.alpha * h, vol: p.eta * h.sqrt() }
        } else {
            let decay = (-p.pi * h).exp();
            SupplyStep {
                decay,
                drift: p.alpha / p.pi * (1.0 - decay),
                vol: p.eta * ((1.0 - decay * decay) / (2.0 * p.pi)).sqrt(),
            }
        }
    }

    fn advance<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        w * self.decay + self.drift + self.vol * z
    }
}

/// One simulated path of the market state (supply, dividend factor, bridge).
struct PathState {
    w: Vec<f64>,
    d: Vec<f64>,
    /// gamma-bridge path for the stochastic-target model
    gamma: Option<Vec<f64>>,
}

fn gen_path(target: &SimTarget, rng: &mut ChaCha8Rng, grid: &Grid) -> PathState {
    let p = target.params();
    let n = grid.n();
    let h = grid.h();
    let step = SupplyStep::new(p, h);
    let sqh = h.sqrt();
    let mut w = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    w[0] = p.w0;
    d[0] = p.d0;
    for k in 0..n {
        w[k + 1] = step.advance(w[k], rng);
        let z: f64 = rng.sample(StandardNormal);
        d[k + 1] = d[k] + sqh * z;
    }
    let gamma = match target {
        SimTarget::Twap(_) => None,
        SimTarget::Vwap(_) => {
            let mut g = vec![0.0; n + 1];
            sample_gamma_bridge_path(rng, grid, &mut g);
            Some(g)
        }
    };
    PathState { w, d, gamma }
}

fn price_at(target: &SimTarget, st: &PathState, k: usize) -> f64 {
    match target {
        SimTarget::Twap(sol) => {
            sol.g0.value(k) + sol.g.value(k) * sol.params.target_sum()
                + sol.sigma_w.value(k) * st.w[k]
                + st.d[k]
        }
        SimTarget::Vwap(sol) => {
            let g = st.gamma.as_ref().unwrap();
            sol.g0.value(k) + sol.sigma_w.value(k) * st.w[k] + st.d[k]
                + sol.sigma_gamma.value(k) * sol.params.base.target_sum() * g[k]
        }
    }
}

fn holdings_at(target: &SimTarget, st: &PathState, i: usize, k: usize, grid: &Grid) -> f64 {
    let t = grid.node(k);
    match target {
        SimTarget::Twap(sol) => sol.holdings(i, st.w[k], t),
        SimTarget::Vwap(sol) => {
            let g = st.gamma.as_ref().unwrap();
            sol.holdings(i, st.w[k], g[k], t)
        }
    }
}

/// Simulated sample paths with per-investor holdings, wealth, and penalties.
/// Wealth is self-financing by construction (left-point holdings against
/// price increments); penalties accumulate left-point deviation flows.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    /// [path][investor][time]
    pub theta: Vec<Vec<Vec<f64>>>,
    pub wealth: Vec<Vec<Vec<f64>>>,
    pub penalty: Vec<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<Vec<f64>>>,
}

fn check_grid(target: &SimTarget, config: &SimConfig) -> Result<Grid> {
    if target.n() != config.n_steps {
        return Err(Error::GridMismatch { expected: target.n(), got: config.n_steps });
    }
    Ok(Grid::new(config.n_steps))
}

/// Materialize full paths. Memory grows as paths * investors * steps; use the
/// streaming statistics below for large ensembles.
pub fn simulate(target: &SimTarget, config: &SimConfig) -> Result<PathBundle> {
    let grid = check_grid(target, config)?;
    let n = grid.n();
    let h = grid.h();
    let p = target.params();
    let m = p.m;

    let per_path: Vec<_> = (0..config.n_paths)
        .into_par_iter()
        .map(|pi| {
            let mut rng = path_rng(config.seed, pi as u64);
            let st = gen_path(target, &mut rng, &grid);
            let s: Vec<f64> = (0..=n).map(|k| price_at(target, &st, k)).collect();
            let mut theta = vec![vec![0.0; n + 1]; m];
            let mut wealth = vec![vec![0.0; n + 1]; m];
            let mut penalty = vec![vec![0.0; n + 1]; m];
            for i in 0..m {
                for k in 0..=n {
                    theta[i][k] = holdings_at(target, &st, i, k, &grid);
                }
                wealth[i][0] = p.initial_holdings[i] * s[0];
                penalty[i][0] = 0.0;
                for k in 0..n {
                    wealth[i][k + 1] = wealth[i][k] + theta[i][k] * (s[k + 1] - s[k]);
                    let dev = match target {
                        SimTarget::Twap(sol) => {
                            let ga = sol.gamma.value(k);
                            ga * (p.targets[i] - p.initial_holdings[i])
                                - (theta[i][k] - p.initial_holdings[i])
                        }
                        SimTarget::Vwap(sol) => {
                            let gb = st.gamma.as_ref().unwrap();
                            let _ = sol;
                            p.targets[i] * gb[k] - theta[i][k]
                        }
                    };
                    let kap = match target {
                        SimTarget::Twap(sol) => sol.kappa.value(k),
                        SimTarget::Vwap(sol) => sol.kappa.value(k),
                    };
                    penalty[i][k + 1] = penalty[i][k] + kap * dev * dev * h;
                }
            }
            (st, s, theta, wealth, penalty)
        })
        .collect();

    let mut bundle = PathBundle {
        times: (0..=n).map(|k| grid.node(k)).collect(),
        w: Vec::with_capacity(config.n_paths),
        d: Vec::with_capacity(config.n_paths),
        s: Vec::with_capacity(config.n_paths),
        theta: Vec::with_capacity(config.n_paths),
        wealth: Vec::with_capacity(config.n_paths),
        penalty: Vec::with_capacity(config.n_paths),
        gamma: matches!(target, SimTarget::Vwap(_)).then(Vec::new),
    };
    for (st, s, theta, wealth, penalty) in per_path {
        bundle.w.push(st.w);
        bundle.d.push(st.d);
        bundle.s.push(s);
        bundle.theta.push(theta);
        bundle.wealth.push(wealth);
        bundle.penalty.push(penalty);
        if let Some(g) = st.gamma {
            bundle.gamma.as_mut().unwrap().push(g);
        }
    }
    Ok(bundle)
}

/// Fixed-block parallel map with a deterministic pairwise-tree combine.
fn block_reduce<T, MAP, COMB>(n_paths: usize, map_block: MAP, combine: COMB) -> T
where
    T: Send,
    MAP: Fn(std::ops::Range<usize>) -> T + Sync,
    COMB: Fn(T, T) -> T,
{
    const BLOCK: usize = 1024;
    let n_blocks = n_paths.div_ceil(BLOCK);
    let mut parts: Vec<T> = (0..n_blocks)
        .into_par_iter()
        .map(|b| map_block(b * BLOCK..((b + 1) * BLOCK).min(n_paths)))
        .collect();
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.into_iter().next().expect("at least one block")
}

/// Empirical vs analytic holdings moments at selected times.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub t: f64,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub se_mean: f64,
    /// Standard error of the sample variance (Gaussian-based).
    pub se_var: f64,
    pub analytic_mean: f64,
    pub analytic_var: f64,
}

/// Streaming holdings moments for one investor at the requested times
/// (closest grid nodes). Holdings are affine in the supply state, so the
/// statistics need only the supply path.
pub fn holdings_moments(
    sol: &EquilibriumSolution,
    config: &SimConfig,
    investor: usize,
    times: &[f64],
) -> Result<Vec<MomentCheck>> {
    let target = SimTarget::Twap(sol);
    let grid = check_grid(&target, config)?;
    let nodes: Vec<usize> =
        times.iter().map(|t| (t * grid.n() as f64).round() as usize).collect();
    let max_node = *nodes.iter().max().unwrap_or(&0);
    let p = &sol.params;

    type Acc = Vec<(f64, f64)>; // (sum, sum of squares) per requested node
    let (sums, n_done) = block_reduce(
        config.n_paths,
        |range| {
            let mut acc: Acc = vec![(0.0, 0.0); nodes.len()];
            let step = SupplyStep::new(p, grid.h());
            for path in range.clone() {
                let mut rng = path_rng(config.seed, path as u64);
                let mut w = p.w0;
                let mut next = 0usize;
                // draws must mirror gen_path's order (supply, dividend)
                for k in 0..=max_node {
                    while next < nodes.len() && nodes[next] == k {
                        let th = sol.holdings(investor, w, grid.node(k));
                        acc[next].0 += th;
                        acc[next].1 += th * th;
                        next += 1;
                    }
                    if k < max_node {
                        w = step.advance(w, &mut rng);
                        let _skip: f64 = rng.sample(StandardNormal);
                    }
                }
            }
            (acc, range.len())
        },
        |(mut a, na), (b, nb)| {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
            }
            (a, na + nb)
        },
    );
    let n = n_done as f64;
    Ok(nodes
        .iter()
        .zip(sums)
        .map(|(&k, (s, ss))| {
            let t = grid.node(k);
            let mean = s / n;
            let var = (ss - n * mean * mean) / (n - 1.0);
            MomentCheck {
                t,
                sample_mean: mean,
                sample_var: var,
                se_mean: (var / n).sqrt(),
                se_var: var * (2.0 / (n - 1.0)).sqrt(),
                analytic_mean: sol.expected_holdings(investor, t),
                analytic_var: sol.holdings_variance(t),
            }
        })
        .collect())
}

/// Realized quadratic variation of the price versus its model value.
#[derive(Debug, Clone, Copy)]
pub struct QvCheck {
    pub sample_mean: f64,
    pub se_mean: f64,
    /// Exact expectation of the discrete estimator (includes the O(h)
    /// drift-squared contribution of the round increments).
    pub analytic_discrete: f64,
    /// Continuum limit int_0^1 (sigma_w^2 eta^2 + 1) dt.
    pub analytic_continuum: f64,
}

/// Mean realized quadratic variation sum (Delta S)^2 across paths.
pub fn realized_qv(sol: &EquilibriumSolution, config: &SimConfig) -> Result<QvCheck> {
    let target = SimTarget::Twap(sol);
    let grid = check_grid(&target, config)?;
    let n = grid.n();
    let h = grid.h();
    let p = &sol.params;

    let (sum, sumsq, n_done) = block_reduce(
        config.n_paths,
        |range| {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for path in range.clone() {
                let mut rng = path_rng(config.seed, path as u64);
                let st = gen_path(&target, &mut rng, &grid);
                let mut qv = 0.0;
                let mut prev = price_at(&target, &st, 0);
                for k in 1..=n {
                    let cur = price_at(&target, &st, k);
                    qv += (cur - prev) * (cur - prev);
                    prev = cur;
                }
                s1 += qv;
                s2 += qv * qv;
            }
            (s1, s2, range.len())
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    let np = n_done as f64;
    let mean = sum / np;
    let var = (sumsq - np * mean * mean) / (np - 1.0);

    // E[(Delta S)^2] per round: variance sigma_{k+1}^2 eta_h^2 + h plus the
    // squared predictable part a_k w_k + b_k with exact supply moments.
    let step = SupplyStep::new(p, h);
    let a_sum = p.target_sum();
    let mut analytic = 0.0;
    for k in 0..n {
        let t = grid.node(k);
        let sw1 = sol.sigma_w.value(k + 1);
        let a_k = sw1 * step.decay - sol.sigma_w.value(k);
        let b_k = sw1 * step.drift
            + (sol.g0.value(k + 1) - sol.g0.value(k))
            + (sol.g.value(k + 1) - sol.g.value(k)) * a_sum;
        let ew = p.expected_supply(t);
        let ew2 = p.supply_second_moment(t);
        analytic += sw1 * sw1 * step.vol * step.vol + h
            + a_k * a_k * ew2
            + 2.0 * a_k * b_k * ew
            + b_k * b_k;
    }
    let continuum =
        crate::grid::TimeFunction::sample(&grid, |t| sol.price_qv_rate(t)).integral();
    Ok(QvCheck {
        sample_mean: mean,
        se_mean: (var / np).sqrt(),
        analytic_discrete: analytic,
        analytic_continuum: continuum,
    })
}

/// Per-time empirical mean/SD of a path statistic with analytic overlays.
#[derive(Debug, Clone)]
pub struct CurveStats {
    pub times: Vec<f64>,
    pub emp_mean: Vec<f64>,
    pub emp_sd: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub analytic_mean: Vec<f64>,
    pub analytic_sd: Vec<f64>,
}

/// Liquidity-premium (S_t - D_t) statistics across paths, with the analytic
/// curves g0 + g a_Sigma + sigma_w E[w_t] and |sigma_w| SD[w_t] (plus the
/// bridge term in the stochastic-target model).
pub fn liquidity_premium_stats(target: &SimTarget, config: &SimConfig) -> Result<CurveStats> {
    let grid = check_grid(target, config)?;
    let n = grid.n();
    let p = target.params();

    let (sum, sumsq, n_done) = block_reduce(
        config.n_paths,
        |range| {
            let mut s1 = vec![0.0; n + 1];
            let mut s2 = vec![0.0; n + 1];
            for path in range.clone() {
                let mut rng = path_rng(config.seed, path as u64);
                let st = gen_path(target, &mut rng, &grid);
                for k in 0..=n {
                    let prem = price_at(target, &st, k) - st.d[k];
                    s1[k] += prem;
                    s2[k] += prem * prem;
                }
            }
            (s1, s2, range.len())
        },
        |(mut a1, mut a2, na), (b1, b2, nb)| {
            for k in 0..a1.len() {
                a1[k] += b1[k];
                a2[k] += b2[k];
            }
            (a1, a2, na + nb)
        },
    );
    let np = n_done as f64;
    let mut out = CurveStats {
        times: (0..=n).map(|k| grid.node(k)).collect(),
        emp_mean: Vec::with_capacity(n + 1),
        emp_sd: Vec::with_capacity(n + 1),
        se_mean: Vec::with_capacity(n + 1),
        analytic_mean: Vec::with_capacity(n + 1),
        analytic_sd: Vec::with_capacity(n + 1),
    };
    for k in 0..=n {
        let mean = sum[k] / np;
        let var = ((sumsq[k] - np * mean * mean) / (np - 1.0)).max(0.0);
        out.emp_mean.push(mean);
        out.emp_sd.push(var.sqrt());
        out.se_mean.push((var / np).sqrt());
        let t = grid.node(k);
        let (am, av) = match target {
            SimTarget::Twap(sol) => {
                let am = sol.g0.value(k) + sol.g.value(k) * p.target_sum()
                    + sol.sigma_w.value(k) * p.expected_supply(t);
                let sv = sol.sigma_w.value(k);
                (am, sv * sv * p.supply_variance(t))
            }
            SimTarget::Vwap(sol) => {
                let a = p.target_sum();
                let am = sol.g0.value(k) + sol.sigma_w.value(k) * p.expected_supply(t)
                    + sol.sigma_gamma.value(k) * a * t;
                let sw = sol.sigma_w.value(k);
                let sg = sol.sigma_gamma.value(k);
                // Var[gamma_t] = t(1-t)/2 for the unit-shape bridge
                (am, sw * sw * p.supply_variance(t) + sg * sg * a * a * t * (1.0 - t) / 2.0)
            }
        };
        out.analytic_mean.push(am);
        out.analytic_sd.push(av.sqrt());
    }
    Ok(out)
}

/// Benchmark-deviation statistics for one investor: empirical mean deviation
/// from the target trajectory per time, with the analytic expected-deviation
/// curve.
pub fn twap_deviation_stats(
    sol: &EquilibriumSolution,
    config: &SimConfig,
    investor: usize,
) -> Result<CurveStats> {
    let target = SimTarget::Twap(sol);
    let grid = check_grid(&target, config)?;
    let n = grid.n();
    let p = &sol.params;

    let (sum, sumsq, n_done) = block_reduce(
        config.n_paths,
        |range| {
            let mut s1 = vec![0.0; n + 1];
            let mut s2 = vec![0.0; n + 1];
            let step = SupplyStep::new(p, grid.h());
            for path in range.clone() {
                let mut rng = path_rng(config.seed, path as u64);
                let mut w = p.w0;
                for k in 0..=n {
                    let dev = sol.twap_deviation(investor, w, grid.node(k));
                    s1[k] += dev;
                    s2[k] += dev * dev;
                    if k < n {
                        w = step.advance(w, &mut rng);
                        let _skip: f64 = rng.sample(StandardNormal);
                    }
                }
            }
            (s1, s2, range.len())
        },
        |(mut a1, mut a2, na), (b1, b2, nb)| {
            for k in 0..a1.len() {
                a1[k] += b1[k];
                a2[k] += b2[k];
            }
            (a1, a2, na + nb)
        },
    );
    let np = n_done as f64;
    let mut out = CurveStats {
        times: (0..=n).map(|k| grid.node(k)).collect(),
        emp_mean: Vec::with_capacity(n + 1),
        emp_sd: Vec::with_capacity(n + 1),
        se_mean: Vec::with_capacity(n + 1),
        analytic_mean: Vec::with_capacity(n + 1),
        analytic_sd: Vec::with_capacity(n + 1),
    };
    for k in 0..=n {
        let mean = sum[k] / np;
        let var = ((sumsq[k] - np * mean * mean) / (np - 1.0)).max(0.0);
        let t = grid.node(k);
        out.emp_mean.push(mean);
        out.emp_sd.push(var.sqrt());
        out.se_mean.push((var / np).sqrt());
        out.analytic_mean.push(sol.twap_deviation(investor, p.expected_supply(t), t));
        out.analytic_sd.push(sol.holdings_variance(t).sqrt());
    }
    Ok(out)
}

/// Monte Carlo welfare decomposition for parameter regimes outside the
/// analytic shortcut: estimates S0 w0, the aggregate trading profit and the
/// aggregate penalties from simulated paths.
pub fn mc_welfare(sol: &EquilibriumSolution, config: &SimConfig) -> Result<WelfareReport> {
    let target = SimTarget::Twap(sol);
    let grid = check_grid(&target, config)?;
    let n = grid.n();
    let h = grid.h();
    let p = &sol.params;
    let m = p.m;

    let (profit_sum, pen_sum, n_done) = block_reduce(
        config.n_paths,
        |range| {
            let mut profit = 0.0;
            let mut pen = 0.0;
            for path in range.clone() {
                let mut rng = path_rng(config.seed, path as u64);
                let st = gen_path(&target, &mut rng, &grid);
                let mut prev = price_at(&target, &st, 0);
                for k in 0..n {
                    let cur = price_at(&target, &st, k + 1);
                    profit += st.w[k] * (cur - prev);
                    let t = grid.node(k);
                    let ga = sol.gamma.value(k);
                    for i in 0..m {
                        let dev = ga * (p.targets[i] - p.initial_holdings[i])
                            - (sol.holdings(i, st.w[k], t) - p.initial_holdings[i]);
                        pen += sol.kappa.value(k) * dev * dev * h;
                    }
                    prev = cur;
                }
            }
            (profit, pen, range.len())
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    let np = n_done as f64;
    let initial_wealth = sol.price(p.w0, p.d0, 0.0) * p.w0;
    let trading_profit = profit_sum / np;
    let penalty = pen_sum / np;
    Ok(WelfareReport {
        total: initial_wealth + trading_profit - penalty,
        initial_wealth,
        trading_profit,
        penalty,
    })
}
