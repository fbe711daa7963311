//! Exogenous model primitives: market parameters, penalty-severity and
//! target-ratio profiles, and the price-impact selector that pins down one
//! equilibrium out of the continuum.

use crate::calibrate::{self, LambdaCurve};
use crate::error::{Error, Result};
use crate::grid::{Grid, PowerTail, TimeFunction};

/// Second moments of the private terminal targets, used for ex-ante welfare.
/// Targets are mean zero by convention; `individual_sq` is E[a_i^2] (common to
/// all investors) and `aggregate_sq` is E[a_Sigma^2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMoments {
    pub individual_sq: f64,
    pub aggregate_sq: f64,
}

/// All exogenous scalars of the market.
///
/// Sign conventions: `w0` is the share supply the strategic investors must
/// absorb at the open, and a positive supply depresses prices (sigma_w < 0
/// whenever phi1 <= 0), so "illiquidity" means large |sigma_w|.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Number of strategic investors (M >= 1; the demand-curve selector needs M >= 3).
    pub m: usize,
    /// Initial noise-trader supply (shares).
    pub w0: f64,
    /// Supply drift (shares/day).
    pub alpha: f64,
    /// Supply mean-reversion rate (1/day); 0 gives arithmetic Brownian motion.
    pub pi: f64,
    /// Supply volatility (shares/sqrt(day)), nonnegative.
    pub eta: f64,
    /// Terminal price loading on the aggregate target.
    pub phi0: f64,
    /// Terminal price loading on terminal supply.
    pub phi1: f64,
    /// Initial dividend factor ($/share).
    pub d0: f64,
    /// Private terminal targets a_i (shares), one per investor.
    pub targets: Vec<f64>,
    /// Initial stock holdings theta_{i,-}; must sum to w0.
    pub initial_holdings: Vec<f64>,
    /// Target second moments for ex-ante welfare (optional elsewhere).
    pub target_moments: Option<TargetMoments>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidParams { reason: "M must be >= 1".into() });
        }
        if self.targets.len() != self.m || self.initial_holdings.len() != self.m {
            return Err(Error::InvalidParams {
                reason: format!(
                    "targets ({}) and initial_holdings ({}) must both have length M={}",
                    self.targets.len(),
                    self.initial_holdings.len(),
                    self.m
                ),
            });
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidParams { reason: "eta must be nonnegative".into() });
        }
        let sum: f64 = self.initial_holdings.iter().sum();
        let scale = 1.0_f64.max(self.w0.abs());
        if (sum - self.w0).abs() > 1e-9 * scale {
            return Err(Error::InvalidParams {
                reason: format!("initial holdings sum to {sum}, expected w0 = {}", self.w0),
            });
        }
        for v in self
            .targets
            .iter()
            .chain(&self.initial_holdings)
            .chain([&self.w0, &self.alpha, &self.pi, &self.eta, &self.phi0, &self.phi1, &self.d0])
        {
            if !v.is_finite() {
                return Err(Error::InvalidParams { reason: "non-finite parameter".into() });
            }
        }
        Ok(())
    }

    /// Aggregate target imbalance a_Sigma.
    pub fn target_sum(&self) -> f64 {
        self.targets.iter().sum()
    }

    /// E[w_t]: OU mean, with the alpha*t + w0 limit at pi = 0.
    pub fn expected_supply(&self, t: f64) -> f64 {
        if self.pi == 0.0 {
            self.w0 + self.alpha * t
        } else {
            self.w0 * (-self.pi * t).exp() + self.alpha / self.pi * (1.0 - (-self.pi * t).exp())
        }
    }

    /// V[w_t]: eta^2 t for pi = 0, else eta^2 (1 - e^{-2 pi t}) / (2 pi).
    pub fn supply_variance(&self, t: f64) -> f64 {
        if self.pi == 0.0 {
            self.eta * self.eta * t
        } else {
            self.eta * self.eta * (1.0 - (-2.0 * self.pi * t).exp()) / (2.0 * self.pi)
        }
    }

    /// E[w_t^2] = V[w_t] + E[w_t]^2.
    pub fn supply_second_moment(&self, t: f64) -> f64 {
        let m = self.expected_supply(t);
        self.supply_variance(t) + m * m
    }
}

/// The four penalty-severity profiles used throughout the numerical section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinKappa {
    /// kappa(t) = 1
    K1,
    /// kappa(t) = 1 + t
    K2,
    /// kappa(t) = (9/8)(1-t)^{-1/4}, exploding but square integrable
    K3,
    /// negligible before 0.75, linear ramp to the K3 tail from 0.95 on
    K4,
}

impl BuiltinKappa {
    pub const ALL: [BuiltinKappa; 4] =
        [BuiltinKappa::K1, BuiltinKappa::K2, BuiltinKappa::K3, BuiltinKappa::K4];

    pub fn label(&self) -> &'static str {
        match self {
            BuiltinKappa::K1 => "k1",
            BuiltinKappa::K2 => "k2",
            BuiltinKappa::K3 => "k3",
            BuiltinKappa::K4 => "k4",
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BuiltinKappa::K1 => 1.0,
            BuiltinKappa::K2 => 1.0 + t,
            BuiltinKappa::K3 => 1.125 * (1.0 - t).powf(-0.25),
            BuiltinKappa::K4 => {
                if t <= 0.75 {
                    0.0002
                } else if t <= 0.95 {
                    2.3791 + 11.8954 * (t - 0.95)
                } else {
                    1.125 * (1.0 - t).powf(-0.25)
                }
            }
        }
    }
}

impl std::str::FromStr for BuiltinKappa {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k1" => Ok(BuiltinKappa::K1),
            "k2" => Ok(BuiltinKappa::K2),
            "k3" => Ok(BuiltinKappa::K3),
            "k4" => Ok(BuiltinKappa::K4),
            other => Err(Error::InvalidParams { reason: format!("unknown kappa id '{other}'") }),
        }
    }
}

/// Sample a builtin penalty severity on the grid. K3 and K4 carry the exact
/// (9/8)(1-t)^{-1/4} tail descriptor and are flagged singular.
pub fn builtin_kappa(id: BuiltinKappa, grid: &Grid) -> TimeFunction {
    match id {
        BuiltinKappa::K1 | BuiltinKappa::K2 => TimeFunction::sample(grid, |t| id.eval(t)),
        BuiltinKappa::K3 => TimeFunction::sample_singular(
            grid,
            |t| id.eval(t),
            PowerTail::new(1.125, 0.25),
        ),
        BuiltinKappa::K4 => TimeFunction::sample_singular(
            grid,
            |t| id.eval(t),
            PowerTail::new(1.125, 0.25),
        ),
    }
}

/// Builtin cumulative target-ratio profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRatio {
    /// gamma(t) = t: trade a constant amount per unit time.
    Uniform,
    /// gamma(t) = 0.1 + 0.9 t: impatient at the open, uniform after.
    FrontLoaded,
}

impl TargetRatio {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TargetRatio::Uniform => t,
            TargetRatio::FrontLoaded => 0.1 + 0.9 * t,
        }
    }
}

pub fn builtin_gamma(id: TargetRatio, grid: &Grid) -> TimeFunction {
    TimeFunction::sample(grid, |t| id.eval(t))
}

/// Choice of price-impact function mu1, pinning down one equilibrium.
#[derive(Debug, Clone)]
pub enum EquilibriumSelector {
    /// Fully competitive price-taking: mu1 = 0.
    Radner,
    /// Demand-curve founded: mu1 = 2 kappa / (2 - M), requires M >= 3.
    Vayanos,
    /// Maximizer of the aggregate expected certainty equivalent.
    WelfareMax,
    /// User-supplied price-impact function.
    Custom(TimeFunction),
    /// Implied by an empirically estimated price-impact curve lambda(t).
    Calibrated(LambdaCurve),
}

/// Pointwise first-order condition for the welfare maximizer, in the
/// holdings-ratio variable y = 2 kappa gamma / (2 kappa - mu1):
/// c1 y^3 - gamma (c1 y^2 + c2) = 0 with a unique root in (gamma, 2 gamma).
/// kappa does not appear, which is what makes mu1*/kappa scale free.
fn welfare_cubic(y: f64, gamma: f64, c1: f64, c2: f64) -> f64 {
    c1 * y * y * y - gamma * (c1 * y * y + c2)
}

/// Solve the first-order cubic for y by bisection on [gamma, 2 gamma] to
/// absolute tolerance 1e-12. `c2 = t (eta^2 + alpha^2 t + alpha w0)`.
pub fn welfare_ratio_root(gamma: f64, c1: f64, c2: f64) -> f64 {
    if gamma == 0.0 || c2 == 0.0 {
        // bracket collapses (t = 0) or no penalty trade-off: competitive point
        return gamma;
    }
    let mut lo = gamma;
    let mut hi = 2.0 * gamma;
    // phi(lo) = -gamma c2 > 0, phi(hi) = gamma (4 c1 gamma^2 - c2) < 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if welfare_cubic(mid, gamma, c1, c2) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Resolve the selector into a concrete mu1 grid and enforce the second-order
/// condition mu1(t) < kappa(t) at every node.
pub fn resolve_mu1(
    selector: &EquilibriumSelector,
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
) -> Result<TimeFunction> {
    params.validate()?;
    let n = kappa.n();
    let grid = Grid::new(n);
    let mu1 = match selector {
        EquilibriumSelector::Radner => TimeFunction::zeros(&grid),
        EquilibriumSelector::Vayanos => {
            if params.m < 3 {
                return Err(Error::VayanosTooFewInvestors { m: params.m });
            }
            kappa.scaled(2.0 / (2.0 - params.m as f64))
        }
        EquilibriumSelector::WelfareMax => welfare_max_mu1(params, kappa, gamma)?,
        EquilibriumSelector::Custom(f) => {
            if f.n() != n {
                return Err(Error::GridMismatch { expected: n, got: f.n() });
            }
            f.clone()
        }
        EquilibriumSelector::Calibrated(curve) => {
            calibrate::implied_mu1(curve, params, kappa)?.0
        }
    };
    check_second_order(&mu1, kappa, &grid)?;
    // square integrability of kappa^2 + mu1^2 (Hoelder tails included)
    kappa.square_integral_estimate()?;
    mu1.square_integral_estimate()?;
    Ok(mu1)
}

pub(crate) fn check_second_order(
    mu1: &TimeFunction,
    kappa: &TimeFunction,
    grid: &Grid,
) -> Result<()> {
    for k in 0..=grid.n() {
        if mu1.value(k) >= kappa.value(k) {
            return Err(Error::SecondOrderViolation {
                t: grid.node(k),
                mu1: mu1.value(k),
                kappa: kappa.value(k),
            });
        }
    }
    Ok(())
}

/// The welfare-maximizing price impact: mu1*(t) = 2 (y - gamma) kappa / y
/// with y the root of the pointwise cubic. Exists only when alpha*w0 < 0 and
/// the coercivity/second-order bounds 4 gamma^2 c1 < c2 < 0 hold on (0, 1].
fn welfare_max_mu1(
    params: &ModelParams,
    kappa: &TimeFunction,
    gamma: &TimeFunction,
) -> Result<TimeFunction> {
    let moments = params.target_moments.ok_or_else(|| Error::InvalidParams {
        reason: "WelfareMax selector needs target_moments".into(),
    })?;
    if params.alpha * params.w0 >= 0.0 {
        return Err(Error::WelfareNonexistence {
            reason: format!(
                "alpha*w0 = {} >= 0: the welfare objective has no maximizer",
                params.alpha * params.w0
            ),
        });
    }
    let m = params.m as f64;
    // c1 = E[a_Sigma^2] - M * sum_i E[a_i^2]
    let c1 = moments.aggregate_sq - m * m * moments.individual_sq;
    let n = kappa.n();
    let grid = Grid::new(n);
    let c2_at = |t: f64| {
        t * (params.eta * params.eta + params.alpha * params.alpha * t + params.alpha * params.w0)
    };
    let mut ratio = vec![0.0; n + 1]; // mu1*/kappa
    for k in 0..=n {
        let t = grid.node(k);
        let g = gamma.value(k);
        let c2 = c2_at(t);
        if t > 0.0 {
            if c2 >= 0.0 {
                return Err(Error::WelfareNonexistence {
                    reason: format!("existence condition c2(t) < 0 fails at t={t} (c2={c2})"),
                });
            }
            if g > 0.0 && 4.0 * g * g * c1 >= c2 {
                return Err(Error::WelfareNonexistence {
                    reason: format!(
                        "existence condition 4 gamma^2 c1 < c2 fails at t={t}"
                    ),
                });
            }
        }
        if g == 0.0 {
            ratio[k] = 0.0; // penalty term vanishes; competitive by continuity
            continue;
        }
        let y = welfare_ratio_root(g, c1, c2);
        ratio[k] = 2.0 * (y - g) / y;
    }
    let values: Vec<f64> = (0..=n).map(|k| ratio[k] * kappa.value(k)).collect();
    let tail = kappa.tail().map(|t| t.scaled(ratio[n]));
    Ok(match tail {
        Some(t) => TimeFunction::with_tail(values, t),
        None => TimeFunction::from_values(values),
    })
}
