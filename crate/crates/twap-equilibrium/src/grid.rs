//! Uniform time grid on [0, 1], grid-sampled deterministic functions, and the
//! quadrature/ODE machinery shared by all solvers.
//!
//! Functions with an integrable power singularity at t = 1 (exploding penalty
//! severities) carry a [`PowerTail`] descriptor. Integrals split such a
//! function into the exact closed-form tail plus a smooth residual handled by
//! the composite trapezoid rule, so quadrature stays accurate up to the
//! endpoint. The stored node value at t = 1 follows the convention
//! f(1 - 1/(2N)).

use crate::error::{Error, Result};

/// Uniform grid t_k = k/N, k = 0..=N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "grid needs at least 2 cells");
        Grid { n }
    }

    /// Number of cells (the day is divided into `n` trading rounds).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell width 1/N.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Evaluation point used to store a value "at t = 1" for functions that
    /// diverge there.
    pub fn singular_cap(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.n as f64)
    }

    /// Index of the cell containing `t` (last cell for t = 1).
    pub fn cell(&self, t: f64) -> usize {
        ((t * self.n as f64) as usize).min(self.n - 1)
    }
}

/// Leading integrable singular part `coef * (1 - t)^{-exponent}` with
/// `exponent` in (0, 1). The tail is subtracted over the whole interval so
/// the smooth residual stays continuous; its exact antiderivative carries the
/// quadrature through the singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerTail {
    pub fn new(coef: f64, exponent: f64) -> Self {
        assert!(
            exponent > 0.0 && exponent < 1.0,
            "tail exponent must lie in (0,1) for an integrable singularity"
        );
        PowerTail { coef, exponent }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coef * (1.0 - t).powf(-self.exponent)
    }

    /// Exact integral of the tail over [a, 1].
    pub fn integral_from(&self, a: f64) -> f64 {
        self.coef * (1.0 - a).powf(1.0 - self.exponent) / (1.0 - self.exponent)
    }

    /// Rescale the coefficient (tails combine linearly).
    pub fn scaled(&self, c: f64) -> Self {
        PowerTail { coef: self.coef * c, ..*self }
    }
}

/// A deterministic function of t in [0, 1] sampled on a uniform grid, with an
/// optional closed-form singular tail at t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFunction {
    values: Vec<f64>,
    tail: Option<PowerTail>,
}

impl TimeFunction {
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(values.len() >= 3);
        TimeFunction { values, tail: None }
    }

    pub fn with_tail(values: Vec<f64>, tail: PowerTail) -> Self {
        assert!(values.len() >= 3);
        TimeFunction { values, tail: Some(tail) }
    }

    /// Sample a smooth function on the grid.
    pub fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n()).map(|k| f(grid.node(k))).collect();
        TimeFunction { values, tail: None }
    }

    /// Sample a function whose leading singular part at t = 1 is `tail`.
    /// The node at t = 1 stores f(1 - 1/(2N)).
    pub fn sample_singular(grid: &Grid, f: impl Fn(f64) -> f64, tail: PowerTail) -> Self {
        let cap = grid.singular_cap();
        let values = (0..=grid.n())
            .map(|k| {
                let t = grid.node(k);
                f(if k == grid.n() { cap } else { t })
            })
            .collect();
        TimeFunction { values, tail: Some(tail) }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        TimeFunction { values: vec![c; grid.n() + 1], tail: None }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn tail(&self) -> Option<&PowerTail> {
        self.tail.as_ref()
    }

    /// True when the function diverges as t -> 1.
    pub fn singular_at_one(&self) -> bool {
        self.tail.is_some()
    }

    fn grid(&self) -> Grid {
        Grid::new(self.n())
    }

    /// Node value of the smooth residual (full value minus tail part). At the
    /// final node both use the 1 - 1/(2N) convention so the residual stays
    /// bounded.
    fn residual(&self, k: usize) -> f64 {
        match &self.tail {
            None => self.values[k],
            Some(tail) => {
                let g = self.grid();
                let t = if k == self.n() { g.singular_cap() } else { g.node(k) };
                self.values[k] - tail.eval(t)
            }
        }
    }

    /// Pointwise evaluation: exact tail part plus linearly interpolated
    /// smooth residual. For singular functions, t >= 1 returns the stored
    /// capped value.
    pub fn eval(&self, t: f64) -> f64 {
        let g = self.grid();
        let n = self.n();
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= 1.0 {
            return self.values[n];
        }
        let k = g.cell(t);
        let t0 = g.node(k);
        let w = (t - t0) / g.h();
        let smooth = self.residual(k) * (1.0 - w) + self.residual(k + 1) * w;
        smooth + self.tail.as_ref().map_or(0.0, |tl| tl.eval(t))
    }

    /// Pointwise linear combination a*self + b*other. Tails merge when their
    /// exponents agree; a tail on only one side is kept (scaled).
    pub fn linear_combination(&self, a: f64, other: &TimeFunction, b: f64) -> TimeFunction {
        assert_eq!(self.n(), other.n(), "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let tail = match (&self.tail, &other.tail) {
            (None, None) => None,
            (Some(t1), None) => Some(t1.scaled(a)),
            (None, Some(t2)) => Some(t2.scaled(b)),
            (Some(t1), Some(t2)) => {
                assert!(
                    (t1.exponent - t2.exponent).abs() < 1e-12,
                    "cannot combine tails with different exponents"
                );
                Some(PowerTail { coef: a * t1.coef + b * t2.coef, exponent: t1.exponent })
            }
        };
        TimeFunction { values, tail }
    }

    pub fn scaled(&self, c: f64) -> TimeFunction {
        TimeFunction {
            values: self.values.iter().map(|v| c * v).collect(),
            tail: self.tail.map(|t| t.scaled(c)),
        }
    }

    /// Trapezoid estimate of the square integral, finite only when any tail
    /// is square integrable (exponent < 1/2); the divergent case errors.
    pub fn square_integral_estimate(&self) -> Result<f64> {
        if let Some(tail) = &self.tail {
            if tail.exponent >= 0.5 {
                return Err(Error::QuadratureDivergence {
                    reason: format!(
                        "square integral diverges: tail exponent {} >= 1/2",
                        tail.exponent
                    ),
                });
            }
        }
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::QuadratureDivergence {
                    reason: format!("non-finite value at node {k}"),
                });
            }
        }
        let g = self.grid();
        let h = g.h();
        let mut s = 0.0;
        for k in 0..self.n() {
            let a = self.values[k] * self.values[k];
            let b = self.values[k + 1] * self.values[k + 1];
            s += 0.5 * (a + b) * h;
        }
        Ok(s)
    }

    /// Backward cumulative integral I_k = int_{t_k}^{1} f(u) du: exact
    /// closed-form tail plus trapezoid on the smooth residual.
    pub fn cumulative_integral_to_one(&self) -> Vec<f64> {
        self.cumulative_exp_kernel_integral(0.0)
    }

    /// Full integral over [0, 1].
    pub fn integral(&self) -> f64 {
        self.cumulative_integral_to_one()[0]
    }

    /// Backward cumulative integral with exponential kernel:
    /// I_k = int_{t_k}^{1} e^{pi (t_k - u)} f(u) du.
    ///
    /// The smooth residual uses the stable one-cell recurrence
    /// I_k = e^{-pi h} I_{k+1} + (h/2)(r_k + e^{-pi h} r_{k+1}); the tail part
    /// is evaluated in closed form through the entire-function integral
    /// E_p(x) = int_0^x e^{pi v} v^{-p} dv.
    pub fn cumulative_exp_kernel_integral(&self, pi: f64) -> Vec<f64> {
        let n = self.n();
        let g = self.grid();
        let h = g.h();
        let decay = (-pi * h).exp();
        let mut out = vec![0.0; n + 1];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            let r0 = self.residual(k);
            let r1 = self.residual(k + 1);
            acc = decay * acc + 0.5 * h * (r0 + decay * r1);
            out[k] = acc;
        }
        if let Some(tail) = &self.tail {
            let p = tail.exponent;
            for k in 0..n {
                let t = g.node(k);
                out[k] += tail.coef * (pi * (t - 1.0)).exp() * exp_power_integral(1.0 - t, p, pi);
            }
        }
        out
    }
}

/// E_p(x) = int_0^x e^{pi v} v^{-p} dv for p in (0, 1), by the entire series
/// sum_j pi^j x^{j+1-p} / (j! (j+1-p)).
pub fn exp_power_integral(x: f64, p: f64, pi: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let base = x.powf(1.0 - p);
    let mut coef = 1.0; // (pi x)^j / j!
    let mut sum = base / (1.0 - p);
    for j in 1..200 {
        coef *= pi * x / j as f64;
        let term = coef * base / (j as f64 + 1.0 - p);
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            break;
        }
    }
    sum
}

/// Options for the backward Runge-Kutta sweep.
#[derive(Debug, Clone, Copy)]
pub struct BackwardOdeOptions {
    /// Refine steps inside the final 1% of the interval (for integrable
    /// singular forcing at t = 1).
    pub singular: bool,
    /// Substep multiplier used inside the refined region.
    pub refine: usize,
    /// Blow-up threshold: any |state| above this (or non-finite) aborts.
    pub blowup_threshold: f64,
}

impl Default for BackwardOdeOptions {
    fn default() -> Self {
        BackwardOdeOptions { singular: false, refine: 100, blowup_threshold: 1e8 }
    }
}

/// Classical fixed-step RK4 sweep from t = 1 down to t = 0.
///
/// Returns the state at every grid node (index k holds the state at t_k; the
/// final node holds `terminal` exactly). On blow-up returns the time at which
/// the threshold was first crossed.
///
/// When `singular` is set, sample times passed to `rhs` are clamped to
/// 1 - (substep)/2 so integrable singular coefficients are never evaluated at
/// t = 1, and the final 1% of the interval is substepped `refine` times.
pub fn rk4_backward(
    grid: &Grid,
    terminal: &[f64],
    opts: BackwardOdeOptions,
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let n = grid.n();
    let h = grid.h();
    let dim = terminal.len();
    let mut states = vec![vec![0.0; dim]; n + 1];
    states[n].copy_from_slice(terminal);

    let mut y = terminal.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let refine_from = 1.0 - 0.01; // last 1% of the interval
    for cell in (0..n).rev() {
        let t_hi = grid.node(cell + 1);
        let sub = if opts.singular && t_hi > refine_from { opts.refine.max(1) } else { 1 };
        let dt = h / sub as f64;
        let clamp = if opts.singular { 1.0 - dt / 2.0 } else { 1.0 };
        for s in 0..sub {
            let t = t_hi - s as f64 * dt;
            let te = t.min(clamp);
            rhs(te, &y, &mut k1);
            for i in 0..dim {
                tmp[i] = y[i] - 0.5 * dt * k1[i];
            }
            let tm = (t - 0.5 * dt).min(clamp);
            rhs(tm, &tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] - 0.5 * dt * k2[i];
            }
            rhs(tm, &tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] - dt * k3[i];
            }
            let tl = (t - dt).min(clamp);
            rhs(tl, &tmp, &mut k4);
            for i in 0..dim {
                y[i] -= dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let bad = y
                .iter()
                .any(|v| !v.is_finite() || v.abs() > opts.blowup_threshold);
            if bad {
                return Err(t - dt);
            }
        }
        states[cell].copy_from_slice(&y);
    }
    Ok(states)
}
