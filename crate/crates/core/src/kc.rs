//! Kennedy–Chua gradient-flow network for the scalar problem
//! min φ̂(x) subject to lo ≤ x ≤ hi, simulated with forward Euler.
//!
//! C·dx/dt = −φ̂'(x) − Σ_j i_j·∂f_j/∂x − G·x, with constraints
//! f₁ = hi − x ≥ 0, f₂ = x − lo ≥ 0 and penalty currents i_j = g(f_j).
//! The state x is the normalized sensing time τ/T.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mff::MffNetwork;

/// A differentiable scalar cost.
pub trait CostSurface {
    fn eval(&self, x: f64) -> f64;
    fn grad(&self, x: f64) -> f64;
}

impl CostSurface for MffNetwork {
    fn eval(&self, x: f64) -> f64 {
        self.output(x)
    }

    fn grad(&self, x: f64) -> f64 {
        self.sensitivity(x)
    }
}

impl<T: CostSurface + ?Sized> CostSurface for &T {
    fn eval(&self, x: f64) -> f64 {
        (**self).eval(x)
    }

    fn grad(&self, x: f64) -> f64 {
        (**self).grad(x)
    }
}

/// Cost given by a pair of closures.
pub struct FnSurface<E, G> {
    pub eval: E,
    pub grad: G,
}

impl<E: Fn(f64) -> f64, G: Fn(f64) -> f64> CostSurface for FnSurface<E, G> {
    fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    fn grad(&self, x: f64) -> f64 {
        (self.grad)(x)
    }
}

/// Quadratic bowl ½·curvature·(x − center)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub center: f64,
    pub curvature: f64,
}

impl CostSurface for Quadratic {
    fn eval(&self, x: f64) -> f64 {
        0.5 * self.curvature * (x - self.center).powi(2)
    }

    fn grad(&self, x: f64) -> f64 {
        self.curvature * (x - self.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KcConfig {
    /// Output capacitance, farads.
    pub c: f64,
    /// Parasitic conductance, siemens.
    pub g: f64,
    /// Slope of the penalty current below the constraint boundary.
    pub penalty_slope: f64,
    /// Euler step in seconds of circuit time.
    pub dt: f64,
    pub max_steps: usize,
    /// Convergence threshold on |dx/dt|, volts per second.
    pub tol: f64,
}

impl Default for KcConfig {
    fn default() -> Self {
        Self {
            c: 10e-9,
            g: 1e-3,
            penalty_slope: 1e3,
            // dt/C·(penalty_slope + curvature) must stay below 2 for Euler
            // stability; 5 ps keeps it at ~0.5.
            dt: 5e-12,
            max_steps: 1_000_000,
            tol: 100.0,
        }
    }
}

impl KcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(invalid("g", "must be non-negative"));
        }
        if !(self.penalty_slope > 0.0 && self.penalty_slope.is_finite()) {
            return Err(invalid("penalty_slope", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcState {
    pub x: f64,
    pub step_count: usize,
    pub converged: bool,
    /// Right-hand side C·dx/dt at `x`.
    pub rhs: f64,
}

impl KcState {
    pub fn new(x: f64) -> Self {
        Self {
            x,
            step_count: 0,
            converged: false,
            rhs: f64::NAN,
        }
    }
}

/// Penalty current g(v): zero when the constraint holds, slope·v otherwise.
pub fn penalty(v: f64, cfg: &KcConfig) -> f64 {
    if v < 0.0 {
        cfg.penalty_slope * v
    } else {
        0.0
    }
}

/// C·dx/dt at `x`.
pub fn rhs<S: CostSurface + ?Sized>(
    x: f64,
    cost: &S,
    bounds: (f64, f64),
    cfg: &KcConfig,
) -> Result<f64> {
    let d = cost.grad(x);
    if !d.is_finite() {
        return Err(Error::NonFiniteGradient { x });
    }
    let (lo, hi) = bounds;
    let i1 = penalty(hi - x, cfg);
    let i2 = penalty(x - lo, cfg);
    // ∂f₁/∂x = −1, ∂f₂/∂x = +1
    Ok(-d + i1 - i2 - cfg.g * x)
}

/// One Euler step.
pub fn step<S: CostSurface + ?Sized>(
    state: &KcState,
    cost: &S,
    bounds: (f64, f64),
    cfg: &KcConfig,
) -> Result<KcState> {
    let r = rhs(state.x, cost, bounds, cfg)?;
    Ok(KcState {
        x: state.x + cfg.dt / cfg.c * r,
        step_count: state.step_count + 1,
        converged: false,
        rhs: r,
    })
}

fn check(x0: f64, bounds: (f64, f64), cfg: &KcConfig) -> Result<()> {
    cfg.validate()?;
    if !x0.is_finite() {
        return Err(invalid("x0", "must be finite"));
    }
    if !(bounds.0 < bounds.1) {
        return Err(invalid("bounds", "need lo < hi"));
    }
    Ok(())
}

/// Integrates until |dx/dt| < tol or `max_steps` is spent. The returned
/// state is the point at which the stopping test was made.
pub fn run_to_convergence<S: CostSurface + ?Sized>(
    x0: f64,
    cost: &S,
    bounds: (f64, f64),
    cfg: &KcConfig,
) -> Result<KcState> {
    integrate(x0, cost, bounds, cfg, |_| {})
}

/// One row of a convergence trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub x: f64,
    pub rhs: f64,
}

/// Like [`run_to_convergence`], also recording every `every`-th state and
/// the final one.
pub fn run_with_trajectory<S: CostSurface + ?Sized>(
    x0: f64,
    cost: &S,
    bounds: (f64, f64),
    cfg: &KcConfig,
    every: usize,
) -> Result<(KcState, Vec<TrajectoryPoint>)> {
    let every = every.max(1);
    let mut traj = Vec::new();
    let end = integrate(x0, cost, bounds, cfg, |s| {
        if s.step_count % every == 0 {
            traj.push(TrajectoryPoint {
                step: s.step_count,
                x: s.x,
                rhs: s.rhs,
            });
        }
    })?;
    if traj.last().map(|p| p.step) != Some(end.step_count) {
        traj.push(TrajectoryPoint {
            step: end.step_count,
            x: end.x,
            rhs: end.rhs,
        });
    }
    Ok((end, traj))
}

fn integrate<S: CostSurface + ?Sized>(
    x0: f64,
    cost: &S,
    bounds: (f64, f64),
    cfg: &KcConfig,
    mut visit: impl FnMut(&KcState),
) -> Result<KcState> {
    check(x0, bounds, cfg)?;
    let threshold = cfg.tol * cfg.c;
    let mut s = KcState::new(x0);
    loop {
        let r = rhs(s.x, cost, bounds, cfg)?;
        s.rhs = r;
        s.converged = r.abs() < threshold;
        visit(&s);
        if s.converged || s.step_count >= cfg.max_steps {
            return Ok(s);
        }
        s.x += cfg.dt / cfg.c * r;
        s.step_count += 1;
    }
}

/// Writes a trajectory as `step,x,rhs` CSV.
pub fn write_trajectory<W: Write>(mut out: W, traj: &[TrajectoryPoint]) -> io::Result<()> {
    writeln!(out, "step,x,rhs")?;
    for p in traj {
        writeln!(out, "{},{},{}", p.step, p.x, p.rhs)?;
    }
    Ok(())
}
