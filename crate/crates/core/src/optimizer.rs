//! Sensing-time optimization on the feasible interval (τ_min, T).
//!
//! The rate is piecewise smooth in τ: the slot-budget handover limit
//! ⌊(T − τ)/(τ + τ_ho)⌋ drops by one at each breakpoint
//! τ_a = (T − a·τ_ho)/(a + 1). The summand that disappears there has a zero
//! time factor at the breakpoint, so the rate is continuous with a kink.
//! Each smooth segment is scanned and refined by golden-section search; a
//! uniform grid over the whole interval backs the result up.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::link::{Capacities, Scenario, ThroughputPoint};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Distance kept from the open interval's endpoints, in seconds.
    pub boundary_eps: f64,
    /// Golden-section stopping width, in seconds.
    pub bracket_tol: f64,
    /// Points scanned per segment before refinement.
    pub scan_points: usize,
    /// Size of the backing uniform grid.
    pub grid_points: usize,
    pub exec: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            boundary_eps: 1e-9,
            bracket_tol: 1e-7,
            scan_points: 32,
            grid_points: 10_000,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub tau_opt: f64,
    pub rate_max: f64,
    pub alpha_at_opt: usize,
    pub nce_at_opt: f64,
    pub segments_evaluated: usize,
}

/// Saturated-channel maximum L together with its maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxThroughput {
    pub l: f64,
    pub tau_opt: f64,
    pub alpha_opt: usize,
    pub nce: f64,
    pub np_star: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub tf: f64,
    pub alpha_bar: usize,
    pub tau_opt_tf: f64,
    pub rate_tf: f64,
    pub nce_tf: f64,
}

/// Maximizes the average rate over τ ∈ (τ_min, T), with handovers capped
/// at `cap_override` when given.
pub fn optimize_tau(scn: &Scenario, cap_override: Option<usize>) -> Result<OptimizationResult> {
    optimize_tau_with(scn, cap_override, &SearchOptions::default())
}

pub fn optimize_tau_with(
    scn: &Scenario,
    cap_override: Option<usize>,
    opts: &SearchOptions,
) -> Result<OptimizationResult> {
    scn.validate()?;
    let (lo, hi) = feasible_window(scn, opts.boundary_eps)?;
    let caps = scn.mean_capacities();
    let rate = |tau: f64| scn.evaluate_capped(tau, caps, cap_override).rate;

    let mut edges = vec![lo];
    edges.extend(scn.handover_breakpoints(lo, hi));
    edges.push(hi);
    let segments: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();

    let candidates = opts.exec.map_slice(&segments, |&(a, b)| {
        maximize_segment(&rate, a, b, opts.scan_points, opts.bracket_tol)
    });
    let mut best =
        candidates.into_iter().fold(
            (lo, f64::NEG_INFINITY),
            |acc, c| if c.1 > acc.1 { c } else { acc },
        );

    if opts.grid_points > 0 {
        let grid = uniform_grid(lo, hi, opts.grid_points);
        let rates = opts.exec.map_slice(&grid, |&t| rate(t));
        for (t, r) in grid.into_iter().zip(rates) {
            if r > best.1 {
                best = (t, r);
            }
        }
    }

    let at = scn.evaluate_capped(best.0, caps, cap_override);
    Ok(OptimizationResult {
        tau_opt: best.0,
        rate_max: at.rate,
        alpha_at_opt: at.alpha,
        nce_at_opt: at.nce,
        segments_evaluated: segments.len(),
    })
}

/// L: the maximum over τ with the channel count raised (or lowered) to the
/// saturation threshold N_p*, where the channel count no longer binds.
pub fn max_throughput_l(scn: &Scenario) -> Result<MaxThroughput> {
    let np_star = scn.np_saturation_threshold();
    let virt = scn.with_channel_count(np_star);
    let res = optimize_tau(&virt, None)?;
    Ok(MaxThroughput {
        l: res.rate_max,
        tau_opt: res.tau_opt,
        alpha_opt: res.alpha_at_opt,
        nce: res.nce_at_opt,
        np_star,
    })
}

/// Smallest handover cap ᾱ ≤ α_opt whose re-optimized rate reaches
/// `tf`·L.
pub fn tf_to_alpha_bar(scn: &Scenario, tf: f64) -> Result<usize> {
    Ok(tradeoff_search(scn, tf)?.alpha_bar)
}

/// Rate-maximizing sensing time under the handover cap chosen for `tf`.
pub fn optimize_tau_tf(scn: &Scenario, tf: f64) -> Result<TradeoffResult> {
    tradeoff_search(scn, tf)
}

fn tradeoff_search(scn: &Scenario, tf: f64) -> Result<TradeoffResult> {
    if !(0.0..=1.0).contains(&tf) {
        return Err(invalid("tf", "tradeoff factor must lie in [0, 1]"));
    }
    let top = max_throughput_l(scn)?;
    let virt = scn.with_channel_count(top.np_star);
    let target = tf * top.l * (1.0 - 1e-12);
    for alpha_bar in 0..top.alpha_opt {
        let res = optimize_tau(&virt, Some(alpha_bar))?;
        if res.rate_max >= target {
            return Ok(TradeoffResult {
                tf,
                alpha_bar,
                tau_opt_tf: res.tau_opt,
                rate_tf: res.rate_max,
                nce_tf: res.nce_at_opt,
            });
        }
    }
    Ok(TradeoffResult {
        tf,
        alpha_bar: top.alpha_opt,
        tau_opt_tf: top.tau_opt,
        rate_tf: top.l,
        nce_tf: top.nce,
    })
}

/// Rate curve over `points` evenly spaced sensing times in [start, end].
/// Points outside the feasible interval are evaluated as well; the caller
/// decides what to do with them.
pub fn rate_curve(
    scn: &Scenario,
    start: f64,
    end: f64,
    points: usize,
    cap_override: Option<usize>,
    exec: Execution,
) -> Result<Vec<ThroughputPoint>> {
    scn.validate()?;
    if !(start > 0.0 && end < scn.slot_t && start <= end) {
        return Err(invalid(
            "tau range",
            format!("[{start}, {end}] must lie in (0, T)"),
        ));
    }
    if points == 0 {
        return Err(invalid("points", "need at least one point"));
    }
    let caps: Capacities = scn.mean_capacities();
    let grid = uniform_grid(start, end, points);
    Ok(exec.map_slice(&grid, |&t| scn.evaluate_capped(t, caps, cap_override)))
}

fn feasible_window(scn: &Scenario, eps: f64) -> Result<(f64, f64)> {
    let tau_min = scn.tau_min();
    let lo = tau_min + eps;
    let hi = scn.slot_t - eps;
    if lo >= hi {
        return Err(Error::Infeasible {
            tau_min,
            slot_t: scn.slot_t,
        });
    }
    Ok((lo, hi))
}

/// `n` evenly spaced points on [a, b]; a single point sits at `a`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Scan then golden-section refine on one smooth segment.
fn maximize_segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, scan: usize, tol: f64) -> (f64, f64) {
    let pts = uniform_grid(a, b, scan.max(3));
    let vals: Vec<f64> = pts.iter().map(|&t| f(t)).collect();
    let (i, _) =
        vals.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let mut best = (pts[i], vals[i]);
    let left = pts[i.saturating_sub(1)];
    let right = pts[(i + 1).min(pts.len() - 1)];
    if right > left {
        let refined = golden_section_max(f, left, right, tol);
        if refined.1 > best.1 {
            best = refined;
        }
    }
    best
}

/// Golden-section search for a maximum of a unimodal `f` on [a, b],
/// stopped when the bracket is narrower than `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(
    f: &F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .fold(
            (mid, f64::NEG_INFINITY),
            |acc, p| if p.1 > acc.1 { p } else { acc },
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorConfig;
    use crate::link::DEFAULT_P_FREE;

    #[test]
    fn golden_section_on_parabola() {
        let (x, v) = golden_section_max(&|t: f64| -(t - 0.37).powi(2), 0.0, 1.0, 1e-9);
        assert!((x - 0.37).abs() < 1e-8);
        assert!(v <= 0.0 && v > -1e-16);
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(uniform_grid(1.0, 2.0, 1), vec![1.0]);
        let g = uniform_grid(1.0, 2.0, 5);
        assert_eq!(g.first(), Some(&1.0));
        assert_eq!(g.last(), Some(&2.0));
    }

    #[test]
    fn monotone_objective_sits_on_lower_boundary() {
        // near-ideal detector: the rate C₀·p·(1 − τ/T) falls with τ
        let mut scn = Scenario::with_channels(1, &[0.6]).unwrap();
        scn.detector = DetectorConfig::new(6e6, 0.999_999_999, 1e-9, 50.0).unwrap();
        let res = optimize_tau(&scn, None).unwrap();
        assert!((res.tau_opt - scn.tau_min()).abs() < 1e-8);
        assert_eq!(res.alpha_at_opt, 0);
    }

    #[test]
    fn infeasible_window_is_reported() {
        let mut scn = Scenario::default();
        scn.detector.gamma = 1e-4;
        assert!(matches!(
            optimize_tau(&scn, None),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_cap_is_single_channel_problem() {
        let scn = Scenario::with_channels(15, &DEFAULT_P_FREE).unwrap();
        let capped = optimize_tau(&scn, Some(0)).unwrap();
        let single = optimize_tau(&scn.with_channel_count(1), None).unwrap();
        assert!((capped.rate_max - single.rate_max).abs() < 1e-12);
        assert!((capped.tau_opt - single.tau_opt).abs() < 1e-6);
    }

    #[test]
    fn tradeoff_factor_range() {
        let scn = Scenario::default();
        assert!(tf_to_alpha_bar(&scn, -0.1).is_err());
        assert!(tf_to_alpha_bar(&scn, 1.1).is_err());
        assert_eq!(tf_to_alpha_bar(&scn, 0.0).unwrap(), 0);
    }

    #[test]
    fn full_tradeoff_equals_l() {
        let scn = Scenario::default();
        let top = max_throughput_l(&scn).unwrap();
        let tf1 = optimize_tau_tf(&scn, 1.0).unwrap();
        assert_eq!(tf1.alpha_bar, top.alpha_opt);
        assert!((tf1.rate_tf - top.l).abs() <= 1e-12 * top.l);
        assert!((tf1.tau_opt_tf - top.tau_opt).abs() < 1e-6);
    }

    #[test]
    fn rate_curve_rejects_bad_ranges() {
        let scn = Scenario::default();
        let e = Execution::Sequential;
        assert!(rate_curve(&scn, 0.0, 0.05, 10, None, e).is_err());
        assert!(rate_curve(&scn, 0.05, 0.01, 10, None, e).is_err());
        assert!(rate_curve(&scn, 0.01, 0.1, 10, None, e).is_err());
        assert!(rate_curve(&scn, 0.01, 0.05, 0, None, e).is_err());
        assert_eq!(rate_curve(&scn, 0.02, 0.02, 1, None, e).unwrap().len(), 1);
    }
}
