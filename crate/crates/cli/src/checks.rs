//! Numerical self-checks shared by `sensopt validate` and the acceptance
//! suite: Monte Carlo against the analytic model, network derivatives
//! against finite differences, and KC equilibria against closed forms.

use rand::Rng;
use sensopt_core::kc::Quadratic;
use sensopt_core::optimizer::uniform_grid;
use sensopt_core::{
    optimize_tau, run_to_convergence, simulate_batch, stream_rng, DecisionMode, Execution,
    KcConfig, MffNetwork, Result, Scenario,
};
use serde::Serialize;

/// Outcome of one check: the measured deviation against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured` ≤ `tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

/// |a − b| / max(|a|, |b|, 1e-7).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Largest relative error between the analytic input sensitivity and a
/// central difference (step `h`) over `pairs` random (network, input) pairs.
pub fn sensitivity_error(pairs: usize, seed: u64, h: f64) -> f64 {
    let mut rng = stream_rng(seed, 0);
    (0..pairs)
        .map(|_| {
            let net = MffNetwork::random(9, 1.0, &mut rng).expect("valid size");
            let x: f64 = rng.random_range(0.0..1.0);
            let fd = (net.output(x + h) - net.output(x - h)) / (2.0 * h);
            relative_error(net.sensitivity(x), fd)
        })
        .fold(0.0, f64::max)
}

/// Largest relative error between backpropagated weight gradients of
/// ½(y − t)² and central differences, over `nets` × `pairs` random cases.
pub fn backprop_error(nets: usize, pairs: usize, seed: u64, h: f64) -> f64 {
    let mut rng = stream_rng(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..nets {
        let net = MffNetwork::random(9, 1.0, &mut rng).expect("valid size");
        for _ in 0..pairs {
            let x: f64 = rng.random_range(0.0..1.0);
            let t: f64 = rng.random_range(-0.9..0.9);
            let g = net.gradients(x, t);
            let analytic: Vec<f64> =
                g.w1.iter()
                    .chain(&g.b1)
                    .chain(&g.w2)
                    .copied()
                    .chain([g.b2])
                    .collect();
            let p0 = net.params();
            let mut probe = net.clone();
            let mut loss_at = |p: &[f64]| {
                probe.set_params(p).expect("same layout");
                0.5 * (probe.output(x) - t).powi(2)
            };
            for (j, a) in analytic.iter().enumerate() {
                let mut p = p0.clone();
                p[j] = p0[j] + h;
                let up = loss_at(&p);
                p[j] = p0[j] - h;
                let dn = loss_at(&p);
                worst = worst.max(relative_error(*a, (up - dn) / (2.0 * h)));
            }
        }
    }
    worst
}

/// Distance of the KC equilibrium on ½·2·(x − 0.3)² over [0, 1] (no leak)
/// from 0.3.
pub fn kc_bowl_error() -> Result<f64> {
    let cfg = KcConfig {
        g: 0.0,
        ..KcConfig::default()
    };
    let bowl = Quadratic {
        center: 0.3,
        curvature: 2.0,
    };
    Ok((run_to_convergence(0.9, &bowl, (0.0, 1.0), &cfg)?.x - 0.3).abs())
}

/// Distance of the KC equilibrium on (x − 1.5)² over [0, 1] (no leak) from
/// the penalty-layer stationary point (3 + s)/(2 + s).
pub fn kc_penalty_layer_error() -> Result<f64> {
    let cfg = KcConfig {
        g: 0.0,
        ..KcConfig::default()
    };
    let bowl = Quadratic {
        center: 1.5,
        curvature: 2.0,
    };
    let s = cfg.penalty_slope;
    let want = (3.0 + s) / (2.0 + s);
    Ok((run_to_convergence(0.5, &bowl, (0.0, 1.0), &cfg)?.x - want).abs())
}

/// Monte Carlo rate and sensed-channel count at `tau`, each as a z-score
/// against the analytic value.
pub fn monte_carlo_z(scn: &Scenario, tau: f64, slots: usize, seed: u64) -> Result<(f64, f64)> {
    let st = simulate_batch(
        scn,
        tau,
        DecisionMode::ClosedForm,
        slots,
        seed,
        Execution::default(),
    )?;
    let p = scn.throughput(tau, None)?;
    let z = |est: f64, want: f64, se: f64| {
        if se > 0.0 {
            (est - want).abs() / se
        } else if est == want {
            0.0
        } else {
            f64::INFINITY
        }
    };
    Ok((
        z(st.mean_rate, p.rate, st.std_error_rate()),
        z(st.mean_sensed, p.nce, st.std_error_sensed()),
    ))
}

/// Shortfall of the optimizer's rate below the best of a `points` grid
/// (negative when the optimizer is better).
pub fn optimizer_shortfall(scn: &Scenario, points: usize) -> Result<f64> {
    let res = optimize_tau(scn, None)?;
    let eps = 1e-9;
    let best = uniform_grid(scn.tau_min() + eps, scn.slot_t - eps, points)
        .into_iter()
        .map(|t| scn.throughput(t, None).map(|p| p.rate))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::MIN, f64::max);
    Ok(best - res.rate_max)
}

/// The suite behind `sensopt validate`.
pub fn validation_suite(scn: &Scenario, seed: u64) -> Result<Vec<Check>> {
    let d = &scn.detector;
    let mut checks = vec![Check::at_most(
        "pfa_at_tau_min",
        (d.pfa_constrained(d.tau_min()) - d.pfa_max).abs(),
        1e-9,
    )];
    checks.push(Check::at_most(
        "optimizer_vs_grid",
        optimizer_shortfall(scn, 10_000)?,
        1e-9,
    ));
    let opt = optimize_tau(scn, None)?;
    for (label, tau) in [
        ("tau_opt", opt.tau_opt),
        ("tau_mid", 0.5 * (opt.tau_opt + scn.slot_t)),
    ] {
        let (zr, zn) = monte_carlo_z(scn, tau, 200_000, seed)?;
        checks.push(Check::at_most(
            format!("monte_carlo_rate_z@{label}"),
            zr,
            4.0,
        ));
        checks.push(Check::at_most(
            format!("monte_carlo_nce_z@{label}"),
            zn,
            4.0,
        ));
    }
    checks.push(Check::at_most(
        "mff_sensitivity_rel",
        sensitivity_error(100, seed, 1e-6),
        1e-5,
    ));
    checks.push(Check::at_most(
        "mff_backprop_rel",
        backprop_error(10, 10, seed, 1e-6),
        1e-4,
    ));
    checks.push(Check::at_most("kc_bowl", kc_bowl_error()?, 1e-3));
    checks.push(Check::at_most(
        "kc_penalty_layer",
        kc_penalty_layer_error()?,
        1e-3,
    ));
    Ok(checks)
}
