//! Subcommand implementations. Each writes its JSON result to `stdout`;
//! series go to the `--out` CSV file. `sweep` has no JSON result and writes
//! its CSV to `stdout` when no file is given.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sensopt_core::adaptive::{last_quartile_spread, write_records};
use sensopt_core::optimizer::rate_curve;
use sensopt_core::simenv::write_trace;
use sensopt_core::{
    max_throughput_l, optimize_tau, optimize_tau_tf, run_adaptive, stream_rng, Execution,
    SlotSimulator, SlotStats,
};
use serde_json::json;

use crate::checks::validation_suite;
use crate::config::ConfigFile;
use crate::error::CliError;

fn write_series(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(path, e))
        }
        None => f(stdout).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn emit(stdout: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    writeln!(stdout, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArgs {
    pub tau_start: Option<f64>,
    pub tau_end: Option<f64>,
    pub points: usize,
    pub np_list: Vec<usize>,
    pub out: Option<PathBuf>,
}

/// Rate curve over a τ grid. With an N_p list, one `rate,alpha,nce` column
/// group per channel count, suffixed `_np<N>`.
pub fn sweep(cfg: &ConfigFile, args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scn = &cfg.scenario;
    let t = scn.slot_t;
    let start = args.tau_start.unwrap_or(1e-3 * t);
    let end = args.tau_end.unwrap_or(0.999 * t);
    if !(start > 0.0 && end < t && start <= end) {
        return Err(CliError::Usage(format!(
            "tau range [{start}, {end}] must lie in (0, {t})"
        )));
    }
    if args.points == 0 {
        return Err(CliError::Usage("points must be at least 1".into()));
    }
    let exec = Execution::default();
    let curves = if args.np_list.is_empty() {
        vec![rate_curve(scn, start, end, args.points, None, exec)?]
    } else {
        args.np_list
            .iter()
            .map(|&n| {
                if n == 0 {
                    return Err(CliError::Usage("np-list entries must be at least 1".into()));
                }
                Ok(rate_curve(
                    &scn.with_channel_count(n),
                    start,
                    end,
                    args.points,
                    None,
                    exec,
                )?)
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut header = String::from("tau,tau_over_T");
    if args.np_list.is_empty() {
        header.push_str(",rate,alpha,nce");
    } else {
        for n in &args.np_list {
            header.push_str(&format!(",rate_np{n},alpha_np{n},nce_np{n}"));
        }
    }
    write_series(args.out.as_deref(), stdout, |w| {
        writeln!(w, "{header}")?;
        for i in 0..args.points {
            let tau = curves[0][i].tau;
            write!(w, "{},{}", tau, tau / t)?;
            for c in &curves {
                let p = &c[i];
                write!(w, ",{},{},{}", p.rate, p.alpha, p.nce)?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Optimal sensing time, the saturated maximum L and N_p*.
pub fn optimize(cfg: &ConfigFile, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scn = &cfg.scenario;
    let res = optimize_tau(scn, None)?;
    let top = max_throughput_l(scn)?;
    let c0 = scn.mean_capacities().c0;
    let energy = scn.consumed_energy(res.tau_opt, cfg.power.p_sense, cfg.power.p_ho, None)?;
    emit(
        stdout,
        &json!({
            "tau_opt": res.tau_opt,
            "tau_opt_over_T": res.tau_opt / scn.slot_t,
            "rate_max": res.rate_max,
            "rate_max_normalized": res.rate_max / c0,
            "alpha_opt": res.alpha_at_opt,
            "nce": res.nce_at_opt,
            "energy_j": energy,
            "tau_min": scn.tau_min(),
            "L": top.l,
            "L_normalized": top.l / c0,
            "tau_opt_L": top.tau_opt,
            "alpha_opt_L": top.alpha_opt,
            "nce_L": top.nce,
            "np_star": top.np_star,
        }),
    )
}

/// Energy-aware design for tradeoff factor `tf`, next to the TF = 1 design.
pub fn tradeoff(cfg: &ConfigFile, tf: f64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scn = &cfg.scenario;
    let res = optimize_tau_tf(scn, tf)?;
    let top = max_throughput_l(scn)?;
    let c0 = scn.mean_capacities().c0;
    emit(
        stdout,
        &json!({
            "tf": res.tf,
            "alpha_bar": res.alpha_bar,
            "tau_opt_tf": res.tau_opt_tf,
            "rate_tf": res.rate_tf,
            "rate_tf_normalized": res.rate_tf / c0,
            "nce_tf": res.nce_tf,
            "L": top.l,
            "tau_opt_L": top.tau_opt,
            "alpha_opt_L": top.alpha_opt,
            "nce_L": top.nce,
            "np_star": top.np_star,
            "rate_ratio": res.rate_tf / top.l,
            "nce_reduction": 1.0 - res.nce_tf / top.nce,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnArgs {
    pub cycles: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

/// Runs the learning loop; the cycle trace goes to `--out` when given, the
/// summary to standard output.
pub fn learn(cfg: &ConfigFile, args: &LearnArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scn = &cfg.scenario;
    let mut acfg = cfg.adaptive;
    if let Some(c) = args.cycles {
        acfg.cycles = c;
    }
    if let Some(s) = args.seed {
        acfg.seed = s;
    }
    let out = run_adaptive(scn, &acfg)?;
    let opt = optimize_tau(scn, None)?;
    let analytic = scn.throughput(out.tau_learned, None)?.rate;
    let c0 = scn.mean_capacities().c0;
    if let Some(path) = &args.snapshot {
        std::fs::write(path, out.network.snapshot()).map_err(|e| CliError::io(path, e))?;
    }
    let summary = json!({
        "np": scn.np,
        "seed": acfg.seed,
        "cycles": acfg.cycles,
        "t_ep_slots": acfg.estimator.t_ep_slots,
        "tau_learned": out.tau_learned,
        "rate_learned": out.rate_learned,
        "rate_learned_normalized": out.rate_learned / c0,
        "rate_at_tau_learned": analytic,
        "tau_opt": opt.tau_opt,
        "rate_max": opt.rate_max,
        "rate_ratio": analytic / opt.rate_max,
        "tau_rel_error": (out.tau_learned - opt.tau_opt).abs() / opt.tau_opt,
        "warmup_spacing": out.warmup_spacing(),
        "kc_last_quartile_std": last_quartile_spread(&out.records),
    });
    if let Some(path) = &args.out {
        write_series(Some(path), stdout, |w| write_records(w, &out.records))?;
    }
    emit(stdout, &summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub tau: Option<f64>,
    pub slots: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Slot-by-slot simulation at one sensing time (τ_opt by default).
pub fn simulate(
    cfg: &ConfigFile,
    args: &SimulateArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let scn = &cfg.scenario;
    if args.slots == 0 {
        return Err(CliError::Usage("slots must be at least 1".into()));
    }
    let tau = match args.tau {
        Some(t) => t,
        None => optimize_tau(scn, None)?.tau_opt,
    };
    let sim = SlotSimulator::new(scn, tau, cfg.adaptive.estimator.decision_mode)?;
    let mut rng = stream_rng(args.seed, 0);
    let traces: Vec<_> = (0..args.slots).map(|_| sim.run_slot(&mut rng)).collect();
    let mut stats = SlotStats::default();
    traces.iter().for_each(|t| stats.push(t));
    let p = scn.throughput(tau, None)?;
    if let Some(path) = &args.out {
        write_series(Some(path), stdout, |w| write_trace(w, &traces))?;
    }
    emit(
        stdout,
        &json!({
            "tau": tau,
            "slots": stats.slots,
            "seed": args.seed,
            "transmissions": stats.transmissions,
            "mean_rate": stats.mean_rate,
            "std_error_rate": stats.std_error_rate(),
            "mean_sensed": stats.mean_sensed,
            "std_error_sensed": stats.std_error_sensed(),
            "analytic_rate": p.rate,
            "analytic_nce": p.nce,
            "alpha": p.alpha,
        }),
    )
}

/// Runs the self-check suite; fails with exit status 3 if any check fails.
pub fn validate(cfg: &ConfigFile, seed: u64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let checks = validation_suite(&cfg.scenario, seed)?;
    let passed = checks.iter().all(|c| c.pass);
    emit(stdout, &json!({ "passed": passed, "checks": checks }))?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Validation(failed.join(", ")))
    }
}
