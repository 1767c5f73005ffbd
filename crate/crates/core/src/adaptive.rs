//! Closed learning loop: KC output → sensing time → throughput estimate →
//! MFF training, repeated.
//!
//! A warm-up phase probes evenly spaced sensing times so the network starts
//! from a non-degenerate surface. Each cycle then settles the KC flow on the
//! current learned surface (warm-started at the previous output), applies the
//! result with optional decaying jitter, measures the windowed throughput and
//! trains on the new pattern.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::{derive_seed, stream_rng, Execution};
use crate::kc::{run_to_convergence, KcConfig};
use crate::link::Scenario;
use crate::mff::{cost_from_rate, train_step, MffNetwork, TrainingBuffer, DEFAULT_HIDDEN};
use crate::simenv::{batch_stats, EstimatorConfig, SlotSimulator};

/// Distance kept from the ends of the feasible interval when applying x.
pub const EDGE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub cycles: usize,
    pub warmup_probes: usize,
    /// Half-width of the uniform exploration jitter on x; 0 disables it.
    pub jitter: f64,
    /// Cycles after which the jitter halves.
    pub jitter_half_life: usize,
    pub estimator: EstimatorConfig,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs_per_cycle: usize,
    pub pretrain_epochs: usize,
    pub buffer_capacity: usize,
    pub kc: KcConfig,
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            cycles: 200,
            warmup_probes: 8,
            jitter: 0.01,
            jitter_half_life: 50,
            estimator: EstimatorConfig::default(),
            hidden: DEFAULT_HIDDEN,
            learning_rate: 0.05,
            epochs_per_cycle: 50,
            pretrain_epochs: 2000,
            buffer_capacity: TrainingBuffer::DEFAULT_CAPACITY,
            kc: KcConfig::default(),
            seed: 0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(invalid("cycles", "need at least one cycle"));
        }
        if self.warmup_probes < 2 {
            return Err(invalid("warmup_probes", "need at least two probes"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(invalid("jitter", "must be non-negative"));
        }
        if self.jitter_half_life == 0 {
            return Err(invalid("jitter_half_life", "must be at least one cycle"));
        }
        if self.hidden == 0 {
            return Err(invalid("hidden", "need at least one hidden neuron"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if self.buffer_capacity == 0 {
            return Err(invalid("buffer_capacity", "must be at least 1"));
        }
        self.estimator.validate()?;
        self.kc.validate()
    }

    /// Jitter half-width in effect at `cycle`.
    pub fn jitter_at(&self, cycle: usize) -> f64 {
        self.jitter * 0.5f64.powi((cycle / self.jitter_half_life) as i32)
    }
}

/// One warm-up measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmupProbe {
    pub tau: f64,
    pub rate: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Sensing time applied this cycle, seconds.
    pub tau_applied: f64,
    pub rate_measured: f64,
    pub phi_measured: f64,
    pub mse_after_training: f64,
    /// KC output (normalized) before jitter.
    pub kc_x: f64,
    pub kc_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub warmup: Vec<WarmupProbe>,
    pub records: Vec<CycleRecord>,
    /// KC output on the final learned surface, in seconds.
    pub tau_learned: f64,
    /// Throughput estimate at `tau_learned` over one estimation window.
    pub rate_learned: f64,
    pub network: MffNetwork,
}

impl AdaptiveOutcome {
    /// Spacing of the warm-up probe grid, seconds.
    pub fn warmup_spacing(&self) -> f64 {
        match self.warmup.as_slice() {
            [a, b, ..] => b.tau - a.tau,
            _ => 0.0,
        }
    }
}

/// Feasible interval (τ_min/T, 1) in normalized units.
pub fn feasible_bounds(scn: &Scenario) -> Result<(f64, f64)> {
    let tau_min = scn.tau_min();
    if !(tau_min < scn.slot_t) {
        return Err(Error::Infeasible {
            tau_min,
            slot_t: scn.slot_t,
        });
    }
    Ok((tau_min / scn.slot_t, 1.0))
}

/// Runs the loop with the default execution strategy.
pub fn run_adaptive(scn: &Scenario, cfg: &AdaptiveConfig) -> Result<AdaptiveOutcome> {
    run_adaptive_with(scn, cfg, Execution::default())
}

/// Runs the loop. The outcome depends only on `scn` and `cfg`, not on `exec`.
pub fn run_adaptive_with(
    scn: &Scenario,
    cfg: &AdaptiveConfig,
    exec: Execution,
) -> Result<AdaptiveOutcome> {
    scn.validate()?;
    cfg.validate()?;
    let (lo, hi) = feasible_bounds(scn)?;
    let clip = |x: f64| x.clamp(lo + EDGE_MARGIN, hi - EDGE_MARGIN);
    let t = scn.slot_t;

    let mut window = 0u64;
    let mut measure = |x: f64| -> Result<f64> {
        let sim = SlotSimulator::new(scn, x * t, cfg.estimator.decision_mode)?;
        let seed = derive_seed(cfg.seed, window);
        window += 1;
        Ok(batch_stats(&sim, cfg.estimator.t_ep_slots, seed, exec).mean_rate)
    };

    let mut init_rng = stream_rng(cfg.seed, 1);
    let mut train_rng = stream_rng(cfg.seed, 2);
    let mut jitter_rng = stream_rng(cfg.seed, 3);

    let mut net = MffNetwork::random(cfg.hidden, t, &mut init_rng)?;
    let mut buffer = TrainingBuffer::new(cfg.buffer_capacity)?;

    let mut warmup = Vec::with_capacity(cfg.warmup_probes);
    let step = (hi - lo) / (cfg.warmup_probes + 1) as f64;
    for i in 1..=cfg.warmup_probes {
        let x = lo + step * i as f64;
        let rate = measure(x)?;
        let phi = cost_from_rate(rate);
        buffer.push(x, phi);
        warmup.push(WarmupProbe {
            tau: x * t,
            rate,
            phi,
        });
    }
    let mut phi_ref = buffer.max_cost().expect("warm-up filled the buffer");
    net.set_reference_cost(phi_ref)?;
    train_step(
        &mut net,
        &buffer,
        cfg.learning_rate,
        cfg.pretrain_epochs,
        &mut train_rng,
    )?;

    let best = warmup
        .iter()
        .min_by(|a, b| a.phi.total_cmp(&b.phi))
        .expect("at least two probes");
    let mut x_prev = best.tau / t;

    let mut records = Vec::with_capacity(cfg.cycles);
    for cycle in 0..cfg.cycles {
        let state = run_to_convergence(x_prev, &net, (lo, hi), &cfg.kc)?;
        let x = clip(state.x);
        let j = cfg.jitter_at(cycle);
        let applied = if j > 0.0 {
            clip(x + rand::Rng::random_range(&mut jitter_rng, -j..=j))
        } else {
            x
        };
        let rate = measure(applied)?;
        let phi = cost_from_rate(rate);
        buffer.push(applied, phi);
        if phi > phi_ref {
            phi_ref = phi;
            net.set_reference_cost(phi_ref)?;
        }
        let mse = train_step(
            &mut net,
            &buffer,
            cfg.learning_rate,
            cfg.epochs_per_cycle,
            &mut train_rng,
        )?;
        records.push(CycleRecord {
            cycle,
            tau_applied: applied * t,
            rate_measured: rate,
            phi_measured: phi,
            mse_after_training: mse,
            kc_x: x,
            kc_converged: state.converged,
        });
        x_prev = x;
    }

    let final_x = clip(run_to_convergence(x_prev, &net, (lo, hi), &cfg.kc)?.x);
    let rate_learned = measure(final_x)?;
    Ok(AdaptiveOutcome {
        warmup,
        records,
        tau_learned: final_x * t,
        rate_learned,
        network: net,
    })
}

/// Per-cycle KC output, for convergence plots.
pub fn convergence_trace(records: &[CycleRecord]) -> Vec<(usize, f64)> {
    records.iter().map(|r| (r.cycle, r.kc_x)).collect()
}

/// Population standard deviation of the KC output over the last quarter of
/// the cycles (at least one cycle).
pub fn last_quartile_spread(records: &[CycleRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let n = (records.len() / 4).max(1);
    let tail = &records[records.len() - n..];
    // shifted by the first value so a constant tail gives exactly 0
    let d: Vec<f64> = tail.iter().map(|r| r.kc_x - tail[0].kc_x).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Writes cycle records as CSV:
/// `cycle,tau_applied,rate_measured,phi_measured,mse_after_training,kc_x,kc_converged`.
pub fn write_records<W: Write>(mut out: W, records: &[CycleRecord]) -> io::Result<()> {
    writeln!(
        out,
        "cycle,tau_applied,rate_measured,phi_measured,mse_after_training,kc_x,kc_converged"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.cycle,
            r.tau_applied,
            r.rate_measured,
            r.phi_measured,
            r.mse_after_training,
            r.kc_x,
            u8::from(r.kc_converged)
        )?;
    }
    Ok(())
}
