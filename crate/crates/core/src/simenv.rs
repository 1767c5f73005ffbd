//! Slot-level Monte Carlo simulation of the secondary link.
//!
//! Each slot redraws the primary channel states independently. The secondary
//! user senses channels in list order, handing over on every busy
//! declaration until the handover cap α(τ) is spent, and transmits on the
//! first channel declared idle for the rest of the slot. The windowed mean of
//! the achieved rate is the throughput estimator the learning loop sees.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{ed_decide, Decision, EnergySampler, Hypothesis};
use crate::error::{invalid, Error, Result};
use crate::exec::{shard_sizes, stream_rng, Execution};
use crate::link::{Capacities, Fading, Scenario};

/// How sensing outcomes are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionMode {
    /// Bernoulli draws with the closed-form P_fa and P_d.
    #[default]
    ClosedForm,
    /// A full energy-detector run per sensing operation.
    SampleLevel {
        #[serde(default)]
        sampler: EnergySampler,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Estimation window T_ep, in slots.
    pub t_ep_slots: usize,
    pub decision_mode: DecisionMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            t_ep_slots: 100,
            decision_mode: DecisionMode::ClosedForm,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_ep_slots == 0 {
            return Err(invalid("t_ep_slots", "window needs at least one slot"));
        }
        Ok(())
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub handovers: usize,
    pub transmitted: bool,
    /// 1-based index of the channel used for transmission.
    pub channel_used: Option<usize>,
    pub true_state_of_used: Option<Hypothesis>,
    /// Achieved rate including the fraction of the slot left to transmit.
    pub rate_achieved: f64,
    pub channels_sensed: usize,
}

/// Per-τ precomputation for repeated slot draws.
#[derive(Debug, Clone)]
pub struct SlotSimulator<'a> {
    scn: &'a Scenario,
    tau: f64,
    alpha: usize,
    pfa: f64,
    pd: f64,
    lambda: f64,
    caps: Capacities,
    mode: DecisionMode,
}

impl<'a> SlotSimulator<'a> {
    pub fn new(scn: &'a Scenario, tau: f64, mode: DecisionMode) -> Result<Self> {
        let alpha = scn.max_handover(tau)?;
        let op = scn.detector.operating_point(tau)?;
        if matches!(mode, DecisionMode::SampleLevel { .. }) && scn.detector.sample_count(tau) == 0 {
            return Err(Error::NoSamples);
        }
        Ok(Self {
            scn,
            tau,
            alpha,
            pfa: scn.detector.pfa_constrained(tau),
            pd: scn.detector.pd_min,
            lambda: op.lambda,
            caps: scn.capacities(),
            mode,
        })
    }

    /// Overrides the detector probabilities used in closed-form mode.
    pub fn with_probabilities(mut self, pfa: f64, pd: f64) -> Self {
        self.pfa = pfa;
        self.pd = pd;
        self
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn run_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> SlotTrace {
        let caps = match self.scn.fading {
            Fading::None => self.caps,
            Fading::Rayleigh { .. } => self.scn.draw_capacities(rng),
        };
        for m in 0..=self.alpha {
            let truth = if rng.random::<f64>() < self.scn.p_free[m] {
                Hypothesis::Free
            } else {
                Hypothesis::Busy
            };
            if self.sense(truth, rng) == Decision::Idle {
                let c = match truth {
                    Hypothesis::Free => caps.c0,
                    Hypothesis::Busy => caps.c1,
                };
                return SlotTrace {
                    handovers: m,
                    transmitted: true,
                    channel_used: Some(m + 1),
                    true_state_of_used: Some(truth),
                    rate_achieved: c * self.scn.time_factor(self.tau, m).max(0.0),
                    channels_sensed: m + 1,
                };
            }
        }
        SlotTrace {
            handovers: self.alpha,
            transmitted: false,
            channel_used: None,
            true_state_of_used: None,
            rate_achieved: 0.0,
            channels_sensed: self.alpha + 1,
        }
    }

    fn sense<R: Rng + ?Sized>(&self, truth: Hypothesis, rng: &mut R) -> Decision {
        match self.mode {
            DecisionMode::ClosedForm => {
                let p_busy = match truth {
                    Hypothesis::Free => self.pfa,
                    Hypothesis::Busy => self.pd,
                };
                if rng.random::<f64>() < p_busy {
                    Decision::Busy
                } else {
                    Decision::Idle
                }
            }
            DecisionMode::SampleLevel { sampler } => ed_decide(
                &self.scn.detector,
                self.tau,
                self.lambda,
                truth,
                sampler,
                rng,
            )
            .expect("sample count checked at construction"),
        }
    }

    /// Accumulates `slots` slots drawn from `rng`.
    pub fn accumulate<R: Rng + ?Sized>(&self, slots: usize, rng: &mut R) -> SlotStats {
        let mut stats = SlotStats::default();
        for _ in 0..slots {
            stats.push(&self.run_slot(rng));
        }
        stats
    }
}

/// Simulates one slot at sensing time `tau`.
pub fn run_slot<R: Rng + ?Sized>(
    scn: &Scenario,
    tau: f64,
    mode: DecisionMode,
    rng: &mut R,
) -> Result<SlotTrace> {
    Ok(SlotSimulator::new(scn, tau, mode)?.run_slot(rng))
}

/// Mean achieved rate over `est.t_ep_slots` consecutive slots.
pub fn estimate_throughput<R: Rng + ?Sized>(
    scn: &Scenario,
    tau: f64,
    est: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64> {
    est.validate()?;
    let sim = SlotSimulator::new(scn, tau, est.decision_mode)?;
    Ok(sim.accumulate(est.t_ep_slots, rng).mean_rate)
}

/// Mean number of channels sensed per slot over `slots` slots.
pub fn empirical_sensed_channels<R: Rng + ?Sized>(
    scn: &Scenario,
    tau: f64,
    slots: usize,
    rng: &mut R,
) -> Result<f64> {
    if slots == 0 {
        return Err(invalid("slots", "need at least one slot"));
    }
    let sim = SlotSimulator::new(scn, tau, DecisionMode::ClosedForm)?;
    Ok(sim.accumulate(slots, rng).mean_sensed)
}

/// Running first and second moments of the per-slot rate and sensed-channel
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotStats {
    pub slots: u64,
    pub transmissions: u64,
    pub mean_rate: f64,
    m2_rate: f64,
    pub mean_sensed: f64,
    m2_sensed: f64,
}

impl SlotStats {
    pub fn push(&mut self, t: &SlotTrace) {
        self.slots += 1;
        self.transmissions += u64::from(t.transmitted);
        let n = self.slots as f64;
        let d = t.rate_achieved - self.mean_rate;
        self.mean_rate += d / n;
        self.m2_rate += d * (t.rate_achieved - self.mean_rate);
        let s = t.channels_sensed as f64;
        let d = s - self.mean_sensed;
        self.mean_sensed += d / n;
        self.m2_sensed += d * (s - self.mean_sensed);
    }

    /// Combines two disjoint batches (Chan et al. pairwise update).
    pub fn merge(&self, other: &SlotStats) -> SlotStats {
        if self.slots == 0 {
            return *other;
        }
        if other.slots == 0 {
            return *self;
        }
        let (na, nb) = (self.slots as f64, other.slots as f64);
        let n = na + nb;
        let dr = other.mean_rate - self.mean_rate;
        let ds = other.mean_sensed - self.mean_sensed;
        SlotStats {
            slots: self.slots + other.slots,
            transmissions: self.transmissions + other.transmissions,
            mean_rate: self.mean_rate + dr * nb / n,
            m2_rate: self.m2_rate + other.m2_rate + dr * dr * na * nb / n,
            mean_sensed: self.mean_sensed + ds * nb / n,
            m2_sensed: self.m2_sensed + other.m2_sensed + ds * ds * na * nb / n,
        }
    }

    pub fn var_rate(&self) -> f64 {
        sample_variance(self.m2_rate, self.slots)
    }

    pub fn var_sensed(&self) -> f64 {
        sample_variance(self.m2_sensed, self.slots)
    }

    pub fn std_error_rate(&self) -> f64 {
        (self.var_rate() / self.slots as f64).sqrt()
    }

    pub fn std_error_sensed(&self) -> f64 {
        (self.var_sensed() / self.slots as f64).sqrt()
    }
}

fn sample_variance(m2: f64, n: u64) -> f64 {
    if n > 1 {
        m2 / (n - 1) as f64
    } else {
        0.0
    }
}

/// Slots per shard in batch simulation.
pub const SHARD_SLOTS: usize = 8192;

/// Simulates `slots` slots split into fixed shards, each on its own stream
/// of `seed`. The result depends only on (`seed`, `slots`), not on `exec`.
pub fn simulate_batch(
    scn: &Scenario,
    tau: f64,
    mode: DecisionMode,
    slots: usize,
    seed: u64,
    exec: Execution,
) -> Result<SlotStats> {
    let sim = SlotSimulator::new(scn, tau, mode)?;
    Ok(batch_stats(&sim, slots, seed, exec))
}

pub(crate) fn batch_stats(
    sim: &SlotSimulator<'_>,
    slots: usize,
    seed: u64,
    exec: Execution,
) -> SlotStats {
    let shards = shard_sizes(slots, SHARD_SLOTS);
    let parts = exec.map_indices(shards.len(), |i| {
        let mut rng = stream_rng(seed, i as u64);
        sim.accumulate(shards[i], &mut rng)
    });
    parts
        .iter()
        .fold(SlotStats::default(), |acc, p| acc.merge(p))
}

/// Writes slot traces as CSV: `slot,m,transmitted,channel,true_state,rate`.
/// `channel` and `true_state` are empty for slots without transmission.
pub fn write_trace<W: Write>(mut out: W, traces: &[SlotTrace]) -> io::Result<()> {
    writeln!(out, "slot,m,transmitted,channel,true_state,rate")?;
    for (i, t) in traces.iter().enumerate() {
        let channel = t.channel_used.map(|c| c.to_string()).unwrap_or_default();
        let state = t.true_state_of_used.map(Hypothesis::as_str).unwrap_or("");
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i,
            t.handovers,
            u8::from(t.transmitted),
            channel,
            state,
            t.rate_achieved
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorConfig;
    use crate::link::DEFAULT_P_FREE;

    fn scn(np: usize, p: &[f64]) -> Scenario {
        Scenario::with_channels(np, p).unwrap()
    }

    #[test]
    fn perfect_detector_all_free() {
        let s = scn(3, &[1.0]);
        let sim = SlotSimulator::new(&s, 0.02, DecisionMode::ClosedForm)
            .unwrap()
            .with_probabilities(0.0, 1.0);
        let mut rng = stream_rng(1, 0);
        let want = s.capacities().c0 * (1.0 - 0.02 / s.slot_t);
        for _ in 0..200 {
            let t = sim.run_slot(&mut rng);
            assert!(t.transmitted);
            assert_eq!(t.channel_used, Some(1));
            assert_eq!(t.rate_achieved, want);
        }
    }

    #[test]
    fn always_busy_never_transmits() {
        let s = scn(15, &DEFAULT_P_FREE);
        let sim = SlotSimulator::new(&s, 0.012, DecisionMode::ClosedForm)
            .unwrap()
            .with_probabilities(1.0, 1.0);
        let mut rng = stream_rng(2, 0);
        for _ in 0..200 {
            let t = sim.run_slot(&mut rng);
            assert!(!t.transmitted);
            assert_eq!(t.rate_achieved, 0.0);
            assert_eq!(t.channels_sensed, sim.alpha() + 1);
        }
    }

    #[test]
    fn trace_invariants() {
        let s = scn(15, &DEFAULT_P_FREE);
        let tau = 0.012;
        let sim = SlotSimulator::new(&s, tau, DecisionMode::ClosedForm).unwrap();
        let caps = s.capacities();
        let mut rng = stream_rng(3, 0);
        for _ in 0..20_000 {
            let t = sim.run_slot(&mut rng);
            assert_eq!(t.channels_sensed, t.handovers + 1);
            assert!(t.handovers <= sim.alpha());
            if t.transmitted {
                assert_eq!(t.channel_used, Some(t.handovers + 1));
                let factor = s.time_factor(tau, t.handovers);
                let c = match t.true_state_of_used.unwrap() {
                    Hypothesis::Free => caps.c0,
                    Hypothesis::Busy => caps.c1,
                };
                assert_eq!(t.rate_achieved, c * factor);
            } else {
                assert_eq!(t.rate_achieved, 0.0);
                assert!(t.channel_used.is_none());
            }
        }
    }

    #[test]
    fn estimator_windows() {
        let s = scn(1, &[1.0]);
        let mut det = s.clone();
        det.detector = DetectorConfig::new(6e6, 0.999_999_999, 1e-12, 50.0).unwrap();
        let mut rng = stream_rng(4, 0);
        for w in [1, 7, 100] {
            let est = EstimatorConfig {
                t_ep_slots: w,
                ..Default::default()
            };
            let r = estimate_throughput(&det, 0.01, &est, &mut rng).unwrap();
            let want = det.capacities().c0 * 0.9;
            assert!((r - want).abs() < 1e-12);
        }
        let bad = EstimatorConfig {
            t_ep_slots: 0,
            ..Default::default()
        };
        assert!(estimate_throughput(&s, 0.01, &bad, &mut rng).is_err());
    }

    #[test]
    fn single_slot_window_is_one_slot() {
        let s = scn(5, &DEFAULT_P_FREE);
        let est = EstimatorConfig {
            t_ep_slots: 1,
            ..Default::default()
        };
        let r = estimate_throughput(&s, 0.015, &est, &mut stream_rng(5, 0)).unwrap();
        let t = run_slot(&s, 0.015, DecisionMode::ClosedForm, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(r, t.rate_achieved);
    }

    #[test]
    fn no_handover_means_one_sensed_channel() {
        let s = scn(5, &DEFAULT_P_FREE);
        // τ = 60 ms leaves no room for a handover
        let m = empirical_sensed_channels(&s, 0.06, 1000, &mut stream_rng(6, 0)).unwrap();
        assert_eq!(m, 1.0);
        assert!(empirical_sensed_channels(&s, 0.06, 0, &mut stream_rng(6, 0)).is_err());
    }

    #[test]
    fn batches_are_deterministic_and_strategy_free() {
        let s = scn(5, &DEFAULT_P_FREE);
        let a = simulate_batch(
            &s,
            0.015,
            DecisionMode::ClosedForm,
            30_000,
            42,
            Execution::Sequential,
        )
        .unwrap();
        let b = simulate_batch(
            &s,
            0.015,
            DecisionMode::ClosedForm,
            30_000,
            42,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.slots, 30_000);
        let c = simulate_batch(
            &s,
            0.015,
            DecisionMode::ClosedForm,
            30_000,
            43,
            Execution::Sequential,
        )
        .unwrap();
        assert_ne!(a.mean_rate, c.mean_rate);
    }

    #[test]
    fn merge_matches_single_pass() {
        let s = scn(4, &DEFAULT_P_FREE);
        let sim = SlotSimulator::new(&s, 0.013, DecisionMode::ClosedForm).unwrap();
        let traces: Vec<SlotTrace> = {
            let mut rng = stream_rng(8, 0);
            (0..5000).map(|_| sim.run_slot(&mut rng)).collect()
        };
        let mut whole = SlotStats::default();
        traces.iter().for_each(|t| whole.push(t));
        let mut a = SlotStats::default();
        let mut b = SlotStats::default();
        traces[..1234].iter().for_each(|t| a.push(t));
        traces[1234..].iter().for_each(|t| b.push(t));
        let merged = a.merge(&b);
        assert_eq!(merged.slots, whole.slots);
        assert!((merged.mean_rate - whole.mean_rate).abs() < 1e-12);
        assert!((merged.var_rate() - whole.var_rate()).abs() < 1e-9);
        assert!((merged.mean_sensed - whole.mean_sensed).abs() < 1e-12);
    }

    #[test]
    fn trace_format() {
        let traces = [
            SlotTrace {
                handovers: 1,
                transmitted: true,
                channel_used: Some(2),
                true_state_of_used: Some(Hypothesis::Busy),
                rate_achieved: 0.5,
                channels_sensed: 2,
            },
            SlotTrace {
                handovers: 3,
                transmitted: false,
                channel_used: None,
                true_state_of_used: None,
                rate_achieved: 0.0,
                channels_sensed: 4,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &traces).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "slot,m,transmitted,channel,true_state,rate\n0,1,1,2,busy,0.5\n1,3,0,,,0\n"
        );
    }
}
