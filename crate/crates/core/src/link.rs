//! Analytic model of the secondary link under sequential handover.
//!
//! The secondary user senses channels 1, 2, … in list order. A busy
//! declaration costs a handover of `tau_ho` and moves to the next channel; a
//! free declaration starts transmission for the rest of the slot. The number
//! of handovers per slot is capped both by the slot budget and by the
//! channel count. Every quantity here is evaluated on the detector's
//! `pd = pd_min` curve, where the false-alarm probability depends on τ only.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{invalid, Error, Result};
use crate::exec::stream_rng;

/// Free probabilities P_{k,0} of the fifteen primary channels used in the
/// reference learning experiments.
pub const DEFAULT_P_FREE: [f64; 15] = [
    0.71, 0.46, 0.34, 0.72, 0.66, 0.72, 0.76, 0.35, 0.25, 0.70, 0.37, 0.23, 0.72, 0.24, 0.43,
];

/// Joint law of the secondary and primary SNRs at the secondary receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fading {
    /// SNRs fixed at `gamma_s`, `gamma_p`.
    #[default]
    None,
    /// Independent exponentially distributed SNRs. `samples` and `seed` fix
    /// the Monte Carlo average used whenever a deterministic mean rate is
    /// needed (optimization, sweeps).
    Rayleigh {
        mean_gamma_s: f64,
        mean_gamma_p: f64,
        #[serde(default = "default_fading_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_fading_samples() -> usize {
    200_000
}

/// How a channel list is extended when a scenario needs more channels than
/// were configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelExtension {
    #[default]
    Cyclic,
    RepeatLast,
}

/// Link capacities in bits/s/Hz when transmitting on a truly free channel
/// (`c0`) and on a channel the primary user occupies (`c1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub c0: f64,
    pub c1: f64,
}

/// C₀ = log₂(1 + γ_s), C₁ = log₂(1 + γ_s / (1 + γ_p)).
pub fn capacities(gamma_s: f64, gamma_p: f64) -> Capacities {
    Capacities {
        c0: (1.0 + gamma_s).log2(),
        c1: (1.0 + gamma_s / (1.0 + gamma_p)).log2(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Number of primary channels N_p.
    pub np: usize,
    /// Slot duration T in seconds.
    pub slot_t: f64,
    /// Handover time in seconds.
    pub tau_ho: f64,
    /// Free probability of each channel, in sensing order.
    pub p_free: Vec<f64>,
    pub gamma_s: f64,
    pub gamma_p: f64,
    pub fading: Fading,
    pub detector: DetectorConfig,
    pub extension: ChannelExtension,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            np: 15,
            slot_t: 0.1,
            tau_ho: 1e-4,
            p_free: DEFAULT_P_FREE.to_vec(),
            gamma_s: 100.0,
            gamma_p: 10.0,
            fading: Fading::None,
            detector: DetectorConfig::default(),
            extension: ChannelExtension::Cyclic,
        }
    }
}

/// Rate, handover cap and normalized consumed energy at one sensing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub tau: f64,
    /// Average throughput in bits/s/Hz.
    pub rate: f64,
    /// Handover cap the rate was evaluated with.
    pub alpha: usize,
    /// Average number of sensed channels, 1 + ḡ.
    pub nce: f64,
}

impl Scenario {
    /// Scenario with `np` channels whose free probabilities are `p_free`
    /// extended per `extension`. Everything else takes the reference values.
    pub fn with_channels(np: usize, p_free: &[f64]) -> Result<Self> {
        let base = Self {
            p_free: p_free.to_vec(),
            np: p_free.len(),
            ..Self::default()
        };
        let scn = base.with_channel_count(np);
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.np == 0 {
            return Err(invalid("np", "need at least one primary channel"));
        }
        if self.p_free.len() != self.np {
            return Err(invalid(
                "p_free",
                format!("has {} entries for {} channels", self.p_free.len(), self.np),
            ));
        }
        if let Some(p) = self.p_free.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid("p_free", format!("{p} is not a probability")));
        }
        if !(self.slot_t > 0.0 && self.slot_t.is_finite()) {
            return Err(invalid("slot_t", "must be positive and finite"));
        }
        if !(self.tau_ho > 0.0 && self.tau_ho < self.slot_t) {
            return Err(invalid("tau_ho", "must lie in (0, slot_t)"));
        }
        if !(self.gamma_s > 0.0 && self.gamma_s.is_finite()) {
            return Err(invalid("gamma_s", "must be positive"));
        }
        if !(self.gamma_p >= 0.0 && self.gamma_p.is_finite()) {
            return Err(invalid("gamma_p", "must be non-negative"));
        }
        if let Fading::Rayleigh {
            mean_gamma_s,
            mean_gamma_p,
            samples,
            ..
        } = self.fading
        {
            if !(mean_gamma_s > 0.0 && mean_gamma_s.is_finite()) {
                return Err(invalid("mean_gamma_s", "must be positive"));
            }
            if !(mean_gamma_p >= 0.0 && mean_gamma_p.is_finite()) {
                return Err(invalid("mean_gamma_p", "must be non-negative"));
            }
            if samples == 0 {
                return Err(invalid("samples", "need at least one fading sample"));
            }
        }
        Ok(())
    }

    /// Copy of the scenario with `n` channels: the list is truncated or
    /// extended per the configured extension rule.
    pub fn with_channel_count(&self, n: usize) -> Scenario {
        let mut p_free: Vec<f64> = self.p_free.iter().copied().take(n).collect();
        if !self.p_free.is_empty() {
            while p_free.len() < n {
                let next = match self.extension {
                    ChannelExtension::Cyclic => self.p_free[p_free.len() % self.p_free.len()],
                    ChannelExtension::RepeatLast => self.p_free[self.p_free.len() - 1],
                };
                p_free.push(next);
            }
        }
        Scenario {
            np: n,
            p_free,
            ..self.clone()
        }
    }

    pub fn tau_min(&self) -> f64 {
        self.detector.tau_min()
    }

    /// Capacities at the configured (non-faded) SNRs.
    pub fn capacities(&self) -> Capacities {
        capacities(self.gamma_s, self.gamma_p)
    }

    /// Capacities averaged over the fading law. With `Fading::None` these
    /// are exact; with Rayleigh fading they are a seeded Monte Carlo mean.
    /// The rate is linear in (C₀, C₁) and the sensing statistics do not depend
    /// on the link SNRs, so the mean rate is the rate at mean capacities.
    pub fn mean_capacities(&self) -> Capacities {
        match self.fading {
            Fading::None => self.capacities(),
            Fading::Rayleigh { samples, seed, .. } => {
                let mut rng = stream_rng(seed, 0);
                self.draw_mean_capacities(samples, &mut rng)
            }
        }
    }

    fn draw_mean_capacities<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Capacities {
        let (mut s0, mut s1) = (0.0, 0.0);
        for _ in 0..samples {
            let c = self.draw_capacities(rng);
            s0 += c.c0;
            s1 += c.c1;
        }
        Capacities {
            c0: s0 / samples as f64,
            c1: s1 / samples as f64,
        }
    }

    /// One fading realization of the capacities.
    pub fn draw_capacities<R: Rng + ?Sized>(&self, rng: &mut R) -> Capacities {
        match self.fading {
            Fading::None => self.capacities(),
            Fading::Rayleigh {
                mean_gamma_s,
                mean_gamma_p,
                ..
            } => {
                let gs = draw_exponential(mean_gamma_s, rng);
                let gp = draw_exponential(mean_gamma_p, rng);
                capacities(gs, gp)
            }
        }
    }

    /// Occupation probability q_k = P_fa·P_{k,0} + P_d·P_{k,1} of channel
    /// `k` (1-based).
    pub fn busy_prob(&self, k: usize, pfa: f64, pd: f64) -> Result<f64> {
        if k == 0 || k > self.np {
            return Err(Error::ChannelIndex { k, np: self.np });
        }
        Ok(occupation(self.p_free[k - 1], pfa, pd))
    }

    /// Handover cap α = min(⌊(T − τ)/(τ + τ_ho)⌋, N_p − 1).
    pub fn max_handover(&self, tau: f64) -> Result<usize> {
        self.check_tau(tau)?;
        Ok(self.alpha_unchecked(tau))
    }

    /// Handovers the slot budget alone allows, ⌊(T − τ)/(τ + τ_ho)⌋.
    pub fn slot_handover_limit(&self, tau: f64) -> usize {
        let v = ((self.slot_t - tau) / (tau + self.tau_ho)).floor();
        if v > 0.0 {
            v as usize
        } else {
            0
        }
    }

    pub(crate) fn alpha_unchecked(&self, tau: f64) -> usize {
        self.slot_handover_limit(tau).min(self.np - 1)
    }

    /// Fraction of the slot left for transmission after `m` handovers.
    pub fn time_factor(&self, tau: f64, m: usize) -> f64 {
        1.0 - (tau + m as f64 * (tau + self.tau_ho)) / self.slot_t
    }

    /// Sensing times at which the slot-budget handover limit changes,
    /// τ_a = (T − a·τ_ho)/(a + 1), restricted to the open interval (lo, hi)
    /// and returned in increasing order.
    pub fn handover_breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = Vec::new();
        for a in 0.. {
            let t = (self.slot_t - a as f64 * self.tau_ho) / (a as f64 + 1.0);
            if t <= lo {
                break;
            }
            if t < hi {
                pts.push(t);
            }
        }
        pts.reverse();
        pts
    }

    /// Average throughput at the `pd = pd_min` operating point,
    /// summed up to the handover cap or to `cap_override`.
    pub fn throughput(&self, tau: f64, cap_override: Option<usize>) -> Result<ThroughputPoint> {
        let cap = self.resolve_cap(tau, cap_override)?;
        Ok(self.evaluate(tau, self.capacities(), cap))
    }

    /// Throughput averaged over the fading law by `mc_samples` draws from
    /// `rng`. Without fading this is exactly [`Scenario::throughput`].
    pub fn faded_throughput<R: Rng + ?Sized>(
        &self,
        tau: f64,
        cap_override: Option<usize>,
        mc_samples: usize,
        rng: &mut R,
    ) -> Result<ThroughputPoint> {
        let cap = self.resolve_cap(tau, cap_override)?;
        if mc_samples == 0 {
            return Err(invalid("mc_samples", "need at least one sample"));
        }
        let caps = match self.fading {
            Fading::None => self.capacities(),
            Fading::Rayleigh { .. } => self.draw_mean_capacities(mc_samples, rng),
        };
        Ok(self.evaluate(tau, caps, cap))
    }

    /// Average number of sensed channels, 1 + ḡ.
    pub fn avg_sensed_channels(&self, tau: f64, cap_override: Option<usize>) -> Result<f64> {
        let cap = self.resolve_cap(tau, cap_override)?;
        let pfa = self.detector.pfa_constrained(tau);
        Ok(self.sensed_channels_unchecked(pfa, self.detector.pd_min, cap))
    }

    /// Average energy spent finding a transmission opportunity under a
    /// linear power model: sensing at `p_sense` watts, handing over at
    /// `p_ho` watts.
    pub fn consumed_energy(
        &self,
        tau: f64,
        p_sense: f64,
        p_ho: f64,
        cap_override: Option<usize>,
    ) -> Result<f64> {
        if !(p_sense > 0.0) {
            return Err(invalid("p_sense", "must be positive"));
        }
        if !(p_ho >= 0.0) {
            return Err(invalid("p_ho", "must be non-negative"));
        }
        let sensed = self.avg_sensed_channels(tau, cap_override)?;
        let handovers = sensed - 1.0;
        Ok(sensed * p_sense * tau + handovers * p_ho * self.tau_ho)
    }

    /// Smallest channel count at which the channel count never limits the
    /// handover cap on the feasible interval (τ_min, T).
    pub fn np_saturation_threshold(&self) -> usize {
        let tau_min = self.tau_min();
        let v = ((self.slot_t - tau_min) / (tau_min + self.tau_ho)).floor();
        if v > 0.0 {
            v as usize + 1
        } else {
            1
        }
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if tau > 0.0 && tau < self.slot_t {
            Ok(())
        } else {
            Err(Error::SensingTimeOutOfRange {
                tau,
                slot_t: self.slot_t,
            })
        }
    }

    fn resolve_cap(&self, tau: f64, cap_override: Option<usize>) -> Result<usize> {
        let alpha = self.max_handover(tau)?;
        match cap_override {
            Some(cap) if cap > alpha => Err(Error::CapExceeded { cap, alpha }),
            Some(cap) => Ok(cap),
            None => Ok(alpha),
        }
    }

    /// Rate and sensed-channel count with handovers capped at
    /// `min(cap, α(τ))`. No range checks; used by the optimizers, which
    /// search a capped objective over the whole interval.
    pub(crate) fn evaluate_capped(
        &self,
        tau: f64,
        caps: Capacities,
        cap: Option<usize>,
    ) -> ThroughputPoint {
        let alpha = self.alpha_unchecked(tau);
        let cap = cap.map_or(alpha, |c| c.min(alpha));
        self.evaluate(tau, caps, cap)
    }

    pub(crate) fn evaluate(&self, tau: f64, caps: Capacities, cap: usize) -> ThroughputPoint {
        let pfa = self.detector.pfa_constrained(tau);
        let pd = self.detector.pd_min;
        ThroughputPoint {
            tau,
            rate: self.rate_unchecked(tau, pfa, pd, caps, cap),
            alpha: cap,
            nce: self.sensed_channels_unchecked(pfa, pd, cap),
        }
    }

    /// Σ_{m=0}^{cap} A_m·B_m with A_m the per-channel expected capacity and
    /// B_m the probability of reaching channel m+1 times its time factor.
    pub(crate) fn rate_unchecked(
        &self,
        tau: f64,
        pfa: f64,
        pd: f64,
        caps: Capacities,
        cap: usize,
    ) -> f64 {
        let mut reach = 1.0;
        let mut rate = 0.0;
        for m in 0..=cap {
            let p0 = self.p_free[m];
            let p1 = 1.0 - p0;
            let a = caps.c1 * p1 * (1.0 - pd) + caps.c0 * p0 * (1.0 - pfa);
            let b = reach * self.time_factor(tau, m).max(0.0);
            rate += a * b;
            reach *= occupation(p0, pfa, pd);
        }
        rate
    }

    /// 1 + ḡ for a cap of `cap` handovers: the (cap + 1)-th channel is
    /// sensed whenever the first `cap` are all declared busy.
    pub(crate) fn sensed_channels_unchecked(&self, pfa: f64, pd: f64, cap: usize) -> f64 {
        let mut reach = 1.0;
        let mut total = 1.0;
        for m in 1..=cap {
            reach *= occupation(self.p_free[m - 1], pfa, pd);
            total += reach;
        }
        total
    }
}

fn occupation(p_free: f64, pfa: f64, pd: f64) -> f64 {
    pfa * p_free + pd * (1.0 - p_free)
}

fn draw_exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean > 0.0 {
        Exp::new(1.0 / mean).expect("positive rate").sample(rng)
    } else {
        0.0
    }
}
