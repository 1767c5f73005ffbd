//! Energy detection: closed-form false-alarm and detection probabilities
//! under the large-N Gaussian approximation, the operating point that pins
//! the detection probability at its floor, and a sample-level detector used
//! to check the approximation.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qfunc::{gaussian_tail, gaussian_tail_inverse};

/// True state of a primary channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// H0: the channel is idle.
    Free,
    /// H1: the primary user is transmitting.
    Busy,
}

impl Hypothesis {
    pub fn as_str(self) -> &'static str {
        match self {
            Hypothesis::Free => "free",
            Hypothesis::Busy => "busy",
        }
    }
}

/// Outcome of one sensing operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Idle,
    Busy,
}

/// How `ed_decide` produces the energy statistic X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySampler {
    /// Draw all N complex samples and sum their energies.
    PerSample,
    /// Draw X from its exact law. With circularly symmetric Gaussian noise
    /// and signal, |y(n)|² is exponential, so X is Gamma(N, per-sample power).
    #[default]
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Sampling frequency in Hz.
    pub fs: f64,
    pub pd_min: f64,
    pub pfa_max: f64,
    /// Sensing SNR σ_u² / σ_z² (linear).
    pub gamma: f64,
    /// Noise variance σ_z².
    pub sigma_z2: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            fs: 6e6,
            pd_min: 0.9,
            pfa_max: 0.1,
            gamma: 0.01,
            sigma_z2: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn new(fs: f64, pd_min: f64, pfa_max: f64, gamma: f64) -> Result<Self> {
        let cfg = Self {
            fs,
            pd_min,
            pfa_max,
            gamma,
            sigma_z2: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_noise_variance(mut self, sigma_z2: f64) -> Result<Self> {
        self.sigma_z2 = sigma_z2;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |p: f64| p > 0.0 && p < 1.0;
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(invalid("fs", "must be positive and finite"));
        }
        if !open_unit(self.pd_min) {
            return Err(invalid("pd_min", "must lie in (0, 1)"));
        }
        if !open_unit(self.pfa_max) {
            return Err(invalid("pfa_max", "must lie in (0, 1)"));
        }
        if self.pd_min <= self.pfa_max {
            return Err(invalid("pd_min", "must exceed pfa_max"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be positive and finite"));
        }
        if !(self.sigma_z2 > 0.0 && self.sigma_z2.is_finite()) {
            return Err(invalid("sigma_z2", "must be positive and finite"));
        }
        Ok(())
    }

    /// β = Q⁻¹(P_d^min)·√(1 + 2γ).
    pub fn beta(&self) -> f64 {
        inverse_tail(self.pd_min) * (1.0 + 2.0 * self.gamma).sqrt()
    }

    /// Number of samples N = round(τ·f_s).
    pub fn sample_count(&self, tau: f64) -> usize {
        (tau * self.fs).round().max(0.0) as usize
    }

    /// False-alarm probability at threshold `lambda`.
    pub fn pfa(&self, tau: f64, lambda: f64) -> f64 {
        gaussian_tail((lambda / self.sigma_z2 - 1.0) * (tau * self.fs).sqrt())
    }

    /// Detection probability at threshold `lambda`.
    pub fn pd(&self, tau: f64, lambda: f64) -> f64 {
        let g = self.gamma;
        gaussian_tail((lambda / self.sigma_z2 - 1.0 - g) * (tau * self.fs / (1.0 + 2.0 * g)).sqrt())
    }

    /// Threshold that makes `pd(tau, λ) = pd_min`.
    pub fn lambda_for_pd_min(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let g = self.gamma;
        let z = inverse_tail(self.pd_min);
        Ok(self.sigma_z2 * (1.0 + g + z * ((1.0 + 2.0 * g) / (tau * self.fs)).sqrt()))
    }

    /// False-alarm probability with the detection probability held at
    /// `pd_min`: Q(β + γ√(τ f_s)).
    pub fn pfa_constrained(&self, tau: f64) -> f64 {
        gaussian_tail(self.beta() + self.gamma * (tau * self.fs).sqrt())
    }

    /// Shortest sensing time meeting `pfa_max` at `pd_min`.
    pub fn tau_min(&self) -> f64 {
        let s = (inverse_tail(self.pfa_max) - self.beta()) / self.gamma;
        s * s / self.fs
    }

    /// Operating point on the `pd = pd_min` curve.
    pub fn operating_point(&self, tau: f64) -> Result<OperatingPoint> {
        let lambda = self.lambda_for_pd_min(tau)?;
        Ok(OperatingPoint {
            tau,
            lambda,
            pfa: self.pfa(tau, lambda),
            pd: self.pd(tau, lambda),
        })
    }
}

/// A (τ, λ) pair with its induced error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub tau: f64,
    pub lambda: f64,
    pub pfa: f64,
    pub pd: f64,
}

impl OperatingPoint {
    pub fn at(cfg: &DetectorConfig, tau: f64, lambda: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(lambda > 0.0) {
            return Err(invalid("lambda", "must be positive"));
        }
        Ok(Self {
            tau,
            lambda,
            pfa: cfg.pfa(tau, lambda),
            pd: cfg.pd(tau, lambda),
        })
    }
}

/// Runs one energy-detection test over N = round(τ f_s) samples of a channel
/// in state `truth`. The energy X is compared with N·λ.
pub fn ed_decide<R: Rng + ?Sized>(
    cfg: &DetectorConfig,
    tau: f64,
    lambda: f64,
    truth: Hypothesis,
    sampler: EnergySampler,
    rng: &mut R,
) -> Result<Decision> {
    let n = cfg.sample_count(tau);
    if n == 0 {
        return Err(Error::NoSamples);
    }
    let x = energy_statistic(cfg, n, truth, sampler, rng);
    Ok(if x >= n as f64 * lambda {
        Decision::Busy
    } else {
        Decision::Idle
    })
}

/// X = Σ|y(n)|² over `n` samples.
pub fn energy_statistic<R: Rng + ?Sized>(
    cfg: &DetectorConfig,
    n: usize,
    truth: Hypothesis,
    sampler: EnergySampler,
    rng: &mut R,
) -> f64 {
    let signal_power = match truth {
        Hypothesis::Free => 0.0,
        Hypothesis::Busy => cfg.gamma * cfg.sigma_z2,
    };
    match sampler {
        EnergySampler::PerSample => {
            // per-dimension standard deviations of the complex Gaussians
            let sz = (cfg.sigma_z2 / 2.0).sqrt();
            let su = (signal_power / 2.0).sqrt();
            let mut x = 0.0;
            for _ in 0..n {
                let z_re: f64 = rng.sample(StandardNormal);
                let z_im: f64 = rng.sample(StandardNormal);
                let (mut re, mut im) = (sz * z_re, sz * z_im);
                if signal_power > 0.0 {
                    let u_re: f64 = rng.sample(StandardNormal);
                    let u_im: f64 = rng.sample(StandardNormal);
                    re += su * u_re;
                    im += su * u_im;
                }
                x += re * re + im * im;
            }
            x
        }
        EnergySampler::Aggregate => {
            let scale = cfg.sigma_z2 + signal_power;
            // shape and scale are positive by construction
            Gamma::new(n as f64, scale)
                .expect("positive gamma parameters")
                .sample(rng)
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid("tau", "sensing time must be positive"))
    }
}

// Validated configs keep pd_min and pfa_max inside (0, 1).
fn inverse_tail(p: f64) -> f64 {
    gaussian_tail_inverse(p).expect("probability validated at construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream_rng;

    fn table1() -> DetectorConfig {
        DetectorConfig::new(6e6, 0.9, 0.1, 0.01).unwrap()
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(DetectorConfig::new(6e6, 0.1, 0.1, 0.01).is_err());
        assert!(DetectorConfig::new(6e6, 0.05, 0.1, 0.01).is_err());
        assert!(DetectorConfig::new(0.0, 0.9, 0.1, 0.01).is_err());
        assert!(DetectorConfig::new(6e6, 1.0, 0.1, 0.01).is_err());
        assert!(DetectorConfig::new(6e6, 0.9, 0.1, 0.0).is_err());
        assert!(table1().with_noise_variance(-1.0).is_err());
    }

    #[test]
    fn pfa_closed_form() {
        let cfg = table1();
        assert_eq!(cfg.pfa(0.003, 1.0), 0.5);
        assert!(cfg.pfa(0.01, 1e9) < 1e-300);
        assert!(cfg.pfa(0.01, 1e-9) > 1.0 - 1e-12);
        // Q(0.02 * sqrt(6000)) = Q(1.549193...)
        assert!((cfg.pfa(1e-3, 1.02) - 0.060_667_625_179).abs() < 1e-10);
    }

    #[test]
    fn pd_closed_form() {
        let cfg = table1();
        assert!((cfg.pd(0.004, 1.01) - 0.5).abs() < 1e-15);
        assert!((cfg.pd(0.01, 1.005) - 0.887_373_546_820).abs() < 1e-10);
        let mut last = 0.0;
        for ms in [1.0, 5.0, 20.0, 80.0] {
            let pd = cfg.pd(ms * 1e-3, 1.005);
            assert!(pd > last);
            last = pd;
        }
    }

    #[test]
    fn threshold_for_detection_floor() {
        let cfg = table1();
        let lam = cfg.lambda_for_pd_min(0.01).unwrap();
        assert!((lam - 1.004_716_027_531).abs() < 1e-10, "{lam}");
        assert!((cfg.pd(0.01, lam) - 0.9).abs() < 1e-9);
        let half = DetectorConfig::new(6e6, 0.5, 0.1, 0.01).unwrap();
        assert!((half.lambda_for_pd_min(0.02).unwrap() - 1.01).abs() < 1e-15);
        assert!(cfg.lambda_for_pd_min(0.0).is_err());
        assert!(cfg.lambda_for_pd_min(-1.0).is_err());
    }

    #[test]
    fn constrained_false_alarm() {
        let cfg = table1();
        assert!((cfg.pfa_constrained(0.02) - 0.015_011_076_788).abs() < 1e-10);
        assert!((cfg.pfa_constrained(cfg.tau_min()) - 0.1).abs() < 1e-9);
        let mut prev = 1.0;
        for i in 1..200 {
            let tau = i as f64 * 5e-4;
            let p = cfg.pfa_constrained(tau);
            assert!(p < prev);
            prev = p;
            let via_lambda = cfg.pfa(tau, cfg.lambda_for_pd_min(tau).unwrap());
            assert!((via_lambda - p).abs() < 1e-9);
        }
    }

    #[test]
    fn minimum_sensing_time() {
        assert!((table1().tau_min() - 0.011_058_383_370).abs() < 1e-11);
        let hi = DetectorConfig::new(6e6, 0.9, 0.1, 0.0316).unwrap();
        assert!((hi.tau_min() - 0.001_130_879_073).abs() < 1e-11);
        let mut prev = f64::INFINITY;
        for g in [0.005, 0.01, 0.02, 0.05, 0.1] {
            let t = DetectorConfig::new(6e6, 0.9, 0.1, g).unwrap().tau_min();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn operating_point_is_consistent() {
        let cfg = table1();
        let op = cfg.operating_point(0.015).unwrap();
        assert!((op.pd - 0.9).abs() < 1e-9);
        assert!((op.pfa - cfg.pfa_constrained(0.015)).abs() < 1e-9);
        assert!(OperatingPoint::at(&cfg, 0.01, 0.0).is_err());
    }

    #[test]
    fn extreme_thresholds() {
        let cfg = table1();
        let mut rng = stream_rng(3, 0);
        for sampler in [EnergySampler::PerSample, EnergySampler::Aggregate] {
            for truth in [Hypothesis::Free, Hypothesis::Busy] {
                let d = ed_decide(&cfg, 1e-4, 1e12, truth, sampler, &mut rng).unwrap();
                assert_eq!(d, Decision::Idle);
                let d = ed_decide(&cfg, 1e-4, 1e-12, truth, sampler, &mut rng).unwrap();
                assert_eq!(d, Decision::Busy);
            }
        }
    }

    #[test]
    fn needs_at_least_one_sample() {
        let cfg = table1();
        let mut rng = stream_rng(3, 0);
        let r = ed_decide(
            &cfg,
            1e-8,
            1.0,
            Hypothesis::Free,
            EnergySampler::PerSample,
            &mut rng,
        );
        assert_eq!(r, Err(Error::NoSamples));
    }

    #[test]
    fn sampler_moments_agree() {
        // E[X] = N·P and Var[X] = N·P² for both samplers
        let cfg = DetectorConfig::new(6e6, 0.9, 0.1, 0.5).unwrap();
        let n = 200;
        for sampler in [EnergySampler::PerSample, EnergySampler::Aggregate] {
            for (truth, p) in [(Hypothesis::Free, 1.0), (Hypothesis::Busy, 1.5)] {
                let mut rng = stream_rng(11, 0);
                let trials = 4000;
                let xs: Vec<f64> = (0..trials)
                    .map(|_| energy_statistic(&cfg, n, truth, sampler, &mut rng))
                    .collect();
                let mean = xs.iter().sum::<f64>() / trials as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
                let want = n as f64 * p;
                let se = (n as f64 * p * p / trials as f64).sqrt();
                assert!(
                    (mean - want).abs() < 4.0 * se,
                    "{sampler:?} {truth:?} mean {mean}"
                );
                assert!(
                    (var / (n as f64 * p * p) - 1.0).abs() < 0.1,
                    "{sampler:?} var {var}"
                );
            }
        }
    }
}
