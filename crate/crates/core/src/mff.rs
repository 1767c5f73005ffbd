//! 1–K–1 feed-forward network that learns the cost surface φ(x) = 1/R̄(x).
//!
//! Hidden layer: logistic sigmoid. Output layer: tanh. The input is the
//! normalized sensing time x = τ/T; the output is φ scaled by
//! `target_scale = 0.9/φ_ref`, where φ_ref is the largest cost observed so
//! far, so every target lies in (0, 0.9]. A positive scale leaves the
//! minimizer of the learned surface unchanged.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default hidden-layer width.
pub const DEFAULT_HIDDEN: usize = 9;
/// Rates below this are clamped before inversion into a cost.
pub const RATE_FLOOR: f64 = 1e-6;
/// Scaled targets are mapped into (0, TARGET_CEILING].
pub const TARGET_CEILING: f64 = 0.9;

/// Cost φ = 1/max(rate, RATE_FLOOR).
pub fn cost_from_rate(rate: f64) -> f64 {
    1.0 / rate.max(RATE_FLOOR)
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MffNetwork {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// Input map x = τ·in_scale (in_scale = 1/T).
    pub in_scale: f64,
    /// Output map y = φ·target_scale.
    pub target_scale: f64,
}

/// Weight gradients, laid out like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MffNetwork {
    /// All-zero network with `k` hidden neurons.
    pub fn zeros(k: usize, slot_t: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("hidden", "need at least one hidden neuron"));
        }
        if !(slot_t > 0.0 && slot_t.is_finite()) {
            return Err(invalid("slot_t", "must be positive and finite"));
        }
        Ok(Self {
            w1: vec![0.0; k],
            b1: vec![0.0; k],
            w2: vec![0.0; k],
            b2: 0.0,
            in_scale: 1.0 / slot_t,
            target_scale: 1.0,
        })
    }

    /// Weights and biases drawn uniformly from [−0.5, 0.5].
    pub fn random<R: Rng + ?Sized>(k: usize, slot_t: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(k, slot_t)?;
        let mut draw = || rng.random_range(-0.5..=0.5);
        for i in 0..k {
            net.w1[i] = draw();
            net.b1[i] = draw();
            net.w2[i] = draw();
        }
        net.b2 = draw();
        Ok(net)
    }

    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn param_count(&self) -> usize {
        3 * self.hidden() + 1
    }

    /// Output and hidden activations at normalized input `x`.
    pub fn forward(&self, x: f64) -> (f64, Vec<f64>) {
        let a: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(w, b)| logistic(w * x + b))
            .collect();
        let u = self.w2.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>() + self.b2;
        (u.tanh(), a)
    }

    /// Network output at `x`.
    pub fn output(&self, x: f64) -> f64 {
        let mut u = self.b2;
        for i in 0..self.hidden() {
            u += self.w2[i] * logistic(self.w1[i] * x + self.b1[i]);
        }
        u.tanh()
    }

    /// ∂y/∂x = (1 − y²)·Σ_k w2_k·a_k(1 − a_k)·w1_k.
    pub fn sensitivity(&self, x: f64) -> f64 {
        let (y, a) = self.forward(x);
        let s: f64 = (0..self.hidden())
            .map(|k| self.w2[k] * a[k] * (1.0 - a[k]) * self.w1[k])
            .sum();
        (1.0 - y * y) * s
    }

    /// Gradients of ½(y(x) − target)² with respect to every parameter.
    pub fn gradients(&self, x: f64, target: f64) -> Gradients {
        let (y, a) = self.forward(x);
        let delta2 = (y - target) * (1.0 - y * y);
        let k = self.hidden();
        let mut g = Gradients {
            w1: vec![0.0; k],
            b1: vec![0.0; k],
            w2: vec![0.0; k],
            b2: delta2,
        };
        for i in 0..k {
            g.w2[i] = delta2 * a[i];
            let delta1 = delta2 * self.w2[i] * a[i] * (1.0 - a[i]);
            g.w1[i] = delta1 * x;
            g.b1[i] = delta1;
        }
        g
    }

    /// Parameters flattened as [w1, b1, w2, b2].
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let k = self.hidden();
        if p.len() != self.param_count() {
            return Err(invalid(
                "params",
                format!("expected {} values, got {}", self.param_count(), p.len()),
            ));
        }
        self.w1.copy_from_slice(&p[..k]);
        self.b1.copy_from_slice(&p[k..2 * k]);
        self.w2.copy_from_slice(&p[2 * k..3 * k]);
        self.b2 = p[3 * k];
        Ok(())
    }

    pub fn scale_in(&self, tau: f64) -> f64 {
        tau * self.in_scale
    }

    pub fn scale_out(&self, phi: f64) -> f64 {
        phi * self.target_scale
    }

    pub fn scale_out_inverse(&self, y: f64) -> f64 {
        y / self.target_scale
    }

    /// Sets the target scale so that `phi_ref` maps to the target ceiling.
    pub fn set_reference_cost(&mut self, phi_ref: f64) -> Result<()> {
        if !(phi_ref > 0.0 && phi_ref.is_finite()) {
            return Err(invalid("phi_ref", "must be positive and finite"));
        }
        self.target_scale = TARGET_CEILING / phi_ref;
        Ok(())
    }

    /// Training error d = ½Σ_m (y(x_m) − φ_m·target_scale)².
    pub fn loss(&self, buffer: &TrainingBuffer) -> f64 {
        buffer
            .iter()
            .map(|(x, phi)| {
                let e = self.output(x) - self.scale_out(phi);
                0.5 * e * e
            })
            .sum()
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        for i in 0..self.hidden() {
            self.w1[i] -= lr * g.w1[i];
            self.b1[i] -= lr * g.b1[i];
            self.w2[i] -= lr * g.w2[i];
        }
        self.b2 -= lr * g.b2;
    }

    fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// Text snapshot; see [`MffNetwork::from_snapshot`] for the format.
    pub fn snapshot(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "mff 1");
        let _ = writeln!(s, "hidden {}", self.hidden());
        let _ = writeln!(s, "in_scale {}", self.in_scale);
        let _ = writeln!(s, "target_scale {}", self.target_scale);
        let _ = writeln!(s, "w1 {}", join(&self.w1));
        let _ = writeln!(s, "b1 {}", join(&self.b1));
        let _ = writeln!(s, "w2 {}", join(&self.w2));
        let _ = writeln!(s, "b2 {}", self.b2);
        s
    }

    /// Parses a snapshot: one `key values…` record per line, keys in the
    /// order `mff 1`, `hidden K`, `in_scale`, `target_scale`, `w1` (K
    /// values), `b1` (K), `w2` (K), `b2` (1). Numbers use Rust's shortest
    /// round-trip formatting, so a snapshot reloads bit-identically.
    pub fn from_snapshot(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Snapshot(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |key: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("missing `{key}`")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(format!("expected `{key}`, found `{line}`")));
            }
            it.map(|t| t.parse::<f64>().map_err(|e| bad(format!("`{key}`: {e}"))))
                .collect()
        };
        if field("mff")? != [1.0] {
            return Err(bad("unsupported version".into()));
        }
        let k = match field("hidden")?.as_slice() {
            [k] if *k >= 1.0 && k.fract() == 0.0 => *k as usize,
            _ => return Err(bad("bad hidden count".into())),
        };
        let scalar = |v: Vec<f64>, key: &str| match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(bad(format!("`{key}` takes one value"))),
        };
        let in_scale = scalar(field("in_scale")?, "in_scale")?;
        let target_scale = scalar(field("target_scale")?, "target_scale")?;
        let mut vector = |key: &str| -> Result<Vec<f64>> {
            let v = field(key)?;
            if v.len() != k {
                return Err(bad(format!("`{key}` needs {k} values")));
            }
            Ok(v)
        };
        let w1 = vector("w1")?;
        let b1 = vector("b1")?;
        let w2 = vector("w2")?;
        let b2 = scalar(field("b2")?, "b2")?;
        let net = Self {
            w1,
            b1,
            w2,
            b2,
            in_scale,
            target_scale,
        };
        if !(net.is_finite() && in_scale > 0.0 && target_scale > 0.0) {
            return Err(bad("non-finite or non-positive values".into()));
        }
        Ok(net)
    }
}

/// Teacher patterns (x, φ) with raw costs; the network's target scale is
/// applied at training time. Oldest pattern is evicted when full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingBuffer {
    capacity: usize,
    pairs: VecDeque<(f64, f64)>,
}

impl TrainingBuffer {
    pub const DEFAULT_CAPACITY: usize = 64;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("buffer_capacity", "must be at least 1"));
        }
        Ok(Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, x: f64, phi: f64) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((x, phi));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairs.iter().copied()
    }

    /// Largest stored cost.
    pub fn max_cost(&self) -> Option<f64> {
        self.pairs.iter().map(|p| p.1).reduce(f64::max)
    }
}

impl Default for TrainingBuffer {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY).expect("nonzero capacity")
    }
}

/// `epochs` passes of per-pattern SGD over the buffer, shuffled each epoch.
/// Returns the post-training error d.
pub fn train_step<R: Rng + ?Sized>(
    net: &mut MffNetwork,
    buffer: &TrainingBuffer,
    learning_rate: f64,
    epochs: usize,
    rng: &mut R,
) -> Result<f64> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(invalid("learning_rate", "must be positive"));
    }
    let pairs: Vec<(f64, f64)> = buffer
        .iter()
        .map(|(x, phi)| (x, net.scale_out(phi)))
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let (x, t) = pairs[i];
            let g = net.gradients(x, t);
            net.apply(&g, learning_rate);
        }
    }
    if !net.is_finite() {
        return Err(invalid(
            "learning_rate",
            "training diverged to non-finite weights",
        ));
    }
    Ok(net.loss(buffer))
}
