use thiserror::Error;

/// Errors produced by the sensing-time models, simulators and learners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("channel index {k} is outside 1..={np}")]
    ChannelIndex { k: usize, np: usize },

    #[error("sensing time {tau} s is outside (0, {slot_t}) s")]
    SensingTimeOutOfRange { tau: f64, slot_t: f64 },

    #[error("handover cap {cap} exceeds the admissible maximum {alpha}")]
    CapExceeded { cap: usize, alpha: usize },

    #[error("infeasible sensing interval: tau_min = {tau_min} s is not below the slot duration {slot_t} s")]
    Infeasible { tau_min: f64, slot_t: f64 },

    #[error("energy detector needs at least one sample (tau * fs rounds to 0)")]
    NoSamples,

    #[error("cost surface returned a non-finite derivative at x = {x}")]
    NonFiniteGradient { x: f64 },

    #[error("training buffer is empty")]
    EmptyBuffer,

    #[error("malformed network snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
