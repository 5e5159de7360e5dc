use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron, trace and eligibility constants. Time constants are in
/// simulation timesteps (Δt = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifConfig {
    pub tau_v: f64,
    pub threshold: f64,
    pub tau_e: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

impl LifConfig {
    pub fn xor() -> Self {
        LifConfig {
            tau_v: 10.0,
            threshold: 100.0,
            tau_e: 100.0,
            tau_plus: 10.0,
            tau_minus: 10.0,
            a_plus: 1.0,
            a_minus: -1.0,
        }
    }

    pub fn cartpole() -> Self {
        LifConfig {
            tau_v: 10.0,
            threshold: 1.0,
            tau_e: 100.0,
            tau_plus: 2.0,
            tau_minus: 2.0,
            a_plus: 1.5,
            a_minus: -0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let taus = [
            ("tau_v", self.tau_v),
            ("tau_e", self.tau_e),
            ("tau_plus", self.tau_plus),
            ("tau_minus", self.tau_minus),
        ];
        for (name, v) in taus {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lif.{name} must be positive, got {v}")));
            }
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!(
                "lif.threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !self.a_plus.is_finite() || !self.a_minus.is_finite() {
            return Err(Error::Config("lif.a_plus/a_minus must be finite".into()));
        }
        Ok(())
    }

    pub fn decays(&self) -> Decays {
        Decays {
            membrane: (-1.0 / self.tau_v).exp(),
            elig: (-1.0 / self.tau_e).exp(),
            plus: (-1.0 / self.tau_plus).exp(),
            minus: (-1.0 / self.tau_minus).exp(),
        }
    }
}

/// Per-step multiplicative decay factors `exp(-1/τ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decays {
    pub membrane: f64,
    pub elig: f64,
    pub plus: f64,
    pub minus: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeuronState {
    pub u: f64,
    pub s: bool,
    pub x_plus: f64,
    pub x_minus: f64,
    /// Fast neuron trace (decays with `tau_plus`).
    pub e1: f64,
    /// Slow neuron trace (decays with `tau_e`).
    pub e2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SynapseState {
    pub w: f64,
    pub w0: f64,
    pub elig: f64,
    pub xi: f64,
}

/// Which activity trace a neuron contributes as.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TracePolarity {
    Pre,
    Post,
    Both,
}

/// One LIF update: `u = (1 - s_prev)·α·u_prev + (1 - α)·i_in`, spike iff
/// `u ≥ threshold`. The reset happens through the `(1 - s_prev)` factor on
/// the step after a spike.
#[inline]
pub fn step_membrane(u_prev: f64, s_prev: bool, i_in: f64, cfg: &LifConfig) -> (f64, bool) {
    let alpha = (-1.0 / cfg.tau_v).exp();
    membrane_update(u_prev, s_prev, i_in, alpha, cfg.threshold)
}

#[inline]
pub(crate) fn membrane_update(
    u_prev: f64,
    s_prev: bool,
    i_in: f64,
    alpha: f64,
    threshold: f64,
) -> (f64, bool) {
    let carry = if s_prev { 0.0 } else { alpha * u_prev };
    let u = carry + (1.0 - alpha) * i_in;
    (u, u >= threshold)
}

pub fn step_traces(
    neuron: NeuronState,
    spiked: bool,
    cfg: &LifConfig,
    polarity: TracePolarity,
) -> NeuronState {
    let d = cfg.decays();
    let s = if spiked { 1.0 } else { 0.0 };
    let mut n = neuron;
    n.s = spiked;
    if matches!(polarity, TracePolarity::Pre | TracePolarity::Both) {
        n.x_plus = n.x_plus * d.plus + cfg.a_plus * s;
    }
    if matches!(polarity, TracePolarity::Post | TracePolarity::Both) {
        n.x_minus = n.x_minus * d.minus + cfg.a_minus * s;
    }
    n.e1 = n.e1 * d.plus + s;
    n.e2 = n.e2 * d.elig + s;
    n
}

/// `ξ = x⁺_pre·S_post + x⁻_post·S_pre`, then `E ← E·exp(-1/τe) + ξ`.
pub fn step_eligibility(
    syn: SynapseState,
    s_pre: bool,
    s_post: bool,
    x_plus_pre: f64,
    x_minus_post: f64,
    cfg: &LifConfig,
) -> SynapseState {
    let mut out = syn;
    out.xi = synaptic_activity(s_pre, s_post, x_plus_pre, x_minus_post);
    out.elig = syn.elig * (-1.0 / cfg.tau_e).exp() + out.xi;
    out
}

#[inline]
pub(crate) fn synaptic_activity(s_pre: bool, s_post: bool, x_plus_pre: f64, x_minus_post: f64) -> f64 {
    let mut xi = 0.0;
    if s_post {
        xi += x_plus_pre;
    }
    if s_pre {
        xi += x_minus_post;
    }
    xi
}
