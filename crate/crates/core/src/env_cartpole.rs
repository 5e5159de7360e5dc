//! Cart-pole physics and the Poisson encoders feeding the agent network.
//!
//! Dynamics follow the classic cart-pole equations (Barto, Sutton & Anderson)
//! with the constants of the widely used Gym environment. The state is
//! advanced with semi-implicit Euler, so the chosen force already shows up in
//! the post-step pole angle. Episodes end when `|θ|` exceeds the angle limit.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::SpikeMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn negate(self) -> Self {
        CartPoleState {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x_dot.is_finite() && self.theta.is_finite() && self.theta_dot.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub fn sign(self) -> f64 {
        match self {
            Action::Left => -1.0,
            Action::Right => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Left => "left",
            Action::Right => "right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_mag: f64,
    /// Integration step in seconds.
    pub tau: f64,
    /// Termination angle in radians.
    pub angle_limit: f64,
    /// Maximum episode length in environment steps.
    pub max_steps: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            angle_limit: 15f64.to_radians(),
            max_steps: 100,
        }
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("mass_cart", self.mass_cart),
            ("mass_pole", self.mass_pole),
            ("half_length", self.half_length),
            ("force_mag", self.force_mag),
            ("tau", self.tau),
            ("angle_limit", self.angle_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("cartpole.env.{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("cartpole.env.max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform draw of every state component from `[-0.05, 0.05]`.
pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> CartPoleState {
    CartPoleState {
        x: rng.gen_range(-0.05..=0.05),
        x_dot: rng.gen_range(-0.05..=0.05),
        theta: rng.gen_range(-0.05..=0.05),
        theta_dot: rng.gen_range(-0.05..=0.05),
    }
}

/// Advances one environment step; the flag reports `|θ'| > angle_limit`.
pub fn step(state: CartPoleState, action: Action, p: &CartPoleParams) -> (CartPoleState, bool) {
    let next = step_with_force(state, action.sign() * p.force_mag, p);
    (next, next.theta.abs() > p.angle_limit)
}

/// Same dynamics with an arbitrary force (zero force is used in tests).
pub fn step_with_force(s: CartPoleState, force: f64, p: &CartPoleParams) -> CartPoleState {
    let total_mass = p.mass_cart + p.mass_pole;
    let pole_mass_length = p.mass_pole * p.half_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (p.gravity * sin - cos * temp)
        / (p.half_length * (4.0 / 3.0 - p.mass_pole * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

    let x_dot = s.x_dot + p.tau * x_acc;
    let x = s.x + p.tau * x_dot;
    let theta_dot = s.theta_dot + p.tau * theta_acc;
    let theta = s.theta + p.tau * theta_dot;
    CartPoleState {
        x,
        x_dot,
        theta,
        theta_dot,
    }
}

/// Two groups of Poisson neurons (positive values first, then negative)
/// encoding one scalar over a fixed number of network steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub neurons_per_group: usize,
    pub steps: usize,
    /// Magnitude that maps to a spike probability of 1 per step.
    pub v_scale: f64,
}

/// Calibrated encoder gain: the angular speed (rad/s) at which the encoder
/// saturates.
pub const CARTPOLE_V_SCALE: f64 = 6.0;

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            neurons_per_group: 5,
            steps: 50,
            v_scale: CARTPOLE_V_SCALE,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons_per_group == 0 || self.steps == 0 {
            return Err(Error::Config("cartpole.encoder sizes must be non-zero".into()));
        }
        if !(self.v_scale > 0.0 && self.v_scale.is_finite()) {
            return Err(Error::Config(format!(
                "cartpole.encoder.v_scale must be positive, got {}",
                self.v_scale
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        2 * self.neurons_per_group
    }

    /// Per-step spike probability of the active group.
    pub fn spike_probability(&self, value: f64) -> f64 {
        (value.abs() / self.v_scale).clamp(0.0, 1.0)
    }
}

/// Encodes the pole angular velocity. The group matching its sign fires
/// Bernoulli spikes; the other group stays silent.
pub fn encode_observation<R: Rng + ?Sized>(theta_dot: f64, enc: &EncoderConfig, rng: &mut R) -> SpikeMatrix {
    let mut m = SpikeMatrix::zeros(enc.rows(), enc.steps);
    let p = enc.spike_probability(theta_dot);
    let offset = if theta_dot >= 0.0 { 0 } else { enc.neurons_per_group };
    for r in 0..enc.neurons_per_group {
        for t in 0..enc.steps {
            // Always draw so the random stream does not depend on the sign.
            let u: f64 = rng.gen();
            if u < p {
                m.set(offset + r, t, true);
            }
        }
    }
    m
}

/// One row of an exported trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub env_step: usize,
    pub state: CartPoleState,
    pub action: Action,
    pub reward: f64,
}

pub fn write_trajectory_csv<W: Write>(steps: &[TrajectoryStep], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["env_step", "x", "x_dot", "theta", "theta_dot", "action", "reward"])?;
    for s in steps {
        wr.write_record([
            s.env_step.to_string(),
            s.state.x.to_string(),
            s.state.x_dot.to_string(),
            s.state.theta.to_string(),
            s.state.theta_dot.to_string(),
            s.action.as_str().to_string(),
            s.reward.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}
