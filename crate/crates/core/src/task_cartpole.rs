//! Cart-pole inner loop.
//!
//! The agent is a `[10, 2]` network: ten Poisson inputs encoding the pole
//! angular velocity and two output neurons voting for left and right. The
//! reward is only known after the action, so the rule inputs of every
//! network step are buffered and replayed once the environment has moved.
//! Plasticity is confined to the first `learning_window` steps of each
//! episode.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env_cartpole::{self, Action, CartPoleParams, CartPoleState, EncoderConfig, TrajectoryStep};
use crate::error::{Error, Result};
use crate::snn::{LifConfig, Network, NetworkConfig, PlasticityRule, ProjectionConfig};

/// Output neuron index voting for each action.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Calibrated initial weight range, input → output.
pub const CARTPOLE_INIT: (f64, f64) = (0.0, 40.0);

/// What counts as an environment step that helped balance the pole.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Improvement {
    /// `|θ̇'| < |θ̇|`: the push counteracted the pole's rotation.
    #[default]
    AngularSpeed,
    /// `|θ'| < |θ|`: the pole ended closer to upright.
    Angle,
}

impl Improvement {
    pub fn judge(self, before: &CartPoleState, after: &CartPoleState) -> bool {
        match self {
            Improvement::AngularSpeed => after.theta_dot.abs() < before.theta_dot.abs(),
            Improvement::Angle => after.theta.abs() < before.theta.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartPoleTaskConfig {
    pub episodes_per_trial: usize,
    /// Episodes at the end of a trial averaged into the fitness.
    pub fitness_episodes: usize,
    pub learning_window: usize,
    #[serde(default)]
    pub improvement: Improvement,
    pub reward_positive: f64,
    pub reward_negative: f64,
    pub learning_rate: f64,
    pub trials_per_fitness: usize,
    pub network: NetworkConfig,
    pub encoder: EncoderConfig,
    pub env: CartPoleParams,
}

impl Default for CartPoleTaskConfig {
    fn default() -> Self {
        CartPoleTaskConfig {
            episodes_per_trial: 50,
            fitness_episodes: 5,
            learning_window: 30,
            improvement: Improvement::default(),
            reward_positive: 1.0,
            reward_negative: -0.5,
            learning_rate: 1e-5,
            trials_per_fitness: 3,
            network: NetworkConfig {
                layers: vec![10, 2],
                lif: LifConfig::cartpole(),
                projections: vec![ProjectionConfig::uniform(CARTPOLE_INIT.0, CARTPOLE_INIT.1)],
            },
            encoder: EncoderConfig::default(),
            env: CartPoleParams::default(),
        }
    }
}

impl CartPoleTaskConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.encoder.validate()?;
        self.env.validate()?;
        if self.network.layers != [self.encoder.rows(), 2] {
            return Err(Error::Config(format!(
                "cartpole.network.layers must be [{}, 2], got {:?}",
                self.encoder.rows(),
                self.network.layers
            )));
        }
        if self.learning_window > self.env.max_steps {
            return Err(Error::Config(format!(
                "cartpole.learning_window ({}) exceeds cartpole.env.max_steps ({})",
                self.learning_window, self.env.max_steps
            )));
        }
        if self.fitness_episodes == 0 || self.fitness_episodes > self.episodes_per_trial {
            return Err(Error::Config(format!(
                "cartpole.fitness_episodes must be in 1..={}",
                self.episodes_per_trial
            )));
        }
        if self.trials_per_fitness == 0 {
            return Err(Error::Config("cartpole.trials_per_fitness must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_lifespan(&self) -> usize {
        self.env.max_steps
    }
}

/// Majority vote of the output spike counts; ties go to a fair coin.
pub fn decode_action<R: Rng + ?Sized>(spikes_left: usize, spikes_right: usize, rng: &mut R) -> Action {
    use std::cmp::Ordering::*;
    match spikes_left.cmp(&spikes_right) {
        Greater => Action::Left,
        Less => Action::Right,
        Equal => {
            if rng.gen_bool(0.5) {
                Action::Left
            } else {
                Action::Right
            }
        }
    }
}

/// Rewards for the synapses onto the (left, right) output neurons. The
/// acting neuron gets `positive` when the pole moved toward upright and
/// `negative` otherwise; the other neuron gets the opposite value.
pub fn assign_rewards(action: Action, improved: bool, positive: f64, negative: f64) -> (f64, f64) {
    let (acting, other) = if improved {
        (positive, negative)
    } else {
        (negative, positive)
    };
    match action {
        Action::Left => (acting, other),
        Action::Right => (other, acting),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub balance_time: usize,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoleTrialResult {
    pub seed: u64,
    pub balance_times: Vec<usize>,
    pub aborted: bool,
}

impl CartPoleTrialResult {
    /// Mean balance time of the last `n` episodes; an aborted trial scores
    /// the worst case of 1.
    pub fn last_mean(&self, n: usize) -> f64 {
        if self.aborted || self.balance_times.is_empty() {
            return 1.0;
        }
        let tail = &self.balance_times[self.balance_times.len().saturating_sub(n)..];
        tail.iter().sum::<usize>() as f64 / tail.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["episode", "balance_time"])?;
        for (k, b) in self.balance_times.iter().enumerate() {
            wr.write_record([(k + 1).to_string(), b.to_string()])?;
        }
        wr.flush().map_err(|e| Error::io("csv", e))?;
        Ok(())
    }
}

/// How an episode is run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeMode {
    pub learning: bool,
    /// Stop when the pole passes the angle limit.
    pub terminate_on_angle: bool,
}

impl EpisodeMode {
    pub const TRAIN: EpisodeMode = EpisodeMode {
        learning: true,
        terminate_on_angle: true,
    };
}

/// Outcome of one environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvStepOutcome {
    pub state: CartPoleState,
    pub terminated: bool,
    pub action: Action,
    pub improved: bool,
    pub rewards: (f64, f64),
    pub output_counts: (usize, usize),
}

/// Encodes `θ̇`, simulates the network, acts, and (inside the learning
/// window) replays the buffered rule inputs with the group-wise rewards.
pub fn run_env_step<R: Rng + ?Sized>(
    net: &mut Network,
    state: CartPoleState,
    rule: &PlasticityRule,
    cfg: &CartPoleTaskConfig,
    t_env: usize,
    learning: bool,
    rng: &mut R,
) -> Result<EnvStepOutcome> {
    let input = env_cartpole::encode_observation(state.theta_dot, &cfg.encoder, rng);
    let learn = learning && t_env < cfg.learning_window;
    net.reset_state();
    let mut buffer = Vec::with_capacity(if learn { input.steps() } else { 0 });
    let mut counts = [0usize; 2];
    let mut column = vec![false; input.rows()];
    for step in 0..input.steps() {
        for (r, c) in column.iter_mut().enumerate() {
            *c = input.get(r, step);
        }
        net.step(&column)?;
        for (n, &s) in net.spikes(1).iter().enumerate() {
            counts[n] += s as usize;
        }
        if learn {
            buffer.push(net.activity_snapshot());
        }
    }
    let action = decode_action(counts[LEFT], counts[RIGHT], rng);
    let (next, terminated) = env_cartpole::step(state, action, &cfg.env);
    let improved = cfg.improvement.judge(&state, &next);
    let rewards = assign_rewards(action, improved, cfg.reward_positive, cfg.reward_negative);
    if learn {
        let t = (t_env + 1) as f64 / cfg.max_lifespan() as f64;
        let mut eval = rule.evaluator();
        let reward = |_: usize, i: usize| if i == LEFT { rewards.0 } else { rewards.1 };
        for snap in &buffer {
            net.apply_snapshot(snap, &mut eval, reward, t)?;
        }
    }
    Ok(EnvStepOutcome {
        state: next,
        terminated,
        action,
        improved,
        rewards,
        output_counts: (counts[LEFT], counts[RIGHT]),
    })
}

/// One cart-pole learning cycle.
pub struct CartPoleTrial<'a> {
    cfg: &'a CartPoleTaskConfig,
    rule: &'a PlasticityRule,
    rng: ChaCha8Rng,
    net: Network,
}

impl<'a> CartPoleTrial<'a> {
    pub fn new(rule: &'a PlasticityRule, cfg: &'a CartPoleTaskConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(cfg.network.clone(), &mut rng)?;
        Ok(CartPoleTrial { cfg, rule, rng, net })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn run_episode(&mut self, mode: EpisodeMode) -> Result<EpisodeRecord> {
        let mut state = env_cartpole::reset(&mut self.rng);
        self.net.capture_initial_weights();
        let mut steps = Vec::with_capacity(self.cfg.max_lifespan());
        let mut balance_time = 0;
        let mut fallen = false;
        for t_env in 0..self.cfg.max_lifespan() {
            let out = run_env_step(
                &mut self.net,
                state,
                self.rule,
                self.cfg,
                t_env,
                mode.learning,
                &mut self.rng,
            )?;
            let acting_reward = match out.action {
                Action::Left => out.rewards.0,
                Action::Right => out.rewards.1,
            };
            steps.push(TrajectoryStep {
                env_step: t_env + 1,
                state: out.state,
                action: out.action,
                reward: acting_reward,
            });
            state = out.state;
            if !state.is_finite() {
                return Err(Error::NonFinite("cart-pole state".into()));
            }
            if !fallen {
                balance_time = t_env + 1;
            }
            fallen |= out.terminated;
            if fallen && mode.terminate_on_angle {
                break;
            }
        }
        Ok(EpisodeRecord { balance_time, steps })
    }
}

/// Runs `episodes_per_trial` learning episodes.
pub fn run_trial(rule: &PlasticityRule, cfg: &CartPoleTaskConfig, seed: u64) -> Result<CartPoleTrialResult> {
    let mut trial = CartPoleTrial::new(rule, cfg, seed)?;
    let mut result = CartPoleTrialResult {
        seed,
        balance_times: Vec::with_capacity(cfg.episodes_per_trial),
        aborted: false,
    };
    for _ in 0..cfg.episodes_per_trial {
        match trial.run_episode(EpisodeMode::TRAIN) {
            Ok(ep) => result.balance_times.push(ep.balance_time),
            Err(Error::NonFinite(_)) => {
                result.aborted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Mean over trials of the mean balance time of the last episodes.
pub fn fitness(rule: &PlasticityRule, cfg: &CartPoleTaskConfig, seeds: &[u64]) -> Result<f64> {
    if seeds.len() != cfg.trials_per_fitness {
        return Err(Error::Config(format!(
            "cartpole fitness needs {} trial seeds, got {}",
            cfg.trials_per_fitness,
            seeds.len()
        )));
    }
    let scores = seeds
        .iter()
        .map(|&s| run_trial(rule, cfg, s).map(|r| r.last_mean(cfg.fitness_episodes)))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::stats::mean(&scores))
}
