use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lif::{membrane_update, synaptic_activity, Decays, LifConfig};
use super::rule::{LocalSignals, PlasticityRule, RuleEvaluator, Terminal};
use crate::error::{Error, Result};

/// Binary spike raster, `rows × steps`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeMatrix {
    rows: usize,
    steps: usize,
    data: Vec<bool>,
}

impl SpikeMatrix {
    pub fn zeros(rows: usize, steps: usize) -> Self {
        SpikeMatrix {
            rows,
            steps,
            data: vec![false; rows * steps],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let steps = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != steps) {
            return Err(Error::Topology("spike rows have unequal lengths".into()));
        }
        Ok(SpikeMatrix {
            rows: rows.len(),
            steps,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn get(&self, row: usize, step: usize) -> bool {
        self.data[row * self.steps + step]
    }

    #[inline]
    pub fn set(&mut self, row: usize, step: usize, v: bool) {
        self.data[row * self.steps + step] = v;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.data[row * self.steps..(row + 1) * self.steps]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [bool] {
        &mut self.data[row * self.steps..(row + 1) * self.steps]
    }

    pub fn row_count(&self, row: usize) -> usize {
        self.row(row).iter().filter(|&&s| s).count()
    }

    pub fn total(&self) -> usize {
        self.data.iter().filter(|&&s| s).count()
    }

    fn column_into(&self, step: usize, out: &mut [bool]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.get(r, step);
        }
    }
}

/// Initialization range and clamp bounds for one layer-to-layer projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    pub init_low: f64,
    pub init_high: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl ProjectionConfig {
    /// Uniform init on `[low, high]`, clamped to `[0, 2·high]`.
    pub fn uniform(low: f64, high: f64) -> Self {
        ProjectionConfig {
            init_low: low,
            init_high: high,
            w_min: 0.0,
            w_max: 2.0 * high,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: Vec<usize>,
    pub lif: LifConfig,
    pub projections: Vec<ProjectionConfig>,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(Error::Topology(format!(
                "need at least two non-empty layers, got {:?}",
                self.layers
            )));
        }
        if self.projections.len() != self.layers.len() - 1 {
            return Err(Error::Topology(format!(
                "{} layers need {} projection configs, got {}",
                self.layers.len(),
                self.layers.len() - 1,
                self.projections.len()
            )));
        }
        for (k, p) in self.projections.iter().enumerate() {
            let ok = p.init_low <= p.init_high
                && p.w_min <= p.w_max
                && [p.init_low, p.init_high, p.w_min, p.w_max]
                    .iter()
                    .all(|v| v.is_finite());
            if !ok {
                return Err(Error::Config(format!("projection {k} has invalid ranges: {p:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct LayerState {
    u: Vec<f64>,
    s: Vec<bool>,
    x_plus: Vec<f64>,
    x_minus: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
}

impl LayerState {
    fn new(n: usize) -> Self {
        LayerState {
            u: vec![0.0; n],
            s: vec![false; n],
            x_plus: vec![0.0; n],
            x_minus: vec![0.0; n],
            e1: vec![0.0; n],
            e2: vec![0.0; n],
        }
    }

    fn reset(&mut self) {
        self.u.fill(0.0);
        self.s.fill(false);
        self.x_plus.fill(0.0);
        self.x_minus.fill(0.0);
        self.e1.fill(0.0);
        self.e2.fill(0.0);
    }

    fn update_traces(&mut self, cfg: &LifConfig, d: &Decays) {
        for k in 0..self.s.len() {
            let s = if self.s[k] { 1.0 } else { 0.0 };
            self.x_plus[k] = self.x_plus[k] * d.plus + cfg.a_plus * s;
            self.x_minus[k] = self.x_minus[k] * d.minus + cfg.a_minus * s;
            self.e1[k] = self.e1[k] * d.plus + s;
            self.e2[k] = self.e2[k] * d.elig + s;
        }
    }
}

/// Dense synapses from layer `l` (pre, index `j`) to layer `l+1` (post,
/// index `i`); weight `w_ij` is stored at `i * n_pre + j`.
#[derive(Clone, Debug, PartialEq)]
struct Projection {
    n_pre: usize,
    w: Vec<f64>,
    w0: Vec<f64>,
    elig: Vec<f64>,
    xi: Vec<f64>,
}

/// Spike and neuron-trace activity of one layer at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivity {
    pub s: Vec<bool>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

/// Everything a plasticity rule reads at one timestep, minus the reward.
/// Buffered when the reward only becomes known after the simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivitySnapshot {
    pub layers: Vec<LayerActivity>,
    pub elig: Vec<Vec<f64>>,
}

/// Feed-forward, fully connected LIF network with plasticity state.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    cfg: NetworkConfig,
    decays: Decays,
    layers: Vec<LayerState>,
    projections: Vec<Projection>,
}

/// JSON form of a network's weights for debugging and golden tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub layers: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub config: NetworkConfig,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(cfg: NetworkConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let projections = cfg
            .projections
            .iter()
            .zip(cfg.layers.windows(2))
            .map(|(p, pair)| {
                let n = pair[0] * pair[1];
                let w: Vec<f64> = (0..n)
                    .map(|_| {
                        if p.init_high > p.init_low {
                            rng.gen_range(p.init_low..=p.init_high)
                        } else {
                            p.init_low
                        }
                    })
                    .collect();
                Projection {
                    n_pre: pair[0],
                    w0: w.clone(),
                    w,
                    elig: vec![0.0; n],
                    xi: vec![0.0; n],
                }
            })
            .collect();
        Ok(Network {
            decays: cfg.lif.decays(),
            layers: cfg.layers.iter().map(|&n| LayerState::new(n)).collect(),
            projections,
            cfg,
        })
    }

    pub fn from_snapshot(snap: &NetworkSnapshot) -> Result<Self> {
        let mut net = Network::new(snap.config.clone(), &mut rand::rngs::mock::StepRng::new(0, 0))?;
        if snap.layers != net.cfg.layers {
            return Err(Error::Topology("snapshot layers disagree with its config".into()));
        }
        for (k, w) in snap.weights.iter().enumerate() {
            net.set_weights(k, w)?;
        }
        net.capture_initial_weights();
        Ok(net)
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot {
            layers: self.cfg.layers.clone(),
            weights: self.projections.iter().map(|p| p.w.clone()).collect(),
            config: self.cfg.clone(),
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.cfg.layers
    }

    /// Row-major (`[post][pre]`) weights of projection `k`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.projections[k].w
    }

    pub fn set_weights(&mut self, k: usize, w: &[f64]) -> Result<()> {
        let p = self
            .projections
            .get_mut(k)
            .ok_or_else(|| Error::Topology(format!("no projection {k}")))?;
        if p.w.len() != w.len() {
            return Err(Error::Topology(format!(
                "projection {k} holds {} weights, got {}",
                p.w.len(),
                w.len()
            )));
        }
        p.w.copy_from_slice(w);
        Ok(())
    }

    pub fn eligibility(&self, k: usize) -> &[f64] {
        &self.projections[k].elig
    }

    /// Instantaneous synaptic activity `ξ` of projection `k` at the last step.
    pub fn synaptic_activity(&self, k: usize) -> &[f64] {
        &self.projections[k].xi
    }

    pub fn spikes(&self, layer: usize) -> &[bool] {
        &self.layers[layer].s
    }

    pub fn potentials(&self, layer: usize) -> &[f64] {
        &self.layers[layer].u
    }

    /// Records the current weights as `w0` for the rules that read it.
    pub fn capture_initial_weights(&mut self) {
        for p in &mut self.projections {
            p.w0.copy_from_slice(&p.w);
        }
    }

    /// Zeroes membrane potentials, spikes, traces and eligibility. Weights
    /// and `w0` are kept.
    pub fn reset_state(&mut self) {
        for l in &mut self.layers {
            l.reset();
        }
        for p in &mut self.projections {
            p.elig.fill(0.0);
            p.xi.fill(0.0);
        }
    }

    /// Advances one timestep: membranes layer by layer, then traces, then
    /// eligibility. `input` is the spike vector of the first layer.
    pub fn step(&mut self, input: &[bool]) -> Result<()> {
        if input.len() != self.cfg.layers[0] {
            return Err(Error::Topology(format!(
                "input has {} rows, first layer has {} neurons",
                input.len(),
                self.cfg.layers[0]
            )));
        }
        self.layers[0].s.copy_from_slice(input);
        let alpha = self.decays.membrane;
        let threshold = self.cfg.lif.threshold;
        for k in 0..self.projections.len() {
            let (lo, hi) = self.layers.split_at_mut(k + 1);
            let pre = &lo[k];
            let post = &mut hi[0];
            let proj = &self.projections[k];
            for i in 0..post.u.len() {
                let row = &proj.w[i * proj.n_pre..(i + 1) * proj.n_pre];
                let mut current = 0.0;
                for (w, &s) in row.iter().zip(&pre.s) {
                    if s {
                        current += w;
                    }
                }
                let (u, s) = membrane_update(post.u[i], post.s[i], current, alpha, threshold);
                post.u[i] = u;
                post.s[i] = s;
            }
        }
        for l in &mut self.layers {
            l.update_traces(&self.cfg.lif, &self.decays);
        }
        let d_elig = self.decays.elig;
        for (k, proj) in self.projections.iter_mut().enumerate() {
            let pre = &self.layers[k];
            let post = &self.layers[k + 1];
            for i in 0..post.s.len() {
                let base = i * proj.n_pre;
                for j in 0..proj.n_pre {
                    let xi = synaptic_activity(pre.s[j], post.s[i], pre.x_plus[j], post.x_minus[i]);
                    proj.xi[base + j] = xi;
                    proj.elig[base + j] = proj.elig[base + j] * d_elig + xi;
                }
            }
        }
        Ok(())
    }

    pub fn activity_snapshot(&self) -> ActivitySnapshot {
        ActivitySnapshot {
            layers: self
                .layers
                .iter()
                .map(|l| LayerActivity {
                    s: l.s.clone(),
                    e1: l.e1.clone(),
                    e2: l.e2.clone(),
                })
                .collect(),
            elig: self.projections.iter().map(|p| p.elig.clone()).collect(),
        }
    }

    /// Applies one plasticity update from the current state.
    ///
    /// `reward(k, i)` gives the reward seen by synapses of projection `k`
    /// onto post neuron `i`; `t` feeds the time terminal.
    pub fn apply_plasticity(
        &mut self,
        eval: &mut RuleEvaluator<'_>,
        reward: impl Fn(usize, usize) -> f64,
        t: f64,
    ) -> Result<()> {
        for k in 0..self.projections.len() {
            let pre = &self.layers[k];
            let post = &self.layers[k + 1];
            let bounds = (self.cfg.projections[k].w_min, self.cfg.projections[k].w_max);
            let proj = &mut self.projections[k];
            let view = UpdateView {
                pre_s: &pre.s,
                pre_e1: &pre.e1,
                pre_e2: &pre.e2,
                post_s: &post.s,
                post_e1: &post.e1,
                post_e2: &post.e2,
                elig: &proj.elig,
            };
            update_weights(&mut proj.w, &proj.w0, &view, bounds, eval, |i| reward(k, i), t)?;
        }
        Ok(())
    }

    /// Applies one plasticity update from a buffered snapshot.
    pub fn apply_snapshot(
        &mut self,
        snap: &ActivitySnapshot,
        eval: &mut RuleEvaluator<'_>,
        reward: impl Fn(usize, usize) -> f64,
        t: f64,
    ) -> Result<()> {
        if snap.layers.len() != self.layers.len() || snap.elig.len() != self.projections.len() {
            return Err(Error::Topology("snapshot does not match network".into()));
        }
        for k in 0..self.projections.len() {
            let pre = &snap.layers[k];
            let post = &snap.layers[k + 1];
            let bounds = (self.cfg.projections[k].w_min, self.cfg.projections[k].w_max);
            let proj = &mut self.projections[k];
            let view = UpdateView {
                pre_s: &pre.s,
                pre_e1: &pre.e1,
                pre_e2: &pre.e2,
                post_s: &post.s,
                post_e1: &post.e1,
                post_e2: &post.e2,
                elig: &snap.elig[k],
            };
            update_weights(&mut proj.w, &proj.w0, &view, bounds, eval, |i| reward(k, i), t)?;
        }
        Ok(())
    }

    /// Simulates `input.steps()` timesteps. When `learning` is set, every
    /// synapse is updated after each step with the global reward returned by
    /// `reward_fn(step, output_spikes)`.
    pub fn forward_pass(
        &mut self,
        input: &SpikeMatrix,
        rule: &PlasticityRule,
        mut reward_fn: impl FnMut(usize, &[bool]) -> f64,
        learning: bool,
        t_signal: f64,
    ) -> Result<SpikeMatrix> {
        if input.rows() != self.cfg.layers[0] {
            return Err(Error::Topology(format!(
                "input matrix has {} rows, first layer has {} neurons",
                input.rows(),
                self.cfg.layers[0]
            )));
        }
        let last = self.layers.len() - 1;
        let n_out = self.cfg.layers[last];
        let mut out = SpikeMatrix::zeros(n_out, input.steps());
        let mut column = vec![false; input.rows()];
        let mut eval = rule.evaluator();
        for step in 0..input.steps() {
            input.column_into(step, &mut column);
            self.step(&column)?;
            for (o, &s) in self.layers[last].s.iter().enumerate() {
                if s {
                    out.set(o, step, true);
                }
            }
            if learning {
                let r = reward_fn(step, &self.layers[last].s);
                self.apply_plasticity(&mut eval, |_, _| r, t_signal)?;
            }
        }
        Ok(out)
    }
}

struct UpdateView<'a> {
    pre_s: &'a [bool],
    pre_e1: &'a [f64],
    pre_e2: &'a [f64],
    post_s: &'a [bool],
    post_e1: &'a [f64],
    post_e2: &'a [f64],
    elig: &'a [f64],
}

#[inline]
fn spike(s: bool) -> f64 {
    if s {
        1.0
    } else {
        0.0
    }
}

fn update_weights(
    w: &mut [f64],
    w0: &[f64],
    v: &UpdateView<'_>,
    (w_min, w_max): (f64, f64),
    eval: &mut RuleEvaluator<'_>,
    reward: impl Fn(usize) -> f64,
    t: f64,
) -> Result<()> {
    let n_pre = v.pre_s.len();
    let lr = eval.learning_rate();
    let fill = |term: Terminal, col: &mut [f64]| {
        let by_post = |col: &mut [f64], f: &dyn Fn(usize) -> f64| {
            for (i, row) in col.chunks_exact_mut(n_pre).enumerate() {
                row.fill(f(i));
            }
        };
        let by_pre = |col: &mut [f64], f: &dyn Fn(usize) -> f64| {
            for row in col.chunks_exact_mut(n_pre) {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = f(j);
                }
            }
        };
        match term {
            Terminal::Elig => col.copy_from_slice(v.elig),
            Terminal::InitialWeight => col.copy_from_slice(w0),
            Terminal::Time => col.fill(t),
            Terminal::Reward => by_post(col, &|i| reward(i)),
            Terminal::PostSpike => by_post(col, &|i| spike(v.post_s[i])),
            Terminal::PostTrace1 => by_post(col, &|i| v.post_e1[i]),
            Terminal::PostTrace2 => by_post(col, &|i| v.post_e2[i]),
            Terminal::PreSpike => by_pre(col, &|j| spike(v.pre_s[j])),
            Terminal::PreTrace1 => by_pre(col, &|j| v.pre_e1[j]),
            Terminal::PreTrace2 => by_pre(col, &|j| v.pre_e2[j]),
        }
    };
    if let Some(f) = eval.columns(w.len(), fill) {
        for (idx, (wi, &fi)) in w.iter_mut().zip(f).enumerate() {
            *wi = checked_update(*wi, lr * fi, idx, (w_min, w_max))?;
        }
        return Ok(());
    }
    for i in 0..v.post_s.len() {
        let r = reward(i);
        for j in 0..n_pre {
            let idx = i * n_pre + j;
            let sig = LocalSignals {
                elig: v.elig[idx],
                reward: r,
                s_post: spike(v.post_s[i]),
                s_pre: spike(v.pre_s[j]),
                e_post_1: v.post_e1[i],
                e_post_2: v.post_e2[i],
                e_pre_1: v.pre_e1[j],
                e_pre_2: v.pre_e2[j],
                w0: w0[idx],
                t,
            };
            w[idx] = checked_update(w[idx], eval.delta(&sig), idx, (w_min, w_max))?;
        }
    }
    Ok(())
}

#[inline]
fn checked_update(w: f64, dw: f64, idx: usize, (w_min, w_max): (f64, f64)) -> Result<f64> {
    let nw = w + dw;
    if !nw.is_finite() {
        return Err(Error::NonFinite(format!("weight update {dw} at synapse {idx}")));
    }
    Ok(nw.clamp(w_min, w_max))
}
