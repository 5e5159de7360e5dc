//! XOR inner loop.
//!
//! Each input bit is a 500-step spike train: one random 50-spike pattern
//! stands for `0`, another for `1`, and both are redrawn every epoch. The
//! network `[2, 20, 1]` is trained on the four XOR samples with a per-step
//! reward (+1 per output spike when the label is 1, −1 when it is 0) and
//! then tested on freshly drawn patterns with plasticity off. An output is
//! read as `1` when its spike count exceeds the mean count of the epoch's
//! training presentations.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::{LifConfig, Network, NetworkConfig, PlasticityRule, ProjectionConfig, SpikeMatrix};

/// Presentation order of the four samples within an epoch.
pub const SAMPLE_ORDER: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XorConfig {
    pub n_spikes_per_pattern: usize,
    pub sim_duration: usize,
    pub n_epochs: usize,
    pub network: NetworkConfig,
    pub reward_positive: f64,
    pub reward_negative: f64,
    pub learning_rate: f64,
    pub trials_per_fitness: usize,
}

impl Default for XorConfig {
    fn default() -> Self {
        XorConfig {
            n_spikes_per_pattern: 50,
            sim_duration: 500,
            n_epochs: 500,
            network: NetworkConfig {
                layers: vec![2, 20, 1],
                lif: LifConfig::xor(),
                projections: vec![
                    ProjectionConfig::uniform(XOR_INPUT_INIT.0, XOR_INPUT_INIT.1),
                    ProjectionConfig::uniform(XOR_HIDDEN_INIT.0, XOR_HIDDEN_INIT.1),
                ],
            },
            reward_positive: 1.0,
            reward_negative: -1.0,
            learning_rate: 5e-3,
            trials_per_fitness: 3,
        }
    }
}

/// Calibrated initial weight range, input → hidden.
pub const XOR_INPUT_INIT: (f64, f64) = (0.0, 1200.0);
/// Calibrated initial weight range, hidden → output.
pub const XOR_HIDDEN_INIT: (f64, f64) = (0.0, 200.0);

impl XorConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.n_spikes_per_pattern > self.sim_duration {
            return Err(Error::Config(format!(
                "xor.n_spikes_per_pattern ({}) exceeds xor.sim_duration ({})",
                self.n_spikes_per_pattern, self.sim_duration
            )));
        }
        if self.network.layers.first() != Some(&2) {
            return Err(Error::Config("xor.network.layers must start with 2 inputs".into()));
        }
        if self.trials_per_fitness == 0 {
            return Err(Error::Config("xor.trials_per_fitness must be at least 1".into()));
        }
        Ok(())
    }
}

/// A spike train with a fixed number of spikes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikePattern(Vec<bool>);

impl SpikePattern {
    pub fn random<R: Rng + ?Sized>(n_spikes: usize, duration: usize, rng: &mut R) -> Self {
        let mut v = vec![false; duration];
        for k in index::sample(rng, duration, n_spikes) {
            v[k] = true;
        }
        SpikePattern(v)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn spike_count(&self) -> usize {
        self.0.iter().filter(|&&s| s).count()
    }
}

/// Draws the two bit patterns (for `0` and `1`).
pub fn generate_patterns<R: Rng + ?Sized>(cfg: &XorConfig, rng: &mut R) -> (SpikePattern, SpikePattern) {
    let p0 = SpikePattern::random(cfg.n_spikes_per_pattern, cfg.sim_duration, rng);
    let p1 = SpikePattern::random(cfg.n_spikes_per_pattern, cfg.sim_duration, rng);
    (p0, p1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XorSample {
    pub bits: (bool, bool),
    pub input: SpikeMatrix,
}

impl XorSample {
    pub fn new(bits: (bool, bool), p0: &SpikePattern, p1: &SpikePattern) -> Self {
        let pick = |b: bool| if b { p1 } else { p0 };
        let duration = p0.0.len();
        let mut input = SpikeMatrix::zeros(2, duration);
        input.row_mut(0).copy_from_slice(pick(bits.0).as_slice());
        input.row_mut(1).copy_from_slice(pick(bits.1).as_slice());
        XorSample { bits, input }
    }

    pub fn label(&self) -> bool {
        self.bits.0 ^ self.bits.1
    }
}

/// Reward delivered at one timestep.
pub fn reward_at(label: bool, output_spike: bool, cfg: &XorConfig) -> f64 {
    match (label, output_spike) {
        (_, false) => 0.0,
        (true, true) => cfg.reward_positive,
        (false, true) => cfg.reward_negative,
    }
}

/// `1` iff the count strictly exceeds the epoch's mean count.
pub fn classify(output_count: usize, epoch_mean_count: f64) -> bool {
    output_count as f64 > epoch_mean_count
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean over hidden neurons of `|w_in0 − w_in1|` after the epoch.
    pub weight_diff: f64,
    /// Mean over hidden neurons of `|d(epoch) − d(0)|` with
    /// `d = w_in0 − w_in1`: how far the input weight difference has moved.
    pub weight_diff_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialCurve {
    pub seed: u64,
    pub initial_weight_diff: f64,
    pub epochs: Vec<EpochRecord>,
    pub aborted: bool,
}

impl TrialCurve {
    /// Test accuracy of the last epoch; `0` for aborted trials.
    pub fn final_test_accuracy(&self) -> f64 {
        if self.aborted {
            return 0.0;
        }
        self.epochs.last().map_or(0.0, |e| e.test_acc)
    }

    /// Growth of the input weight difference between the start and `epoch`
    /// (1-based: `epoch = 100` means after the hundredth epoch).
    pub fn weight_diff_growth(&self, epoch: usize) -> Option<f64> {
        let rec = self.epochs.get(epoch.checked_sub(1)?)?;
        Some(rec.weight_diff - self.initial_weight_diff)
    }

    /// `weight_diff_change` after `epoch` (1-based).
    pub fn weight_diff_change(&self, epoch: usize) -> Option<f64> {
        Some(self.epochs.get(epoch.checked_sub(1)?)?.weight_diff_change)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "train_acc", "test_acc", "mean_abs_w_diff"])?;
        for e in &self.epochs {
            wr.write_record([
                e.epoch.to_string(),
                e.train_acc.to_string(),
                e.test_acc.to_string(),
                e.weight_diff.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("csv", e))?;
        Ok(())
    }
}

/// One XOR learning cycle: a network, its random source and the rule.
pub struct XorTrial<'a> {
    cfg: &'a XorConfig,
    rule: &'a PlasticityRule,
    rng: ChaCha8Rng,
    net: Network,
    initial_diffs: Vec<f64>,
}

impl<'a> XorTrial<'a> {
    pub fn new(rule: &'a PlasticityRule, cfg: &'a XorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(cfg.network.clone(), &mut rng)?;
        let initial_diffs = signed_input_diffs(&net);
        Ok(XorTrial {
            cfg,
            rule,
            rng,
            net,
            initial_diffs,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn weight_diff(&self) -> f64 {
        input_weight_diff(&self.net)
    }

    pub fn weight_diff_change(&self) -> f64 {
        let now = signed_input_diffs(&self.net);
        now.iter()
            .zip(&self.initial_diffs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / now.len() as f64
    }

    /// Runs one sample from a reset state and returns its output raster.
    pub fn present(&mut self, sample: &XorSample, learning: bool) -> Result<SpikeMatrix> {
        self.net.reset_state();
        let label = sample.label();
        let cfg = self.cfg;
        self.net.forward_pass(
            &sample.input,
            self.rule,
            |_, out| reward_at(label, out[0], cfg),
            learning,
            0.0,
        )
    }

    /// Training presentations followed by a test on fresh patterns.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let (p0, p1) = generate_patterns(self.cfg, &mut self.rng);
        let mut train_counts = [0usize; 4];
        for (k, &bits) in SAMPLE_ORDER.iter().enumerate() {
            let out = self.present(&XorSample::new(bits, &p0, &p1), true)?;
            train_counts[k] = out.row_count(0);
        }
        let mean = train_counts.iter().sum::<usize>() as f64 / 4.0;
        let train_acc = accuracy(&train_counts, mean);

        let (q0, q1) = generate_patterns(self.cfg, &mut self.rng);
        let mut test_counts = [0usize; 4];
        for (k, &bits) in SAMPLE_ORDER.iter().enumerate() {
            let out = self.present(&XorSample::new(bits, &q0, &q1), false)?;
            test_counts[k] = out.row_count(0);
        }
        Ok(EpochRecord {
            epoch,
            train_acc,
            test_acc: accuracy(&test_counts, mean),
            weight_diff: self.weight_diff(),
            weight_diff_change: self.weight_diff_change(),
        })
    }

    /// Output rasters of the four samples on fresh patterns, plasticity off.
    pub fn raster(&mut self) -> Result<Vec<((bool, bool), SpikeMatrix)>> {
        let (p0, p1) = generate_patterns(self.cfg, &mut self.rng);
        SAMPLE_ORDER
            .iter()
            .map(|&bits| Ok((bits, self.present(&XorSample::new(bits, &p0, &p1), false)?)))
            .collect()
    }
}

fn accuracy(counts: &[usize; 4], mean: f64) -> f64 {
    SAMPLE_ORDER
        .iter()
        .zip(counts)
        .filter(|(&(a, b), &c)| classify(c, mean) == (a ^ b))
        .count() as f64
        / 4.0
}

/// Mean over hidden neurons of the absolute difference between the weights
/// from the two input neurons.
pub fn input_weight_diff(net: &Network) -> f64 {
    let d = signed_input_diffs(net);
    d.iter().map(|x| x.abs()).sum::<f64>() / d.len() as f64
}

fn signed_input_diffs(net: &Network) -> Vec<f64> {
    net.weights(0).chunks_exact(2).map(|p| p[0] - p[1]).collect()
}

/// Trains for `cfg.n_epochs` epochs. A non-finite weight aborts the trial,
/// which then scores zero.
pub fn run_trial(rule: &PlasticityRule, cfg: &XorConfig, seed: u64) -> Result<TrialCurve> {
    let mut trial = XorTrial::new(rule, cfg, seed)?;
    let mut curve = TrialCurve {
        seed,
        initial_weight_diff: trial.weight_diff(),
        epochs: Vec::with_capacity(cfg.n_epochs),
        aborted: false,
    };
    for epoch in 1..=cfg.n_epochs {
        match trial.run_epoch(epoch) {
            Ok(rec) => curve.epochs.push(rec),
            Err(Error::NonFinite(_)) => {
                curve.aborted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// Mean final test accuracy over the given trial seeds.
pub fn fitness(rule: &PlasticityRule, cfg: &XorConfig, seeds: &[u64]) -> Result<f64> {
    if seeds.len() != cfg.trials_per_fitness {
        return Err(Error::Config(format!(
            "xor fitness needs {} trial seeds, got {}",
            cfg.trials_per_fitness,
            seeds.len()
        )));
    }
    let accs = seeds
        .iter()
        .map(|&s| run_trial(rule, cfg, s).map(|c| c.final_test_accuracy()))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::stats::mean(&accs))
}
