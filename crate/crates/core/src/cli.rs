//! Configuration files and the commands behind the `evoplast` binary.
//!
//! A run configuration is a JSON object. Missing keys are filled from the
//! per-task defaults; unknown keys are rejected.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env_cartpole::{self, TrajectoryStep};
use crate::error::{Error, Result};
use crate::evolution::{self, Checkpoint, Evolution, EvolutionConfig, GenerationLog, Task};
use crate::expr_graph::Genome;
use crate::snn::{NamedRule, PlasticityRule, RuleSpec};
use crate::stats;
use crate::task_cartpole::{CartPoleTaskConfig, CartPoleTrial, EpisodeMode};
use crate::task_xor::{self, XorConfig, XorTrial};

/// Process exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::UnknownRule { .. }
        | Error::InvalidGenome(_)
        | Error::Expression(_)
        | Error::Json(_)
        | Error::Checkpoint(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Xor,
    Cartpole,
}

impl TaskName {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Xor => "xor",
            TaskName::Cartpole => "cartpole",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub evolution: EvolutionConfig,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    task: TaskName,
    seed: u64,
    workers: usize,
    out: PathBuf,
    evolution: EvolutionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xor: Option<XorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cartpole: Option<CartPoleTaskConfig>,
}

impl RunConfig {
    pub fn defaults(task: TaskName) -> Self {
        let (task_cfg, evolution) = match task {
            TaskName::Xor => (Task::Xor(XorConfig::default()), EvolutionConfig::xor()),
            TaskName::Cartpole => (Task::Cartpole(CartPoleTaskConfig::default()), EvolutionConfig::cartpole()),
        };
        RunConfig {
            task: task_cfg,
            evolution,
            seed: 0,
            workers: 1,
            out: PathBuf::from("runs").join(task.as_str()),
        }
    }

    pub fn task_name(&self) -> TaskName {
        match self.task {
            Task::Xor(_) => TaskName::Xor,
            Task::Cartpole(_) => TaskName::Cartpole,
        }
    }

    /// Parses a (possibly partial) configuration. `task` selects the
    /// defaults that fill any missing keys.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(map) = &user else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let task = match map.get("task") {
            None => TaskName::Xor,
            Some(v) => serde_json::from_value::<TaskName>(v.clone())
                .map_err(|_| Error::Config(format!("task: expected \"xor\" or \"cartpole\", got {v}")))?,
        };
        let other = match task {
            TaskName::Xor => "cartpole",
            TaskName::Cartpole => "xor",
        };
        if map.contains_key(other) {
            return Err(Error::Config(format!(
                "{other}: section given but task is \"{}\"",
                task.as_str()
            )));
        }
        let mut merged = Self::defaults(task).to_value();
        merge(&mut merged, user);
        let file: RunConfigFile = serde_path_to_error::deserialize(merged)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        let task_cfg = match file.task {
            TaskName::Xor => Task::Xor(file.xor.unwrap_or_default()),
            TaskName::Cartpole => Task::Cartpole(file.cartpole.unwrap_or_default()),
        };
        let cfg = RunConfig {
            task: task_cfg,
            evolution: file.evolution,
            seed: file.seed,
            workers: file.workers,
            out: file.out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_value(&self) -> Value {
        let (xor, cartpole) = match &self.task {
            Task::Xor(c) => (Some(c.clone()), None),
            Task::Cartpole(c) => (None, Some(c.clone())),
        };
        serde_json::to_value(RunConfigFile {
            task: self.task_name(),
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            evolution: self.evolution.clone(),
            xor,
            cartpole,
        })
        .expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("config serializes")
    }

    /// The configuration recorded next to run outputs: everything that
    /// determines the results, without the worker count and output
    /// directory. Loading it back fills those two from the defaults.
    pub fn run_json(&self) -> String {
        let mut v = self.to_value();
        if let Value::Object(map) = &mut v {
            map.remove("workers");
            map.remove("out");
        }
        serde_json::to_string_pretty(&v).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.evolution.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        self.task.learning_rate()
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Resolves `--rule`: a built-in name, or a JSON file holding either a bare
/// genome or an object with a `genome` field (such as `best.json`).
pub fn resolve_rule(arg: &str) -> Result<RuleSpec> {
    if let Ok(named) = arg.parse::<NamedRule>() {
        return Ok(RuleSpec::Named(named));
    }
    let path = Path::new(arg);
    if !path.exists() {
        if arg.ends_with(".json") || arg.contains(std::path::MAIN_SEPARATOR) {
            return Err(Error::Config(format!("rule file {arg} does not exist")));
        }
        return Err(Error::UnknownRule {
            name: arg.to_string(),
            known: NamedRule::known_names(),
        });
    }
    Ok(RuleSpec::Genome(load_genome(path)?))
}

pub fn load_genome(path: &Path) -> Result<Genome> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidGenome(format!("{} is not valid JSON: {e}", path.display())))?;
    let genome_value = match value.get("genome") {
        Some(g) => g.clone(),
        None => value,
    };
    serde_json::from_value(genome_value).map_err(|e| Error::InvalidGenome(format!("{}: {e}", path.display())))
}

fn check_rule_fits(rule: &RuleSpec, task: &Task) -> Result<()> {
    if let RuleSpec::Genome(g) = rule {
        if g.n_inputs() != task.n_inputs() {
            return Err(Error::Config(format!(
                "genome has {} inputs but the {} task provides {}",
                g.n_inputs(),
                task.name(),
                task.n_inputs()
            )));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn par_map<T: Sync, U: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

/// Best rule of an evolution run, as written to `best.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRule {
    pub task: String,
    pub fitness: f64,
    pub expression: String,
    pub genome: Genome,
}

#[derive(Clone, Debug)]
pub struct EvolveSummary {
    pub best: BestRule,
    pub logs: Vec<GenerationLog>,
    pub resumed_from: Option<usize>,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOG_FILE: &str = "log.csv";
pub const BEST_FILE: &str = "best.json";

/// Runs (or resumes) an evolution into `cfg.out`: `config.json`,
/// `log.csv`, `checkpoint.json` and `best.json`.
pub fn cmd_evolve(cfg: &RunConfig, resume: bool, mut progress: impl FnMut(&GenerationLog)) -> Result<EvolveSummary> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("config.json"), cfg.run_json().as_bytes())?;
    let ckpt_path = cfg.out.join(CHECKPOINT_FILE);
    let (mut evo, resumed_from) = if resume && ckpt_path.exists() {
        let text = fs::read_to_string(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
        let ckpt = Checkpoint::from_json(&text)?;
        let g = ckpt.generation;
        (
            Evolution::resume(&cfg.task, &cfg.evolution, cfg.seed, cfg.workers, ckpt)?,
            Some(g),
        )
    } else {
        (Evolution::new(&cfg.task, &cfg.evolution, cfg.seed, cfg.workers)?, None)
    };
    let save = |evo: &Evolution| -> Result<()> {
        let json = serde_json::to_string(evo.checkpoint())?;
        write_file(&ckpt_path, json.as_bytes())?;
        let mut buf = Vec::new();
        evolution::write_log_csv(evo.logs(), &mut buf)?;
        write_file(&cfg.out.join(LOG_FILE), &buf)
    };
    while !evo.is_done() {
        progress(evo.step()?);
        if evo.checkpoint_due() {
            save(&evo)?;
        }
    }
    save(&evo)?;
    let result = evo.finish()?;
    let best = BestRule {
        task: cfg.task.name().to_string(),
        fitness: result.best.fitness.unwrap_or(cfg.task.worst_fitness()),
        expression: result.best.genome.to_expression_string(),
        genome: result.best.genome.clone(),
    };
    write_file(
        &cfg.out.join(BEST_FILE),
        serde_json::to_string_pretty(&best)?.as_bytes(),
    )?;
    Ok(EvolveSummary {
        best,
        logs: result.logs,
        resumed_from,
    })
}

/// Seeds of the independent learning cycles of a validation sweep.
pub fn validation_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(2);
    (0..n).map(|_| rng.gen()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub task: String,
    pub rule: String,
    pub expression: String,
    pub seeds: Vec<u64>,
    /// Final test accuracy (XOR) or last-5-episode balance time (cart-pole)
    /// of each run.
    pub values: Vec<f64>,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl ValidationReport {
    pub fn from_values(task: &str, rule: &RuleSpec, expression: String, seeds: Vec<u64>, values: Vec<f64>) -> Self {
        ValidationReport {
            task: task.to_string(),
            rule: rule.label(),
            expression,
            mean: stats::mean(&values),
            q1: stats::quantile(&values, 0.25),
            median: stats::quantile(&values, 0.5),
            q3: stats::quantile(&values, 0.75),
            seeds,
            values,
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["run", "seed", "value"])?;
        for (k, (s, v)) in self.seeds.iter().zip(&self.values).enumerate() {
            wr.write_record([k.to_string(), s.to_string(), v.to_string()])?;
        }
        wr.flush().map_err(|e| Error::io("csv", e))?;
        Ok(())
    }
}

/// Runs `n_runs` learning cycles of `rule` and summarizes the final metric.
pub fn validate_rule(cfg: &RunConfig, rule: &RuleSpec, n_runs: usize) -> Result<ValidationReport> {
    cfg.validate()?;
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    check_rule_fits(rule, &cfg.task)?;
    let plasticity = rule.to_rule(cfg.learning_rate())?;
    let seeds = validation_seeds(cfg.seed, n_runs);
    let values = par_map(cfg.workers, &seeds, |&s| cfg.task.trial_metric(&plasticity, s))?;
    Ok(ValidationReport::from_values(
        cfg.task.name(),
        rule,
        plasticity.expression(),
        seeds,
        values,
    ))
}

/// [`validate_rule`] plus `validation.json` and `validation.csv` in
/// `cfg.out`.
pub fn cmd_validate(cfg: &RunConfig, rule: &RuleSpec, n_runs: usize) -> Result<ValidationReport> {
    let report = validate_rule(cfg, rule, n_runs)?;
    create_dir(&cfg.out)?;
    write_file(
        &cfg.out.join("validation.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(&cfg.out.join("validation.csv"), &buf)?;
    Ok(report)
}

/// What a replay wrote, with headline numbers.
#[derive(Clone, Debug)]
pub enum ReplaySummary {
    /// Output spike counts per input pattern in sample order, before and
    /// after training.
    Xor {
        before: [usize; 4],
        after: [usize; 4],
        final_test_accuracy: f64,
    },
    CartPole {
        before_balance: usize,
        after_balance: usize,
        training_balance: Vec<usize>,
    },
}

/// Re-simulates one learning cycle with trial seed `cfg.seed` and writes
/// before/after artifacts to `cfg.out`.
///
/// XOR: `raster.csv` (one row per output spike) and `curve.csv`.
/// Cart-pole: `trajectory_before.csv`, `trajectory_after.csv`, `curve.csv`.
/// "Before" and "after" episodes run with plasticity off.
pub fn cmd_replay(cfg: &RunConfig, rule: &RuleSpec) -> Result<ReplaySummary> {
    cfg.validate()?;
    check_rule_fits(rule, &cfg.task)?;
    let plasticity = rule.to_rule(cfg.learning_rate())?;
    create_dir(&cfg.out)?;
    match &cfg.task {
        Task::Xor(c) => replay_xor(cfg, c, &plasticity),
        Task::Cartpole(c) => replay_cartpole(cfg, c, &plasticity),
    }
}

fn replay_xor(cfg: &RunConfig, c: &XorConfig, rule: &PlasticityRule) -> Result<ReplaySummary> {
    let mut trial = XorTrial::new(rule, c, cfg.seed)?;
    let before = trial.raster()?;
    let mut curve = task_xor::TrialCurve {
        seed: cfg.seed,
        initial_weight_diff: trial.weight_diff(),
        epochs: Vec::with_capacity(c.n_epochs),
        aborted: false,
    };
    for epoch in 1..=c.n_epochs {
        match trial.run_epoch(epoch) {
            Ok(rec) => curve.epochs.push(rec),
            Err(Error::NonFinite(_)) => {
                curve.aborted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let after = trial.raster()?;

    let mut wr = csv::Writer::from_writer(create(&cfg.out.join("raster.csv"))?);
    wr.write_record(["phase", "in0", "in1", "step"])?;
    let mut counts = [[0usize; 4]; 2];
    for (p, (phase, raster)) in [("before", &before), ("after", &after)].into_iter().enumerate() {
        for (k, ((a, b), spikes)) in raster.iter().enumerate() {
            for (step, &s) in spikes.row(0).iter().enumerate() {
                if s {
                    counts[p][k] += 1;
                    wr.write_record([phase, &(*a as u8).to_string(), &(*b as u8).to_string(), &step.to_string()])?;
                }
            }
        }
    }
    wr.flush().map_err(|e| Error::io("raster.csv", e))?;
    curve.write_csv(create(&cfg.out.join("curve.csv"))?)?;
    Ok(ReplaySummary::Xor {
        before: counts[0],
        after: counts[1],
        final_test_accuracy: curve.final_test_accuracy(),
    })
}

fn replay_cartpole(cfg: &RunConfig, c: &CartPoleTaskConfig, rule: &PlasticityRule) -> Result<ReplaySummary> {
    let eval = EpisodeMode {
        learning: false,
        terminate_on_angle: true,
    };
    let mut trial = CartPoleTrial::new(rule, c, cfg.seed)?;
    let before = trial.run_episode(eval)?;
    let mut training = Vec::with_capacity(c.episodes_per_trial);
    for _ in 0..c.episodes_per_trial {
        training.push(trial.run_episode(EpisodeMode::TRAIN)?.balance_time);
    }
    let after = trial.run_episode(eval)?;
    let write = |name: &str, steps: &[TrajectoryStep]| -> Result<()> {
        env_cartpole::write_trajectory_csv(steps, create(&cfg.out.join(name))?)
    };
    write("trajectory_before.csv", &before.steps)?;
    write("trajectory_after.csv", &after.steps)?;
    let mut wr = csv::Writer::from_writer(create(&cfg.out.join("curve.csv"))?);
    wr.write_record(["episode", "balance_time"])?;
    for (k, b) in training.iter().enumerate() {
        wr.write_record([(k + 1).to_string(), b.to_string()])?;
    }
    wr.flush().map_err(|e| Error::io("curve.csv", e))?;
    Ok(ReplaySummary::CartPole {
        before_balance: before.balance_time,
        after_balance: after.balance_time,
        training_balance: training,
    })
}

/// Expression text of a built-in rule or a genome file.
pub fn cmd_print_rule(arg: &str) -> Result<String> {
    Ok(match resolve_rule(arg)? {
        RuleSpec::Named(n) => n.genome().to_expression_string(),
        RuleSpec::Genome(g) => g.to_expression_string(),
        RuleSpec::Expression(e) => e,
    })
}
