//! (μ+λ) evolution of plasticity-rule genomes.
//!
//! Every individual is scored on the same fixed set of trial seeds, so its
//! fitness is a deterministic function of its phenotype. Survivors keep
//! their cached fitness, and offspring whose simplified expression was
//! already scored reuse that score.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr_graph::Genome;
use crate::snn::PlasticityRule;
use crate::task_cartpole::{self, CartPoleTaskConfig};
use crate::task_xor::{self, XorConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub rows: usize,
    pub cols: usize,
    /// Write a checkpoint every this many generations (0 disables periodic
    /// checkpoints; the final one is always written).
    pub checkpoint_every: usize,
}

impl EvolutionConfig {
    pub fn xor() -> Self {
        EvolutionConfig {
            mu: 20,
            lambda: 20,
            generations: 100,
            mutation_rate: 0.3,
            rows: 2,
            cols: 12,
            checkpoint_every: 10,
        }
    }

    pub fn cartpole() -> Self {
        EvolutionConfig {
            mu: 50,
            lambda: 50,
            ..Self::xor()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.lambda == 0 {
            return Err(Error::Config("evolution.mu and evolution.lambda must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config(format!(
                "evolution.mutation_rate must be in [0, 1], got {}",
                self.mutation_rate
            )));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("evolution.rows and evolution.cols must be at least 1".into()));
        }
        Ok(())
    }
}

/// The inner loop an evolution run optimizes for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Xor(XorConfig),
    Cartpole(CartPoleTaskConfig),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Xor(_) => "xor",
            Task::Cartpole(_) => "cartpole",
        }
    }

    /// Number of rule terminals offered to genomes.
    pub fn n_inputs(&self) -> usize {
        match self {
            Task::Xor(_) => 8,
            Task::Cartpole(_) => 10,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Task::Xor(c) => c.learning_rate,
            Task::Cartpole(c) => c.learning_rate,
        }
    }

    pub fn trials_per_fitness(&self) -> usize {
        match self {
            Task::Xor(c) => c.trials_per_fitness,
            Task::Cartpole(c) => c.trials_per_fitness,
        }
    }

    pub fn worst_fitness(&self) -> f64 {
        match self {
            Task::Xor(_) => 0.0,
            Task::Cartpole(_) => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Task::Xor(c) => c.validate(),
            Task::Cartpole(c) => c.validate(),
        }
    }

    pub fn fitness(&self, rule: &PlasticityRule, seeds: &[u64]) -> Result<f64> {
        match self {
            Task::Xor(c) => task_xor::fitness(rule, c, seeds),
            Task::Cartpole(c) => task_cartpole::fitness(rule, c, seeds),
        }
    }

    /// Final metric of one learning cycle (test accuracy or last-episode
    /// balance time).
    pub fn trial_metric(&self, rule: &PlasticityRule, seed: u64) -> Result<f64> {
        match self {
            Task::Xor(c) => Ok(task_xor::run_trial(rule, c, seed)?.final_test_accuracy()),
            Task::Cartpole(c) => Ok(task_cartpole::run_trial(rule, c, seed)?.last_mean(c.fitness_episodes)),
        }
    }

    pub fn genome_fitness(&self, genome: &Genome, seeds: &[u64]) -> Result<f64> {
        let rule = PlasticityRule::evolved(genome.clone(), self.learning_rate())?;
        self.fitness(&rule, seeds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
    pub birth: usize,
}

impl Individual {
    fn fitness_or_worst(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_expression: String,
}

pub fn write_log_csv<W: Write>(logs: &[GenerationLog], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["generation", "best_fitness", "mean_fitness", "best_expression"])?;
    for l in logs {
        wr.write_record([
            l.generation.to_string(),
            l.best_fitness.to_string(),
            l.mean_fitness.to_string(),
            l.best_expression.clone(),
        ])?;
    }
    wr.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}

/// `μ+λ` random, unevaluated individuals.
pub fn init_population<R: Rng + ?Sized>(cfg: &EvolutionConfig, n_inputs: usize, rng: &mut R) -> Vec<Individual> {
    (0..cfg.mu + cfg.lambda)
        .map(|_| Individual {
            genome: Genome::random(n_inputs, cfg.rows, cfg.cols, rng),
            fitness: None,
            birth: 0,
        })
        .collect()
}

/// Scores every unevaluated individual. Fitness values already known for
/// an identical simplified expression are reused from `cache`.
pub fn evaluate_population(
    pop: &mut [Individual],
    task: &Task,
    seeds: &[u64],
    cache: &mut HashMap<String, f64>,
    workers: usize,
) -> Result<()> {
    let mut pending: Vec<(String, Genome)> = Vec::new();
    for ind in pop.iter().filter(|i| i.fitness.is_none()) {
        let key = ind.genome.to_expression_string();
        if !cache.contains_key(&key) && !pending.iter().any(|(k, _)| *k == key) {
            pending.push((key, ind.genome.clone()));
        }
    }
    let score = |(key, genome): &(String, Genome)| -> Result<(String, f64)> {
        let f = task.genome_fitness(genome, seeds)?;
        Ok((key.clone(), if f.is_finite() { f } else { task.worst_fitness() }))
    };
    let scored: Vec<(String, f64)> = if workers <= 1 {
        pending.iter().map(score).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| pending.par_iter().map(score).collect::<Result<_>>())?
    };
    cache.extend(scored);
    for ind in pop.iter_mut().filter(|i| i.fitness.is_none()) {
        ind.fitness = Some(cache[&ind.genome.to_expression_string()]);
    }
    Ok(())
}

/// The `mu` fittest individuals. Ties prefer the younger individual, then
/// the lower population index.
pub fn select_parents(pop: &[Individual], mu: usize) -> Vec<Individual> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&pop[a], &pop[b]);
        y.fitness_or_worst()
            .total_cmp(&x.fitness_or_worst())
            .then(y.birth.cmp(&x.birth))
            .then(a.cmp(&b))
    });
    order.into_iter().take(mu).map(|k| pop[k].clone()).collect()
}

/// `lambda` offspring, each a mutated copy of a uniformly chosen parent.
pub fn reproduce<R: Rng + ?Sized>(
    parents: &[Individual],
    lambda: usize,
    rate: f64,
    birth: usize,
    rng: &mut R,
) -> Vec<Individual> {
    assert!(!parents.is_empty(), "reproduce needs at least one parent");
    (0..lambda)
        .map(|_| {
            let p = &parents[rng.gen_range(0..parents.len())];
            Individual {
                genome: p.genome.mutate(rate, rng),
                fitness: None,
                birth,
            }
        })
        .collect()
}

/// Fixed per-run trial seeds derived from the master seed.
pub fn fitness_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(1);
    (0..n).map(|_| rng.gen()).collect()
}

/// Resumable state of an evolution run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    /// Index of the next generation to evaluate.
    pub generation: usize,
    pub population: Vec<Individual>,
    pub logs: Vec<GenerationLog>,
    pub fitness_seeds: Vec<u64>,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))
    }
}

/// Identity of a run's configuration, for checking resumed checkpoints.
pub fn config_hash(task: &Task, cfg: &EvolutionConfig, master_seed: u64) -> String {
    let canonical = serde_json::json!({
        "task": task,
        "mu": cfg.mu,
        "lambda": cfg.lambda,
        "mutation_rate": cfg.mutation_rate,
        "rows": cfg.rows,
        "cols": cfg.cols,
        "seed": master_seed,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub best: Individual,
    pub logs: Vec<GenerationLog>,
    pub population: Vec<Individual>,
}

/// Evolution driver: evaluate, log, select, reproduce.
pub struct Evolution<'a> {
    task: &'a Task,
    cfg: &'a EvolutionConfig,
    workers: usize,
    state: Checkpoint,
    cache: HashMap<String, f64>,
}

impl<'a> Evolution<'a> {
    pub fn new(task: &'a Task, cfg: &'a EvolutionConfig, master_seed: u64, workers: usize) -> Result<Self> {
        task.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let population = init_population(cfg, task.n_inputs(), &mut rng);
        Ok(Evolution {
            task,
            cfg,
            workers,
            state: Checkpoint {
                config_hash: config_hash(task, cfg, master_seed),
                generation: 0,
                population,
                logs: Vec::new(),
                fitness_seeds: fitness_seeds(master_seed, task.trials_per_fitness()),
                rng,
            },
            cache: HashMap::new(),
        })
    }

    pub fn resume(
        task: &'a Task,
        cfg: &'a EvolutionConfig,
        master_seed: u64,
        workers: usize,
        checkpoint: Checkpoint,
    ) -> Result<Self> {
        task.validate()?;
        cfg.validate()?;
        let expected = config_hash(task, cfg, master_seed);
        if checkpoint.config_hash != expected {
            return Err(Error::Checkpoint(
                "checkpoint was written by a different configuration".into(),
            ));
        }
        if checkpoint.population.len() != cfg.mu + cfg.lambda
            || checkpoint.logs.len() != checkpoint.generation
        {
            return Err(Error::Checkpoint("checkpoint population or log is inconsistent".into()));
        }
        for ind in &checkpoint.population {
            ind.genome
                .validate()
                .map_err(|e| Error::Checkpoint(format!("checkpoint genome: {e}")))?;
            if ind.genome.n_inputs() != task.n_inputs() {
                return Err(Error::Checkpoint("checkpoint genome has wrong input count".into()));
            }
        }
        let mut cache = HashMap::new();
        for ind in &checkpoint.population {
            if let Some(f) = ind.fitness {
                cache.insert(ind.genome.to_expression_string(), f);
            }
        }
        Ok(Evolution {
            task,
            cfg,
            workers,
            state: checkpoint,
            cache,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn logs(&self) -> &[GenerationLog] {
        &self.state.logs
    }

    pub fn is_done(&self) -> bool {
        self.state.generation >= self.cfg.generations
    }

    /// Runs one generation: breed from the previous (fully evaluated) pool,
    /// evaluate and log. A finished run's state can therefore be extended
    /// with more generations.
    pub fn step(&mut self) -> Result<&GenerationLog> {
        let g = self.state.generation;
        if g > 0 && self.state.population.iter().all(|i| i.fitness.is_some()) {
            let parents = select_parents(&self.state.population, self.cfg.mu);
            let offspring = reproduce(&parents, self.cfg.lambda, self.cfg.mutation_rate, g, &mut self.state.rng);
            self.state.population = parents.into_iter().chain(offspring).collect();
        }
        evaluate_population(
            &mut self.state.population,
            self.task,
            &self.state.fitness_seeds,
            &mut self.cache,
            self.workers,
        )?;
        let best = select_parents(&self.state.population, 1).remove(0);
        let fits: Vec<f64> = self.state.population.iter().map(|i| i.fitness_or_worst()).collect();
        self.state.logs.push(GenerationLog {
            generation: g,
            best_fitness: best.fitness_or_worst(),
            mean_fitness: crate::stats::mean(&fits),
            best_expression: best.genome.to_expression_string(),
        });
        self.state.generation += 1;
        Ok(self.state.logs.last().expect("just pushed"))
    }

    /// Whether the state after the latest step is due for a periodic
    /// checkpoint.
    pub fn checkpoint_due(&self) -> bool {
        let g = self.state.generation;
        self.cfg.checkpoint_every > 0 && g % self.cfg.checkpoint_every == 0 && !self.is_done()
    }

    /// Consumes the driver; the best individual is taken from the final pool.
    pub fn finish(self) -> Result<EvolutionResult> {
        let best = select_parents(&self.state.population, 1)
            .pop()
            .ok_or_else(|| Error::Config("empty population".into()))?;
        Ok(EvolutionResult {
            best,
            logs: self.state.logs,
            population: self.state.population,
        })
    }

    /// Runs to completion. `on_checkpoint` sees the state every
    /// `checkpoint_every` generations and once at the end.
    pub fn run(mut self, mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>) -> Result<EvolutionResult> {
        while !self.is_done() {
            self.step()?;
            if self.checkpoint_due() {
                on_checkpoint(&self.state)?;
            }
        }
        on_checkpoint(&self.state)?;
        self.finish()
    }
}

/// Convenience wrapper around [`Evolution`] without checkpoint output.
pub fn run_evolution(task: &Task, cfg: &EvolutionConfig, master_seed: u64, workers: usize) -> Result<EvolutionResult> {
    Evolution::new(task, cfg, master_seed, workers)?.run(|_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(f: f64, birth: usize) -> Individual {
        let mut rng = ChaCha8Rng::seed_from_u64(birth as u64);
        Individual {
            genome: Genome::random(8, 2, 12, &mut rng),
            fitness: Some(f),
            birth,
        }
    }

    #[test]
    fn selects_top_mu() {
        let pop = vec![ind(0.9, 0), ind(0.5, 0), ind(0.7, 0), ind(0.9, 0)];
        let sel = select_parents(&pop, 2);
        assert!(sel.iter().all(|i| i.fitness == Some(0.9)));
        assert_eq!(sel[0], pop[0]);
        assert_eq!(sel[1], pop[3]);
    }

    #[test]
    fn ties_prefer_younger() {
        let pop = vec![ind(0.5, 0), ind(0.5, 3), ind(0.5, 1), ind(0.5, 3)];
        let sel = select_parents(&pop, 2);
        assert_eq!(sel, vec![pop[1].clone(), pop[3].clone()]);
    }

    #[test]
    fn reproduce_counts_and_identity_at_zero_rate() {
        let parents: Vec<Individual> = (0..20).map(|k| ind(0.1, k)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kids = reproduce(&parents, 20, 0.0, 7, &mut rng);
        assert_eq!(kids.len(), 20);
        for k in &kids {
            assert!(parents.iter().any(|p| p.genome == k.genome));
            assert_eq!(k.birth, 7);
            assert!(k.fitness.is_none());
        }
    }

    #[test]
    fn init_sizes_follow_task() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xor = init_population(&EvolutionConfig::xor(), Task::Xor(XorConfig::default()).n_inputs(), &mut rng);
        assert_eq!(xor.len(), 40);
        assert!(xor.iter().all(|i| i.genome.n_inputs() == 8 && i.fitness.is_none()));
        let cp = init_population(
            &EvolutionConfig::cartpole(),
            Task::Cartpole(CartPoleTaskConfig::default()).n_inputs(),
            &mut rng,
        );
        assert_eq!(cp.len(), 100);
        assert!(cp.iter().all(|i| i.genome.n_inputs() == 10));
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = EvolutionConfig::xor();
        let a = init_population(&cfg, 8, &mut ChaCha8Rng::seed_from_u64(5));
        let b = init_population(&cfg, 8, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_checkpoint_is_reported() {
        assert!(matches!(Checkpoint::from_json("{\"generation\": 3"), Err(Error::Checkpoint(_))));
    }
}
