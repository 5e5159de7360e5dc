use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evoplast::cli::{self, ReplaySummary, RunConfig, TaskName};
use evoplast::snn::RuleSpec;
use evoplast::{Error, Result};

/// Evolve and evaluate plasticity rules for spiking networks.
#[derive(Parser)]
#[command(name = "evoplast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; missing keys take the task defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task whose defaults to use (must agree with --config).
    #[arg(long, value_enum)]
    task: Option<TaskName>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for fitness evaluation.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RuleArg {
    /// Built-in rule name or genome JSON file.
    #[arg(long, conflicts_with = "expression", required_unless_present = "expression")]
    rule: Option<String>,
    /// Rule as an infix expression over E, R, S_i, S_j, e_i1, e_i2, e_j1, e_j2, w0, t.
    #[arg(long)]
    expression: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolutionary search.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        mu: Option<usize>,
        #[arg(long)]
        lambda: Option<usize>,
        /// Continue from checkpoint.json in the output directory if present.
        #[arg(long)]
        resume: bool,
    },
    /// Run independent learning cycles of one rule and report mean and IQR.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 50)]
        n_runs: usize,
    },
    /// Re-simulate one learning cycle (trial seed = --seed) and export
    /// before/after rasters or trajectories.
    Replay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rule: RuleArg,
    },
    /// Print the expression of a built-in rule or genome file.
    PrintRule {
        /// Built-in rule name or genome JSON file.
        rule: String,
    },
    /// Print the default configuration of a task.
    Config {
        #[arg(long, value_enum, default_value = "xor")]
        task: TaskName,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            if let Some(t) = c.task {
                if t != cfg.task_name() {
                    return Err(Error::Config(format!(
                        "--task {} disagrees with task \"{}\" in {}",
                        t.as_str(),
                        cfg.task_name().as_str(),
                        path.display()
                    )));
                }
            }
            cfg
        }
        None => RunConfig::defaults(c.task.unwrap_or(TaskName::Xor)),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rule_spec(r: &RuleArg) -> Result<RuleSpec> {
    match (&r.rule, &r.expression) {
        (_, Some(e)) => Ok(RuleSpec::Expression(e.clone())),
        (Some(name), None) => cli::resolve_rule(name),
        (None, None) => Err(Error::Config("one of --rule or --expression is required".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve {
            common,
            generations,
            mu,
            lambda,
            resume,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(g) = generations {
                cfg.evolution.generations = g;
            }
            if let Some(m) = mu {
                cfg.evolution.mu = m;
            }
            if let Some(l) = lambda {
                cfg.evolution.lambda = l;
            }
            let summary = cli::cmd_evolve(&cfg, resume, |log| {
                eprintln!(
                    "generation {:>4}  best {:.4}  mean {:.4}  {}",
                    log.generation, log.best_fitness, log.mean_fitness, log.best_expression
                );
            })?;
            if let Some(g) = summary.resumed_from {
                eprintln!("resumed from generation {g}");
            }
            println!("best fitness {:.4}: {}", summary.best.fitness, summary.best.expression);
            println!("results in {}", cfg.out.display());
        }
        Command::Validate { common, rule, n_runs } => {
            let cfg = load_config(&common)?;
            let spec = rule_spec(&rule)?;
            let report = cli::cmd_validate(&cfg, &spec, n_runs)?;
            println!(
                "{} on {}: mean {:.4}  median {:.4}  IQR [{:.4}, {:.4}]  ({} runs)",
                report.expression,
                report.task,
                report.mean,
                report.median,
                report.q1,
                report.q3,
                report.values.len()
            );
            println!("results in {}", cfg.out.display());
        }
        Command::Replay { common, rule } => {
            let cfg = load_config(&common)?;
            let spec = rule_spec(&rule)?;
            match cli::cmd_replay(&cfg, &spec)? {
                ReplaySummary::Xor {
                    before,
                    after,
                    final_test_accuracy,
                } => {
                    println!("output spikes for inputs 00 01 10 11");
                    println!("  before: {before:?}");
                    println!("  after:  {after:?}");
                    println!("final test accuracy {final_test_accuracy:.2}");
                }
                ReplaySummary::CartPole {
                    before_balance,
                    after_balance,
                    ..
                } => {
                    println!("balance time before {before_balance}, after {after_balance}");
                }
            }
            println!("results in {}", cfg.out.display());
        }
        Command::PrintRule { rule } => println!("{}", cli::cmd_print_rule(&rule)?),
        Command::Config { task } => println!("{}", RunConfig::defaults(task).to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
