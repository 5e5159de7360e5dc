use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr_graph::{ExpressionTree, Genome, Program};

/// Local signals a plasticity rule may read, in genome input order.
///
/// The first eight are the XOR terminal set; cart-pole adds `w0` and `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Elig,
    Reward,
    PostSpike,
    PreSpike,
    PostTrace1,
    PostTrace2,
    PreTrace1,
    PreTrace2,
    InitialWeight,
    Time,
}

impl Terminal {
    pub const ALL: [Terminal; 10] = [
        Terminal::Elig,
        Terminal::Reward,
        Terminal::PostSpike,
        Terminal::PreSpike,
        Terminal::PostTrace1,
        Terminal::PostTrace2,
        Terminal::PreTrace1,
        Terminal::PreTrace2,
        Terminal::InitialWeight,
        Terminal::Time,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Elig => "E",
            Terminal::Reward => "R",
            Terminal::PostSpike => "S_i",
            Terminal::PreSpike => "S_j",
            Terminal::PostTrace1 => "e_i1",
            Terminal::PostTrace2 => "e_i2",
            Terminal::PreTrace1 => "e_j1",
            Terminal::PreTrace2 => "e_j2",
            Terminal::InitialWeight => "w0",
            Terminal::Time => "t",
        }
    }

    /// Name of genome input `i` under the standard terminal order.
    pub fn name_of_index(i: usize) -> String {
        Terminal::ALL
            .get(i)
            .map(|t| t.name().to_string())
            .unwrap_or_else(|| format!("x{i}"))
    }
}

/// Per-synapse inputs to a plasticity rule at one timestep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalSignals {
    pub elig: f64,
    pub reward: f64,
    pub s_post: f64,
    pub s_pre: f64,
    pub e_post_1: f64,
    pub e_post_2: f64,
    pub e_pre_1: f64,
    pub e_pre_2: f64,
    pub w0: f64,
    pub t: f64,
}

impl LocalSignals {
    #[inline]
    pub fn get(&self, t: Terminal) -> f64 {
        match t {
            Terminal::Elig => self.elig,
            Terminal::Reward => self.reward,
            Terminal::PostSpike => self.s_post,
            Terminal::PreSpike => self.s_pre,
            Terminal::PostTrace1 => self.e_post_1,
            Terminal::PostTrace2 => self.e_post_2,
            Terminal::PreTrace1 => self.e_pre_1,
            Terminal::PreTrace2 => self.e_pre_2,
            Terminal::InitialWeight => self.w0,
            Terminal::Time => self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        Terminal::ALL.iter().all(|&t| self.get(t).is_finite())
    }
}

/// Hand-coded rules available by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRule {
    /// `R·E`
    Mstdpet,
    /// `R·E·w0`
    MultRstdp,
    /// `E·(S_j + R) + S_j`
    XorBest,
    /// `R·w0·(E − 1)`
    CartpoleSimilar,
    /// `t·R·E·w0²`
    CartpoleBest,
    /// `0`: no plasticity.
    Null,
}

impl NamedRule {
    pub const ALL: [NamedRule; 6] = [
        NamedRule::Mstdpet,
        NamedRule::MultRstdp,
        NamedRule::XorBest,
        NamedRule::CartpoleSimilar,
        NamedRule::CartpoleBest,
        NamedRule::Null,
    ];

    pub fn id(self) -> &'static str {
        match self {
            NamedRule::Mstdpet => "mstdpet",
            NamedRule::MultRstdp => "mult_rstdp",
            NamedRule::XorBest => "xor_best",
            NamedRule::CartpoleSimilar => "cartpole_similar",
            NamedRule::CartpoleBest => "cartpole_best",
            NamedRule::Null => "null",
        }
    }

    pub fn known_names() -> String {
        NamedRule::ALL.map(|r| r.id()).join(", ")
    }

    /// The rule expression `f` (before scaling by the learning rate).
    #[inline]
    pub fn eval(self, s: &LocalSignals) -> f64 {
        match self {
            NamedRule::Mstdpet => s.elig * s.reward,
            NamedRule::MultRstdp => s.reward * s.elig * s.w0,
            NamedRule::XorBest => s.elig * (s.s_pre + s.reward) + s.s_pre,
            NamedRule::CartpoleSimilar => s.reward * s.w0 * (s.elig - 1.0),
            NamedRule::CartpoleBest => s.t * s.reward * s.elig * s.w0 * s.w0,
            NamedRule::Null => 0.0,
        }
    }

    /// Equivalent genome shipped alongside the closure.
    pub fn genome(self) -> Genome {
        let src = match self {
            NamedRule::Mstdpet => include_str!("../../rules/mstdpet.json"),
            NamedRule::MultRstdp => include_str!("../../rules/mult_rstdp.json"),
            NamedRule::XorBest => include_str!("../../rules/xor_best.json"),
            NamedRule::CartpoleSimilar => include_str!("../../rules/cartpole_similar.json"),
            NamedRule::CartpoleBest => include_str!("../../rules/cartpole_best.json"),
            NamedRule::Null => include_str!("../../rules/null.json"),
        };
        serde_json::from_str(src).expect("shipped rule genome is valid")
    }
}

impl fmt::Display for NamedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for NamedRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedRule::ALL
            .into_iter()
            .find(|r| r.id() == s)
            .ok_or_else(|| Error::UnknownRule {
                name: s.to_string(),
                known: NamedRule::known_names(),
            })
    }
}

/// A genome together with the terminal each of its inputs reads.
#[derive(Clone, Debug)]
pub struct EvolvedRule {
    genome: Genome,
    terminals: Vec<Terminal>,
    program: Program,
}

impl EvolvedRule {
    /// Maps genome inputs onto the standard terminal order.
    pub fn new(genome: Genome) -> Result<Self> {
        let n = genome.n_inputs();
        if n > Terminal::ALL.len() {
            return Err(Error::Config(format!(
                "genome has {n} inputs but only {} local signals exist",
                Terminal::ALL.len()
            )));
        }
        Self::with_terminals(genome, Terminal::ALL[..n].to_vec())
    }

    pub fn with_terminals(genome: Genome, terminals: Vec<Terminal>) -> Result<Self> {
        if terminals.len() != genome.n_inputs() {
            return Err(Error::Config(format!(
                "terminal map covers {} of {} genome inputs",
                terminals.len(),
                genome.n_inputs()
            )));
        }
        for (i, t) in terminals.iter().enumerate() {
            if terminals[..i].contains(t) {
                return Err(Error::Config(format!(
                    "terminal {} mapped to more than one genome input",
                    t.name()
                )));
            }
        }
        let program = genome.compile();
        Ok(EvolvedRule {
            genome,
            terminals,
            program,
        })
    }

    pub fn genome(&self) -> &Genome {
        &self.genome
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn expression(&self) -> String {
        let names: Vec<&str> = self.terminals.iter().map(|t| t.name()).collect();
        self.genome.to_expression_string_with(&names)
    }
}

/// A rule given as an infix expression over the terminal names.
#[derive(Clone, Debug)]
pub struct ExpressionRule {
    tree: ExpressionTree,
    program: Program,
}

impl ExpressionRule {
    pub fn parse(text: &str) -> Result<Self> {
        let names: Vec<&str> = Terminal::ALL.iter().map(|t| t.name()).collect();
        let tree = ExpressionTree::parse(text, &names)?;
        let program = Program::from_tree(&tree, names.len());
        Ok(ExpressionRule { tree, program })
    }

    pub fn tree(&self) -> &ExpressionTree {
        &self.tree
    }

    pub fn expression(&self) -> String {
        let names: Vec<&str> = Terminal::ALL.iter().map(|t| t.name()).collect();
        self.tree.render(&names)
    }
}

#[derive(Clone, Debug)]
pub enum RuleKind {
    Named(NamedRule),
    Evolved(EvolvedRule),
    Expression(ExpressionRule),
}

#[derive(Clone, Debug)]
pub struct PlasticityRule {
    pub kind: RuleKind,
    pub learning_rate: f64,
}

impl PlasticityRule {
    pub fn named(rule: NamedRule, learning_rate: f64) -> Self {
        PlasticityRule {
            kind: RuleKind::Named(rule),
            learning_rate,
        }
    }

    pub fn evolved(genome: Genome, learning_rate: f64) -> Result<Self> {
        Ok(PlasticityRule {
            kind: RuleKind::Evolved(EvolvedRule::new(genome)?),
            learning_rate,
        })
    }

    /// Human-readable rule expression.
    pub fn expression(&self) -> String {
        match &self.kind {
            RuleKind::Named(n) => n.genome().to_expression_string(),
            RuleKind::Evolved(e) => e.expression(),
            RuleKind::Expression(e) => e.expression(),
        }
    }

    pub fn expression_rule(text: &str, learning_rate: f64) -> Result<Self> {
        Ok(PlasticityRule {
            kind: RuleKind::Expression(ExpressionRule::parse(text)?),
            learning_rate,
        })
    }

    pub fn evaluator(&self) -> RuleEvaluator<'_> {
        let kind = match &self.kind {
            RuleKind::Named(n) => EvalKind::Named(*n),
            RuleKind::Evolved(e) => compiled(&e.program, &e.terminals),
            RuleKind::Expression(e) => compiled(&e.program, &Terminal::ALL),
        };
        RuleEvaluator {
            learning_rate: self.learning_rate,
            kind,
        }
    }

    /// `Δw = γ·f(signals)`.
    pub fn apply(&self, sig: &LocalSignals) -> f64 {
        self.evaluator().delta(sig)
    }
}

/// Reusable scratch space for evaluating a rule many times.
pub struct RuleEvaluator<'a> {
    learning_rate: f64,
    kind: EvalKind<'a>,
}

fn compiled<'a>(program: &'a Program, terminals: &[Terminal]) -> EvalKind<'a> {
    EvalKind::Program {
        loads: program.used_inputs().into_iter().map(|i| (i, terminals[i])).collect(),
        regs: vec![0.0; program.register_count()],
        columns: Vec::new(),
        program,
    }
}

enum EvalKind<'a> {
    Named(NamedRule),
    /// Only the terminals the program reads are loaded into `regs`.
    Program {
        program: &'a Program,
        loads: Vec<(usize, Terminal)>,
        regs: Vec<f64>,
        columns: Vec<f64>,
    },
}

impl RuleEvaluator<'_> {
    #[inline]
    pub fn delta(&mut self, sig: &LocalSignals) -> f64 {
        let f = match &mut self.kind {
            EvalKind::Named(n) => n.eval(sig),
            EvalKind::Program {
                program, loads, regs, ..
            } => {
                for &(slot, t) in loads.iter() {
                    regs[slot] = sig.get(t);
                }
                program.eval_in(regs)
            }
        };
        self.learning_rate * f
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Rule values (before the learning rate) for `n` synapses at once, or
    /// `None` for built-in rules. `load(t, column)` must write terminal `t`
    /// of every synapse into `column`; only terminals the rule reads are
    /// requested.
    pub(crate) fn columns(&mut self, n: usize, mut load: impl FnMut(Terminal, &mut [f64])) -> Option<&[f64]> {
        let EvalKind::Program {
            program,
            loads,
            columns,
            ..
        } = &mut self.kind
        else {
            return None;
        };
        columns.resize(program.register_count() * n, 0.0);
        for &(slot, t) in loads.iter() {
            load(t, &mut columns[slot * n..(slot + 1) * n]);
        }
        Some(program.eval_columns(columns, n))
    }
}

/// Serializable reference to a rule: a built-in name, an explicit genome or
/// an infix expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    Named(NamedRule),
    Genome(Genome),
    Expression(String),
}

impl RuleSpec {
    pub fn to_rule(&self, learning_rate: f64) -> Result<PlasticityRule> {
        match self {
            RuleSpec::Named(n) => Ok(PlasticityRule::named(*n, learning_rate)),
            RuleSpec::Genome(g) => PlasticityRule::evolved(g.clone(), learning_rate),
            RuleSpec::Expression(e) => PlasticityRule::expression_rule(e, learning_rate),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RuleSpec::Named(n) => n.id().to_string(),
            RuleSpec::Genome(g) => g.to_expression_string(),
            RuleSpec::Expression(e) => e.clone(),
        }
    }
}
