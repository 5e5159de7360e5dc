//! Cartesian genetic programs encoding synaptic plasticity rules.
//!
//! A [`Genome`] is a `rows × cols` grid of function nodes laid out in
//! column-major order. Node `k` lives in column `k / rows` and may read from
//! any input terminal or any node in a strictly earlier column. Addresses are
//! shared between terminals and nodes: `0..n_inputs` are terminals and
//! `n_inputs + k` is internal node `k`.
//!
//! Only the nodes reachable from the output gene contribute to the phenotype;
//! the rest drift neutrally under mutation.

mod program;
mod tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use program::Program;
pub use tree::ExpressionTree;

/// Node outputs are clamped to `[-CLAMP, CLAMP]`.
pub const CLAMP: f64 = 1e6;

/// Protected division falls back to `1.0` below this denominator magnitude.
pub const DIV_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    Add,
    Sub,
    Mul,
    ProtectedDiv,
    ConstantOne,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::Add,
        OperatorKind::Sub,
        OperatorKind::Mul,
        OperatorKind::ProtectedDiv,
        OperatorKind::ConstantOne,
    ];

    pub fn arity(self) -> usize {
        match self {
            OperatorKind::ConstantOne => 0,
            _ => 2,
        }
    }

    /// Stable integer code used in serialized genomes.
    pub fn code(self) -> u32 {
        match self {
            OperatorKind::Add => 0,
            OperatorKind::Sub => 1,
            OperatorKind::Mul => 2,
            OperatorKind::ProtectedDiv => 3,
            OperatorKind::ConstantOne => 4,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OperatorKind::Add => "+",
            OperatorKind::Sub => "-",
            OperatorKind::Mul => "*",
            OperatorKind::ProtectedDiv => "/",
            OperatorKind::ConstantOne => "1",
        }
    }

    /// Applies the operator, including protected division and output clamping.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            OperatorKind::Add => a + b,
            OperatorKind::Sub => a - b,
            OperatorKind::Mul => a * b,
            OperatorKind::ProtectedDiv => {
                if b.abs() >= DIV_EPSILON {
                    a / b
                } else {
                    1.0
                }
            }
            OperatorKind::ConstantOne => 1.0,
        };
        v.clamp(-CLAMP, CLAMP)
    }
}

/// One function node: operator plus two connection genes.
///
/// Connection genes are kept even for arity-0 operators so that a later
/// operator mutation can reactivate them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeGene {
    pub op: OperatorKind,
    pub in_a: usize,
    pub in_b: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GenomeRepr", into = "GenomeRepr")]
pub struct Genome {
    n_inputs: usize,
    rows: usize,
    cols: usize,
    nodes: Vec<NodeGene>,
    output: usize,
}

/// On-disk layout: `genes` holds `op, in_a, in_b` for every node.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenomeRepr {
    n_inputs: usize,
    rows: usize,
    cols: usize,
    genes: Vec<u64>,
    output: usize,
}

impl From<Genome> for GenomeRepr {
    fn from(g: Genome) -> Self {
        let genes = g
            .nodes
            .iter()
            .flat_map(|n| [n.op.code() as u64, n.in_a as u64, n.in_b as u64])
            .collect();
        GenomeRepr {
            n_inputs: g.n_inputs,
            rows: g.rows,
            cols: g.cols,
            genes,
            output: g.output,
        }
    }
}

impl TryFrom<GenomeRepr> for Genome {
    type Error = Error;

    fn try_from(r: GenomeRepr) -> Result<Self> {
        if r.genes.len() % 3 != 0 {
            return Err(Error::InvalidGenome(format!(
                "gene list length {} is not a multiple of 3",
                r.genes.len()
            )));
        }
        let nodes = r
            .genes
            .chunks_exact(3)
            .map(|c| {
                let op = u32::try_from(c[0])
                    .ok()
                    .and_then(OperatorKind::from_code)
                    .ok_or_else(|| Error::InvalidGenome(format!("unknown operator code {}", c[0])))?;
                Ok(NodeGene {
                    op,
                    in_a: c[1] as usize,
                    in_b: c[2] as usize,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Genome::new(r.n_inputs, r.rows, r.cols, nodes, r.output)
    }
}

impl Genome {
    /// Builds a genome from explicit genes, rejecting anything that violates
    /// the column-ordering invariants.
    pub fn new(
        n_inputs: usize,
        rows: usize,
        cols: usize,
        nodes: Vec<NodeGene>,
        output: usize,
    ) -> Result<Self> {
        let g = Genome {
            n_inputs,
            rows,
            cols,
            nodes,
            output,
        };
        g.validate()?;
        Ok(g)
    }

    /// Draws every gene uniformly from its legal range.
    ///
    /// # Panics
    ///
    /// Panics if `n_inputs`, `rows` or `cols` is zero.
    pub fn random<R: Rng + ?Sized>(n_inputs: usize, rows: usize, cols: usize, rng: &mut R) -> Self {
        assert!(n_inputs >= 1 && rows >= 1 && cols >= 1, "empty genome shape");
        let nodes = (0..rows * cols)
            .map(|k| {
                let bound = n_inputs + (k / rows) * rows;
                NodeGene {
                    op: OperatorKind::ALL[rng.gen_range(0..OperatorKind::ALL.len())],
                    in_a: rng.gen_range(0..bound),
                    in_b: rng.gen_range(0..bound),
                }
            })
            .collect();
        let output = rng.gen_range(0..n_inputs + rows * cols);
        Genome {
            n_inputs,
            rows,
            cols,
            nodes,
            output,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn output(&self) -> usize {
        self.output
    }

    /// Exclusive upper bound on the addresses node `k` may connect to.
    pub fn connection_bound(&self, k: usize) -> usize {
        self.n_inputs + (k / self.rows) * self.rows
    }

    pub fn address_count(&self) -> usize {
        self.n_inputs + self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGenome(format!(
                "shape must be non-empty (n_inputs={}, rows={}, cols={})",
                self.n_inputs, self.rows, self.cols
            )));
        }
        if self.nodes.len() != self.rows * self.cols {
            return Err(Error::InvalidGenome(format!(
                "expected {} nodes for a {}x{} grid, found {}",
                self.rows * self.cols,
                self.rows,
                self.cols,
                self.nodes.len()
            )));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            let bound = self.connection_bound(k);
            if node.in_a >= bound || node.in_b >= bound {
                return Err(Error::InvalidGenome(format!(
                    "node {k} connects to ({}, {}) but may only address 0..{bound}",
                    node.in_a, node.in_b
                )));
            }
        }
        if self.output >= self.address_count() {
            return Err(Error::InvalidGenome(format!(
                "output gene {} out of range 0..{}",
                self.output,
                self.address_count()
            )));
        }
        Ok(())
    }

    /// Indices of internal nodes reachable from the output gene, ascending.
    pub fn active_nodes(&self) -> Vec<usize> {
        let mut active = vec![false; self.nodes.len()];
        let mut stack = vec![self.output];
        while let Some(addr) = stack.pop() {
            if addr < self.n_inputs {
                continue;
            }
            let k = addr - self.n_inputs;
            if active[k] {
                continue;
            }
            active[k] = true;
            let node = &self.nodes[k];
            if node.op.arity() == 2 {
                stack.push(node.in_a);
                stack.push(node.in_b);
            }
        }
        active
            .iter()
            .enumerate()
            .filter_map(|(k, &a)| a.then_some(k))
            .collect()
    }

    /// Evaluates the active subgraph on one input vector.
    pub fn evaluate(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.n_inputs {
            return Err(Error::InputArity {
                expected: self.n_inputs,
                got: inputs.len(),
            });
        }
        Ok(self.compile().eval(inputs))
    }

    /// Lowers the active subgraph into a straight-line register program.
    pub fn compile(&self) -> Program {
        Program::from_genome(self)
    }

    pub fn decode_active(&self) -> ExpressionTree {
        ExpressionTree::decode(self, self.output)
    }

    /// Returns a mutated copy: each gene is resampled from its legal range
    /// independently with probability `rate`.
    pub fn mutate<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Genome {
        let rate = rate.clamp(0.0, 1.0);
        let mut child = self.clone();
        for k in 0..child.nodes.len() {
            let bound = child.connection_bound(k);
            let node = &mut child.nodes[k];
            if rng.gen_bool(rate) {
                node.op = OperatorKind::ALL[rng.gen_range(0..OperatorKind::ALL.len())];
            }
            if rng.gen_bool(rate) {
                node.in_a = rng.gen_range(0..bound);
            }
            if rng.gen_bool(rate) {
                node.in_b = rng.gen_range(0..bound);
            }
        }
        if rng.gen_bool(rate) {
            child.output = rng.gen_range(0..child.address_count());
        }
        child
    }

    /// Canonical infix rendering of the simplified active subgraph, using
    /// the plasticity terminal names.
    pub fn to_expression_string(&self) -> String {
        let names: Vec<String> = (0..self.n_inputs)
            .map(|i| crate::snn::Terminal::name_of_index(i))
            .collect();
        self.to_expression_string_with(&names)
    }

    pub fn to_expression_string_with<S: AsRef<str>>(&self, names: &[S]) -> String {
        self.decode_active().simplify().render(names)
    }
}
