use super::{ExpressionTree, Genome, OperatorKind, CLAMP};

#[derive(Clone, Copy, Debug)]
enum Instr {
    Op { op: OperatorKind, a: usize, b: usize },
    Load(f64),
}

/// Straight-line form of a genome's active nodes (or of an expression tree).
///
/// Registers `0..n_inputs` hold the terminals; instruction `i` writes
/// register `n_inputs + i`. Inner training loops evaluate the rule for every
/// synapse at every timestep, so this avoids re-walking the graph.
#[derive(Clone, Debug)]
pub struct Program {
    n_inputs: usize,
    instrs: Vec<Instr>,
    output: usize,
}

impl Program {
    pub(super) fn from_genome(g: &Genome) -> Self {
        let active = g.active_nodes();
        let mut reg_of = vec![usize::MAX; g.nodes().len()];
        let n = g.n_inputs();
        let map = |addr: usize, reg_of: &[usize]| {
            if addr < n {
                addr
            } else {
                reg_of[addr - n]
            }
        };
        let mut instrs = Vec::with_capacity(active.len());
        for (i, &k) in active.iter().enumerate() {
            let node = g.nodes()[k];
            let (a, b) = if node.op.arity() == 2 {
                (map(node.in_a, &reg_of), map(node.in_b, &reg_of))
            } else {
                (0, 0)
            };
            instrs.push(Instr::Op { op: node.op, a, b });
            reg_of[k] = n + i;
        }
        Program {
            n_inputs: n,
            output: map(g.output(), &reg_of),
            instrs,
        }
    }

    /// Compiles a tree over `n_inputs` terminals. Shared subtrees are not
    /// merged.
    pub fn from_tree(tree: &ExpressionTree, n_inputs: usize) -> Self {
        fn emit(t: &ExpressionTree, n: usize, instrs: &mut Vec<Instr>) -> usize {
            match t {
                ExpressionTree::Input(i) => *i,
                ExpressionTree::Const(c) => {
                    instrs.push(Instr::Load(*c));
                    n + instrs.len() - 1
                }
                ExpressionTree::Binary(op, a, b) => {
                    let a = emit(a, n, instrs);
                    let b = emit(b, n, instrs);
                    instrs.push(Instr::Op { op: *op, a, b });
                    n + instrs.len() - 1
                }
            }
        }
        let mut instrs = Vec::new();
        let output = emit(tree, n_inputs, &mut instrs);
        Program {
            n_inputs,
            instrs,
            output,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Number of scratch registers [`Program::eval_in`] needs.
    pub fn register_count(&self) -> usize {
        self.n_inputs + self.instrs.len()
    }

    /// Input registers the program reads, ascending.
    pub fn used_inputs(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_inputs];
        for ins in &self.instrs {
            if let Instr::Op { op, a, b } = *ins {
                if op.arity() == 2 {
                    for r in [a, b] {
                        if r < self.n_inputs {
                            used[r] = true;
                        }
                    }
                }
            }
        }
        if self.output < self.n_inputs {
            used[self.output] = true;
        }
        (0..self.n_inputs).filter(|&i| used[i]).collect()
    }

    /// Evaluates with a freshly allocated register file.
    pub fn eval(&self, inputs: &[f64]) -> f64 {
        let mut regs = vec![0.0; self.register_count()];
        regs[..self.n_inputs].copy_from_slice(&inputs[..self.n_inputs]);
        self.eval_in(&mut regs)
    }

    /// Evaluates in place; the caller has already written the terminals into
    /// `regs[..n_inputs]`.
    #[inline]
    pub fn eval_in(&self, regs: &mut [f64]) -> f64 {
        let n = self.n_inputs;
        for (i, ins) in self.instrs.iter().enumerate() {
            regs[n + i] = match *ins {
                Instr::Op { op, a, b } => op.apply(regs[a], regs[b]),
                Instr::Load(c) => c,
            };
        }
        regs[self.output]
    }

    /// Evaluates `n` independent cases at once. Register `r` of case `k`
    /// lives at `regs[r * n + k]`; the caller fills the input registers it
    /// needs. Returns the output column. Each case goes through the same
    /// operations as [`Program::eval_in`], so results are bit-identical.
    pub fn eval_columns<'r>(&self, regs: &'r mut [f64], n: usize) -> &'r [f64] {
        let base = self.n_inputs;
        for (i, ins) in self.instrs.iter().enumerate() {
            let (src, rest) = regs.split_at_mut((base + i) * n);
            let dst = &mut rest[..n];
            match *ins {
                Instr::Load(c) => dst.fill(c),
                Instr::Op { op, a, b } => {
                    let (a, b) = (&src[a * n..(a + 1) * n], &src[b * n..(b + 1) * n]);
                    match op {
                        OperatorKind::Add => zip_apply(dst, a, b, |x, y| x + y),
                        OperatorKind::Sub => zip_apply(dst, a, b, |x, y| x - y),
                        OperatorKind::Mul => zip_apply(dst, a, b, |x, y| x * y),
                        _ => zip_apply(dst, a, b, |x, y| op.apply(x, y)),
                    }
                }
            }
        }
        &regs[self.output * n..(self.output + 1) * n]
    }
}

#[inline]
fn zip_apply(dst: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for ((d, &x), &y) in dst.iter_mut().zip(a).zip(b) {
        *d = f(x, y).clamp(-CLAMP, CLAMP);
    }
}

