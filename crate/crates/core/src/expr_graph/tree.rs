use std::fmt::Write as _;

use super::{Genome, OperatorKind};
use crate::error::{Error, Result};

/// Decoded view of a genome's active subgraph.
///
/// Shared sub-expressions in the graph are duplicated in the tree.
#[derive(Clone, Debug, PartialEq)]
pub enum ExpressionTree {
    Input(usize),
    Const(f64),
    Binary(OperatorKind, Box<ExpressionTree>, Box<ExpressionTree>),
}

impl ExpressionTree {
    pub(super) fn decode(g: &Genome, addr: usize) -> Self {
        if addr < g.n_inputs() {
            return ExpressionTree::Input(addr);
        }
        let node = g.nodes()[addr - g.n_inputs()];
        match node.op {
            OperatorKind::ConstantOne => ExpressionTree::Const(1.0),
            op => ExpressionTree::Binary(
                op,
                Box::new(Self::decode(g, node.in_a)),
                Box::new(Self::decode(g, node.in_b)),
            ),
        }
    }

    pub fn eval(&self, inputs: &[f64]) -> f64 {
        match self {
            ExpressionTree::Input(i) => inputs[*i],
            ExpressionTree::Const(c) => *c,
            ExpressionTree::Binary(op, a, b) => op.apply(a.eval(inputs), b.eval(inputs)),
        }
    }

    /// Folds constant subtrees and drops neutral elements (`x*1`, `x+0`,
    /// `x-0`, `x/1`). The result evaluates bit-identically to `self`.
    pub fn simplify(&self) -> ExpressionTree {
        use ExpressionTree::*;
        use OperatorKind::*;
        match self {
            Input(_) | Const(_) => self.clone(),
            Binary(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (op, &a, &b) {
                    (_, Const(x), Const(y)) => Const(op.apply(*x, *y)),
                    (Mul, x, Const(c)) | (Mul, Const(c), x) if *c == 1.0 => x.clone(),
                    (Add, x, Const(c)) | (Add, Const(c), x) if *c == 0.0 => x.clone(),
                    (Sub, x, Const(c)) if *c == 0.0 => x.clone(),
                    (ProtectedDiv, x, Const(c)) if *c == 1.0 => x.clone(),
                    (ProtectedDiv, _, Const(c)) if c.abs() < super::DIV_EPSILON => Const(1.0),
                    _ => Binary(*op, Box::new(a), Box::new(b)),
                }
            }
        }
    }

    /// Parses the infix form produced by [`ExpressionTree::render`].
    /// `names[i]` is the spelling of input `i`; `x<i>` is also accepted.
    pub fn parse<S: AsRef<str>>(text: &str, names: &[S]) -> Result<ExpressionTree> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            names: names.iter().map(|n| n.as_ref()).collect(),
        };
        let t = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(t)
    }

    pub fn node_count(&self) -> usize {
        match self {
            ExpressionTree::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
            _ => 1,
        }
    }

    /// Infix rendering. `+`/`-` are spaced, `*`/`/` are not; the right
    /// operand is parenthesized at equal precedence so that left-associative
    /// parsing rebuilds exactly this tree.
    pub fn render<S: AsRef<str>>(&self, names: &[S]) -> String {
        let mut out = String::new();
        self.render_into(names, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            ExpressionTree::Binary(OperatorKind::Add | OperatorKind::Sub, ..) => 1,
            ExpressionTree::Binary(..) => 2,
            _ => 3,
        }
    }

    fn render_into<S: AsRef<str>>(&self, names: &[S], out: &mut String) {
        match self {
            ExpressionTree::Input(i) => match names.get(*i) {
                Some(n) => out.push_str(n.as_ref()),
                None => {
                    let _ = write!(out, "x{i}");
                }
            },
            ExpressionTree::Const(c) => {
                if *c < 0.0 {
                    let _ = write!(out, "({c})");
                } else {
                    let _ = write!(out, "{c}");
                }
            }
            ExpressionTree::Binary(op, a, b) => {
                let p = self.precedence();
                let wrap = |child: &ExpressionTree, strict: bool, out: &mut String| {
                    let cp = child.precedence();
                    let paren = if strict { cp <= p } else { cp < p };
                    if paren {
                        out.push('(');
                    }
                    child.render_into(names, out);
                    if paren {
                        out.push(')');
                    }
                };
                wrap(a, false, out);
                match op {
                    OperatorKind::Add | OperatorKind::Sub => {
                        let _ = write!(out, " {} ", op.symbol());
                    }
                    _ => out.push_str(op.symbol()),
                }
                wrap(b, true, out);
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: Vec<&'a str>,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Expression(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<ExpressionTree> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => OperatorKind::Add,
                Some(b'-') => OperatorKind::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExpressionTree::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ExpressionTree> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => OperatorKind::Mul,
                Some(b'/') => OperatorKind::ProtectedDiv,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ExpressionTree::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<ExpressionTree> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = if self.peek() == Some(b'-') {
                    self.pos += 1;
                    match self.number()? {
                        ExpressionTree::Const(c) => ExpressionTree::Const(-c),
                        _ => unreachable!(),
                    }
                } else {
                    self.expr()?
                };
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<ExpressionTree> {
        self.skip_ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(ExpressionTree::Const)
            .map_err(|_| self.error(&format!("bad number '{text}'")))
    }

    fn name(&mut self) -> Result<ExpressionTree> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(i) = self.names.iter().position(|n| *n == word) {
            return Ok(ExpressionTree::Input(i));
        }
        if let Some(i) = word.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if i < self.names.len() {
                return Ok(ExpressionTree::Input(i));
            }
        }
        self.pos = start;
        Err(self.error(&format!("unknown terminal '{word}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::ExpressionTree::*;
    use super::*;

    fn bin(op: OperatorKind, a: ExpressionTree, b: ExpressionTree) -> ExpressionTree {
        Binary(op, Box::new(a), Box::new(b))
    }

    #[test]
    fn folds_constants() {
        let t = bin(OperatorKind::Add, Const(1.0), Const(1.0));
        assert_eq!(t.simplify(), Const(2.0));
        let names = ["a"];
        assert_eq!(
            bin(OperatorKind::Mul, Input(0), t).simplify().render(&names),
            "a*2"
        );
    }

    #[test]
    fn drops_neutral_elements() {
        let zero = bin(OperatorKind::Sub, Const(1.0), Const(1.0));
        let t = bin(
            OperatorKind::Add,
            bin(OperatorKind::Mul, Const(1.0), Input(0)),
            zero,
        );
        assert_eq!(t.simplify(), Input(0));
    }

    #[test]
    fn parenthesizes_only_where_needed() {
        let names = ["a", "b", "c"];
        let t = bin(
            OperatorKind::Sub,
            Input(0),
            bin(OperatorKind::Sub, Input(1), Input(2)),
        );
        assert_eq!(t.render(&names), "a - (b - c)");
        let t = bin(
            OperatorKind::Sub,
            bin(OperatorKind::Sub, Input(0), Input(1)),
            Input(2),
        );
        assert_eq!(t.render(&names), "a - b - c");
        let t = bin(
            OperatorKind::ProtectedDiv,
            bin(OperatorKind::Add, Input(0), Input(1)),
            bin(OperatorKind::Mul, Input(1), Input(2)),
        );
        assert_eq!(t.render(&names), "(a + b)/(b*c)");
    }

    #[test]
    fn negative_constants_are_wrapped() {
        let minus_one = bin(
            OperatorKind::Sub,
            bin(OperatorKind::Sub, Const(1.0), Const(1.0)),
            Const(1.0),
        );
        let t = bin(OperatorKind::Mul, Input(0), minus_one).simplify();
        assert_eq!(t.render(&["x"]), "x*(-1)");
    }

    #[test]
    fn parse_inverts_render() {
        let names = ["a", "b", "c"];
        for text in ["a - (b - c)", "a - b - c", "(a + b)/(b*c)", "a*(-1)", "2.5*a + 0.125", "a/b/c", "a/(b/c)"] {
            let t = ExpressionTree::parse(text, &names).unwrap();
            assert_eq!(t.render(&names), text);
        }
    }

    #[test]
    fn parse_reports_errors() {
        let names = ["a"];
        for bad in ["", "a +", "(a", "a b", "q", "a $ a", "x7"] {
            assert!(matches!(ExpressionTree::parse(bad, &names), Err(Error::Expression(_))), "{bad}");
        }
        assert_eq!(ExpressionTree::parse("x0", &names).unwrap(), Input(0));
    }
}
