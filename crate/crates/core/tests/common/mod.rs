//! Reference implementations used as test oracles. Nothing in this file
//! calls into the library's evaluation, simulation or physics code; the
//! comparisons against the library live in [`checks`].

#![allow(dead_code)]

pub mod checks;

use serde_json::Value;

pub const CLAMP: f64 = 1e6;

pub const TERMINALS: [&str; 10] = ["E", "R", "S_i", "S_j", "e_i1", "e_i2", "e_j1", "e_j2", "w0", "t"];

fn op(code: u64, a: f64, b: f64) -> f64 {
    let v = match code {
        0 => a + b,
        1 => a - b,
        2 => a * b,
        3 => {
            if b.abs() < 1e-9 {
                1.0
            } else {
                a / b
            }
        }
        4 => 1.0,
        _ => panic!("bad op code {code}"),
    };
    v.max(-CLAMP).min(CLAMP)
}

/// Evaluates a serialized genome by walking its gene list from the output
/// gene downward.
pub fn cgp_eval(genome: &Value, inputs: &[f64]) -> f64 {
    let n_inputs = genome["n_inputs"].as_u64().unwrap() as usize;
    let genes: Vec<u64> = genome["genes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g.as_u64().unwrap())
        .collect();
    let out = genome["output"].as_u64().unwrap() as usize;
    fn walk(addr: usize, n_inputs: usize, genes: &[u64], inputs: &[f64]) -> f64 {
        if addr < n_inputs {
            return inputs[addr];
        }
        let g = &genes[3 * (addr - n_inputs)..3 * (addr - n_inputs) + 3];
        if g[0] == 4 {
            return 1.0;
        }
        let a = walk(g[1] as usize, n_inputs, genes, inputs);
        let b = walk(g[2] as usize, n_inputs, genes, inputs);
        op(g[0], a, b)
    }
    walk(out, n_inputs, &genes, inputs)
}

/// Evaluates an infix expression directly while parsing it.
pub fn eval_infix(text: &str, names: &[&str], inputs: &[f64]) -> f64 {
    let toks = tokenize(text);
    let mut pos = 0;
    let v = sum(&toks, &mut pos, names, inputs);
    assert_eq!(pos, toks.len(), "trailing tokens in {text:?}");
    v
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sym(char),
}

fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Num(s.parse().unwrap()));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else {
            out.push(Tok::Sym(c));
            i += 1;
        }
    }
    out
}

fn sum(t: &[Tok], pos: &mut usize, names: &[&str], x: &[f64]) -> f64 {
    let mut acc = product(t, pos, names, x);
    while let Some(Tok::Sym(c @ ('+' | '-'))) = t.get(*pos) {
        *pos += 1;
        let rhs = product(t, pos, names, x);
        acc = op(if *c == '+' { 0 } else { 1 }, acc, rhs);
    }
    acc
}

fn product(t: &[Tok], pos: &mut usize, names: &[&str], x: &[f64]) -> f64 {
    let mut acc = atom(t, pos, names, x);
    while let Some(Tok::Sym(c @ ('*' | '/'))) = t.get(*pos) {
        *pos += 1;
        let rhs = atom(t, pos, names, x);
        acc = op(if *c == '*' { 2 } else { 3 }, acc, rhs);
    }
    acc
}

fn atom(t: &[Tok], pos: &mut usize, names: &[&str], x: &[f64]) -> f64 {
    let tok = t[*pos].clone();
    *pos += 1;
    match tok {
        Tok::Num(v) => v,
        Tok::Name(n) => {
            let i = names
                .iter()
                .position(|m| *m == n)
                .unwrap_or_else(|| n.strip_prefix('x').and_then(|d| d.parse().ok()).expect("unknown name"));
            x[i]
        }
        Tok::Sym('(') => {
            let v = if t[*pos] == Tok::Sym('-') {
                *pos += 1;
                match t[*pos] {
                    Tok::Num(v) => {
                        *pos += 1;
                        -v
                    }
                    _ => panic!("expected number after '(-'"),
                }
            } else {
                sum(t, pos, names, x)
            };
            assert_eq!(t[*pos], Tok::Sym(')'));
            *pos += 1;
            v
        }
        other => panic!("unexpected token {other:?}"),
    }
}

/// Constants of a leaky integrate-and-fire neuron with STDP traces.
#[derive(Clone, Copy, Debug)]
pub struct Lif {
    pub tau_v: f64,
    pub threshold: f64,
    pub tau_e: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

/// One presynaptic neuron driving one postsynaptic LIF neuron through a
/// single plastic synapse, written out in scalars.
#[derive(Clone, Debug)]
pub struct ScalarSynapse {
    pub p: Lif,
    pub w: f64,
    pub w0: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub u: f64,
    pub s_post: bool,
    pub x_plus_pre: f64,
    pub x_minus_post: f64,
    pub e: f64,
}

impl ScalarSynapse {
    pub fn new(p: Lif, w: f64, w_min: f64, w_max: f64) -> Self {
        ScalarSynapse {
            p,
            w,
            w0: w,
            w_min,
            w_max,
            u: 0.0,
            s_post: false,
            x_plus_pre: 0.0,
            x_minus_post: 0.0,
            e: 0.0,
        }
    }

    /// Advances one step with presynaptic spike `s_pre`, then applies
    /// `w += lr·R·E` (clamped).
    pub fn step(&mut self, s_pre: bool, reward: f64, lr: f64) {
        let alpha = (-1.0 / self.p.tau_v).exp();
        let input = if s_pre { self.w } else { 0.0 };
        let leak = if self.s_post { 0.0 } else { alpha * self.u };
        self.u = leak + (1.0 - alpha) * input;
        self.s_post = self.u >= self.p.threshold;
        let sp = s_pre as u8 as f64;
        let so = self.s_post as u8 as f64;
        self.x_plus_pre = self.x_plus_pre * (-1.0 / self.p.tau_plus).exp() + self.p.a_plus * sp;
        self.x_minus_post = self.x_minus_post * (-1.0 / self.p.tau_minus).exp() + self.p.a_minus * so;
        let xi = self.x_plus_pre * so + self.x_minus_post * sp;
        self.e = self.e * (-1.0 / self.p.tau_e).exp() + xi;
        self.w = (self.w + lr * reward * self.e).max(self.w_min).min(self.w_max);
    }
}

/// `Σ_{s ≤ t} x(s)·exp(-(t - s)/τ)` evaluated term by term.
pub fn convolve(xs: &[f64], tau: f64, t: usize) -> f64 {
    (0..=t).map(|s| xs[s] * (-((t - s) as f64) / tau).exp()).sum()
}

/// Gym cart-pole constants.
pub const G: f64 = 9.8;
pub const M_CART: f64 = 1.0;
pub const M_POLE: f64 = 0.1;
pub const HALF_LEN: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const DT: f64 = 0.02;

/// Accelerations of the frictionless cart-pole, solved from the coupled
/// equations of motion with the total mass factored out.
pub fn cartpole_accel(theta: f64, theta_dot: f64, force: f64) -> (f64, f64) {
    let m = M_CART + M_POLE;
    let (s, c) = (theta.sin(), theta.cos());
    let num = m * G * s - c * (force + M_POLE * HALF_LEN * theta_dot * theta_dot * s);
    let den = HALF_LEN * (4.0 / 3.0 * m - M_POLE * c * c);
    let theta_acc = num / den;
    let x_acc = (force + M_POLE * HALF_LEN * (theta_dot * theta_dot * s - theta_acc * c)) / m;
    (x_acc, theta_acc)
}

/// Semi-implicit Euler step of `[x, ẋ, θ, θ̇]`.
pub fn cartpole_step(s: [f64; 4], force: f64) -> [f64; 4] {
    let (xa, ta) = cartpole_accel(s[2], s[3], force);
    let xd = s[1] + DT * xa;
    let td = s[3] + DT * ta;
    [s[0] + DT * xd, xd, s[2] + DT * td, td]
}
