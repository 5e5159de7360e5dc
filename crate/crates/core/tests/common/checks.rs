//! Library-vs-oracle comparisons shared by the module tests and the
//! acceptance suite. Each returns the largest deviation it saw (or a
//! description of the first violation).

use evoplast::env_cartpole::{self, Action, CartPoleState};
use evoplast::expr_graph::Genome;
use evoplast::snn::{LifConfig, NamedRule, Network, NetworkConfig, PlasticityRule, ProjectionConfig};
use evoplast::task_cartpole::{self, CartPoleTaskConfig};
use evoplast::task_xor::{self, XorConfig, XorSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Lif, ScalarSynapse};

pub fn lif_of(c: &LifConfig) -> Lif {
    Lif {
        tau_v: c.tau_v,
        threshold: c.threshold,
        tau_e: c.tau_e,
        tau_plus: c.tau_plus,
        tau_minus: c.tau_minus,
        a_plus: c.a_plus,
        a_minus: c.a_minus,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest relative deviation between compiled genomes and the recursive
/// oracle over `n_genomes` random genomes and `n_vectors` inputs each.
pub fn cgp_oracle(n_genomes: usize, n_vectors: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..n_genomes {
        let n_inputs = if k % 2 == 0 { 8 } else { 10 };
        let g = Genome::random(n_inputs, 2, 12, &mut rng);
        let json = serde_json::to_value(&g).unwrap();
        let prog = g.compile();
        for _ in 0..n_vectors {
            let x: Vec<f64> = (0..n_inputs)
                .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-10.0..10.0) })
                .collect();
            worst = worst.max(rel_err(prog.eval(&x), super::cgp_eval(&json, &x)));
        }
    }
    worst
}

/// Single synapse, 500 steps: network weight trajectory against the scalar
/// oracle. Returns (max abs deviation, post spikes, weight range covered).
pub fn mstdpet_oracle(seed: u64) -> (f64, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lif = LifConfig {
        tau_minus: 20.0,
        a_minus: -0.6,
        ..LifConfig::xor()
    };
    let w_init = 700.0;
    let cfg = NetworkConfig {
        layers: vec![1, 1],
        lif: lif.clone(),
        projections: vec![ProjectionConfig {
            init_low: w_init,
            init_high: w_init,
            w_min: 0.0,
            w_max: 2400.0,
        }],
    };
    let lr = 20.0;
    let rule = PlasticityRule::named(NamedRule::Mstdpet, lr);
    let mut net = Network::new(cfg, &mut rng).unwrap();
    let mut oracle = ScalarSynapse::new(lif_of(&lif), w_init, 0.0, 2400.0);
    let mut eval = rule.evaluator();
    let (mut worst, mut spikes) = (0.0f64, 0usize);
    let (mut lo, mut hi) = (w_init, w_init);
    for _ in 0..500 {
        let s_pre = rng.gen_bool(0.3);
        let r = [-1.0, 0.0, 1.0][rng.gen_range(0..3)];
        net.step(&[s_pre]).unwrap();
        net.apply_plasticity(&mut eval, |_, _| r, 0.0).unwrap();
        oracle.step(s_pre, r, lr);
        spikes += net.spikes(1)[0] as usize;
        let w = net.weights(0)[0];
        worst = worst.max((w - oracle.w).abs());
        worst = worst.max((net.eligibility(0)[0] - oracle.e).abs());
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (worst, spikes, hi - lo)
}

/// Traces and eligibility of a `[3, 4, 2]` network against explicit
/// exponential convolutions of its recorded spikes.
pub fn trace_decay_law(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lif = LifConfig::xor();
    let cfg = NetworkConfig {
        layers: vec![3, 4, 2],
        lif: lif.clone(),
        projections: vec![ProjectionConfig::uniform(0.0, 1500.0), ProjectionConfig::uniform(0.0, 1500.0)],
    };
    let mut net = Network::new(cfg.clone(), &mut rng).unwrap();
    let steps = 300;
    let n_layers = cfg.layers.len();
    let mut spikes: Vec<Vec<Vec<f64>>> = cfg.layers.iter().map(|&n| vec![vec![0.0; steps]; n]).collect();
    let mut xi_lib: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut elig_lib: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut e1_lib: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    let mut e2_lib: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_layers];
    for k in 0..n_layers - 1 {
        let n = cfg.layers[k] * cfg.layers[k + 1];
        xi_lib.push(vec![vec![0.0; steps]; n]);
        elig_lib.push(vec![vec![0.0; steps]; n]);
    }
    for t in 0..steps {
        let input: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.3)).collect();
        net.step(&input).unwrap();
        let snap = net.activity_snapshot();
        for l in 0..n_layers {
            for (i, &s) in net.spikes(l).iter().enumerate() {
                spikes[l][i][t] = s as u8 as f64;
            }
            e1_lib[l].push(snap.layers[l].e1.clone());
            e2_lib[l].push(snap.layers[l].e2.clone());
        }
        for k in 0..n_layers - 1 {
            for (idx, (&x, &e)) in net.synaptic_activity(k).iter().zip(net.eligibility(k)).enumerate() {
                xi_lib[k][idx][t] = x;
                elig_lib[k][idx][t] = e;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for l in 0..n_layers {
        for i in 0..cfg.layers[l] {
            for t in 0..steps {
                worst = worst.max(rel_err(e1_lib[l][t][i], super::convolve(&spikes[l][i], lif.tau_plus, t)));
                worst = worst.max(rel_err(e2_lib[l][t][i], super::convolve(&spikes[l][i], lif.tau_e, t)));
            }
        }
    }
    for k in 0..n_layers - 1 {
        let n_pre = cfg.layers[k];
        for i in 0..cfg.layers[k + 1] {
            for j in 0..n_pre {
                let idx = i * n_pre + j;
                let pre = &spikes[k][j];
                let post = &spikes[k + 1][i];
                let xi: Vec<f64> = (0..steps)
                    .map(|t| {
                        let xp = lif.a_plus * super::convolve(pre, lif.tau_plus, t);
                        let xm = lif.a_minus * super::convolve(post, lif.tau_minus, t);
                        xp * post[t] + xm * pre[t]
                    })
                    .collect();
                for t in 0..steps {
                    worst = worst.max(rel_err(xi_lib[k][idx][t], xi[t]));
                    worst = worst.max(rel_err(elig_lib[k][idx][t], super::convolve(&xi, lif.tau_e, t)));
                }
            }
        }
    }
    worst
}

/// 20-step trajectories from `seeds` (random start, random actions)
/// against the reference integrator.
pub fn cartpole_golden(seeds: std::ops::Range<u64>) -> f64 {
    let p = env_cartpole::CartPoleParams::default();
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = env_cartpole::reset(&mut rng);
        let mut r = [s.x, s.x_dot, s.theta, s.theta_dot];
        for _ in 0..20 {
            let a = if rng.gen_bool(0.5) { Action::Right } else { Action::Left };
            s = env_cartpole::step(s, a, &p).0;
            r = super::cartpole_step(r, a.sign() * super::FORCE);
            for (x, y) in [s.x, s.x_dot, s.theta, s.theta_dot].iter().zip(&r) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// Deviation from values computed once with an independent Python
/// implementation: start `(0.01, -0.02, 0.03, 0.04)`, push left on every
/// third step (0, 3, 6, ...) and right otherwise.
pub fn cartpole_frozen() -> f64 {
    let golden: [(usize, [f64; 4]); 3] = [
        (1, [0.005689219657944213, -0.21553901710278936, 0.03683990447552078, 0.3419952237760392]),
        (10, [0.04843762754892551, 0.3666618473443225, -0.015643302251441102, -0.46671309588116133]),
        (20, [0.22034956259074107, 1.1599557924072101, -0.2810974896485931, -1.9809940982916998]),
    ];
    let p = env_cartpole::CartPoleParams::default();
    let mut s = CartPoleState {
        x: 0.01,
        x_dot: -0.02,
        theta: 0.03,
        theta_dot: 0.04,
    };
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let a = if k % 3 == 0 { Action::Left } else { Action::Right };
        s = env_cartpole::step(s, a, &p).0;
        if let Some((_, g)) = golden.iter().find(|(n, _)| *n == k + 1) {
            for (x, y) in [s.x, s.x_dot, s.theta, s.theta_dot].iter().zip(g) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// `Δw` of the built-in rules, written out by hand.
fn named_delta(rule: NamedRule, r: f64, e: f64, w0: f64, t: f64) -> f64 {
    match rule {
        NamedRule::Mstdpet => r * e,
        NamedRule::MultRstdp => r * e * w0,
        NamedRule::CartpoleBest => t * r * e * w0 * w0,
        other => panic!("no oracle for {other}"),
    }
}

/// One cart-pole environment step with buffered replay, against an oracle
/// that simulates the same input with frozen weights and applies each
/// update as soon as its step is simulated, using the known rewards.
pub fn replay_oracle(seed: u64, rule: NamedRule, lr: f64) -> f64 {
    let cfg = CartPoleTaskConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(cfg.network.clone(), &mut rng).unwrap();
    net.capture_initial_weights();
    let mut state = env_cartpole::reset(&mut rng);
    state.theta_dot = rng.gen_range(-2.0..2.0);
    let t_env = rng.gen_range(0..cfg.learning_window);
    let plastic = PlasticityRule::named(rule, lr);
    let w_before = net.weights(0).to_vec();

    let mut input_rng = rng.clone();
    let out = task_cartpole::run_env_step(&mut net, state, &plastic, &cfg, t_env, true, &mut rng).unwrap();
    let input = env_cartpole::encode_observation(state.theta_dot, &cfg.encoder, &mut input_rng);

    let lif = lif_of(&cfg.network.lif);
    let (n_pre, n_post) = (10, 2);
    let alpha = (-1.0 / lif.tau_v).exp();
    let (dp, dm, de) = (
        (-1.0 / lif.tau_plus).exp(),
        (-1.0 / lif.tau_minus).exp(),
        (-1.0 / lif.tau_e).exp(),
    );
    let t = (t_env + 1) as f64 / cfg.env.max_steps as f64;
    let rewards = [out.rewards.0, out.rewards.1];
    let mut w = w_before.clone();
    let mut u = [0.0; 2];
    let mut s_post = [false; 2];
    let mut x_plus = vec![0.0; n_pre];
    let mut x_minus = [0.0; 2];
    let mut e = vec![0.0; n_pre * n_post];
    let mut counts = [0usize; 2];
    let (w_min, w_max) = (cfg.network.projections[0].w_min, cfg.network.projections[0].w_max);
    for step in 0..input.steps() {
        let s_pre: Vec<bool> = (0..n_pre).map(|j| input.get(j, step)).collect();
        for i in 0..n_post {
            let current: f64 = (0..n_pre).filter(|&j| s_pre[j]).map(|j| w_before[i * n_pre + j]).sum();
            let leak = if s_post[i] { 0.0 } else { alpha * u[i] };
            u[i] = leak + (1.0 - alpha) * current;
            s_post[i] = u[i] >= lif.threshold;
            counts[i] += s_post[i] as usize;
            x_minus[i] = x_minus[i] * dm + lif.a_minus * s_post[i] as u8 as f64;
        }
        for j in 0..n_pre {
            x_plus[j] = x_plus[j] * dp + lif.a_plus * s_pre[j] as u8 as f64;
        }
        for i in 0..n_post {
            for j in 0..n_pre {
                let k = i * n_pre + j;
                let xi = x_plus[j] * s_post[i] as u8 as f64 + x_minus[i] * s_pre[j] as u8 as f64;
                e[k] = e[k] * de + xi;
                let dw = lr * named_delta(rule, rewards[i], e[k], w_before[k], t);
                w[k] = (w[k] + dw).max(w_min).min(w_max);
            }
        }
    }
    assert_eq!((counts[0], counts[1]), out.output_counts, "oracle spike counts differ");
    w.iter()
        .zip(net.weights(0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Outside the learning window (or with learning off) an environment step
/// must leave every weight bit-identical. Returns the number of violations.
pub fn weight_freeze(seed: u64) -> usize {
    let cfg = CartPoleTaskConfig::default();
    let rule = PlasticityRule::named(NamedRule::CartpoleBest, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(cfg.network.clone(), &mut rng).unwrap();
    net.capture_initial_weights();
    let mut state = env_cartpole::reset(&mut rng);
    let mut violations = 0;
    let mut changed_inside = false;
    for t_env in 0..cfg.env.max_steps {
        let before = net.weights(0).to_vec();
        state.theta_dot = rng.gen_range(-1.0..1.0);
        let out = task_cartpole::run_env_step(&mut net, state, &rule, &cfg, t_env, true, &mut rng).unwrap();
        let same = before.iter().zip(net.weights(0)).all(|(a, b)| a.to_bits() == b.to_bits());
        if t_env >= cfg.learning_window && !same {
            violations += 1;
        }
        changed_inside |= t_env < cfg.learning_window && !same;
        state = CartPoleState { theta: 0.0, ..out.state };
    }
    for t_env in 0..cfg.learning_window {
        let before = net.weights(0).to_vec();
        task_cartpole::run_env_step(&mut net, state, &rule, &cfg, t_env, false, &mut rng).unwrap();
        if before != net.weights(0) {
            violations += 1;
        }
    }
    assert!(changed_inside, "rule never changed a weight inside the window");
    violations
}

/// Every drawn XOR pattern has exactly the configured spike count, and each
/// sample row is one of the two epoch patterns. Returns violations.
pub fn xor_spike_counts(n_draws: usize, seed: u64) -> usize {
    let cfg = XorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..n_draws {
        let (p0, p1) = task_xor::generate_patterns(&cfg, &mut rng);
        bad += (p0.spike_count() != cfg.n_spikes_per_pattern) as usize;
        bad += (p1.spike_count() != cfg.n_spikes_per_pattern) as usize;
        for bits in task_xor::SAMPLE_ORDER {
            let s = XorSample::new(bits, &p0, &p1);
            for (row, b) in [bits.0, bits.1].into_iter().enumerate() {
                let want = if b { &p1 } else { &p0 };
                bad += (s.input.row(row) != want.as_slice()) as usize;
                bad += (s.input.row_count(row) != cfg.n_spikes_per_pattern) as usize;
            }
        }
    }
    bad
}

/// Fitness of random genomes on shortened tasks stays inside the task's
/// range. Returns the values that fell outside.
pub fn fitness_ranges(n_genomes: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xor = XorConfig {
        n_epochs: 3,
        trials_per_fitness: 2,
        ..XorConfig::default()
    };
    let cp = CartPoleTaskConfig {
        episodes_per_trial: 6,
        trials_per_fitness: 2,
        ..CartPoleTaskConfig::default()
    };
    let mut bad = Vec::new();
    for _ in 0..n_genomes {
        let g = Genome::random(8, 2, 12, &mut rng);
        let rule = PlasticityRule::evolved(g, xor.learning_rate).unwrap();
        let f = task_xor::fitness(&rule, &xor, &[rng.gen(), rng.gen()]).unwrap();
        if !(0.0..=1.0).contains(&f) {
            bad.push(f);
        }
        let g = Genome::random(10, 2, 12, &mut rng);
        let rule = PlasticityRule::evolved(g, cp.learning_rate).unwrap();
        let f = task_cartpole::fitness(&rule, &cp, &[rng.gen(), rng.gen()]).unwrap();
        if !(1.0..=cp.env.max_steps as f64).contains(&f) {
            bad.push(f);
        }
    }
    bad
}
