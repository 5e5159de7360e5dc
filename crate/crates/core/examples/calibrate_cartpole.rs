//! Sweeps the cart-pole initial weight range and encoder gain and reports
//! the last-5-episode balance time of the multiplicative R-STDP, the best
//! evolved rule and the null rule.
//!
//! cargo run --release --example calibrate_cartpole -- <runs> <w_lo> <w_hi> <v_scale> [window] [angle]

use std::time::Instant;

use evoplast::snn::{NamedRule, PlasticityRule, ProjectionConfig};
use evoplast::stats::{mean, quantile};
use evoplast::task_cartpole::{run_trial, CartPoleTaskConfig};

fn main() {
    let a: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let runs = a[0] as u64;
    let base: u64 = std::env::var("CAL_BASE").ok().and_then(|v| v.parse().ok()).unwrap_or(2000);
    let mut cfg = CartPoleTaskConfig::default();
    cfg.network.projections = vec![ProjectionConfig::uniform(a[1], a[2])];
    cfg.encoder.v_scale = a[3];
    if let Some(&w) = a.get(4) {
        cfg.learning_window = w as usize;
    }
    if a.get(5).is_some() {
        cfg.improvement = evoplast::task_cartpole::Improvement::Angle;
    }
    for rule in [NamedRule::MultRstdp, NamedRule::CartpoleBest, NamedRule::Null] {
        let r = PlasticityRule::named(rule, cfg.learning_rate);
        let start = Instant::now();
        let fit: Vec<f64> = (0..runs)
            .map(|s| run_trial(&r, &cfg, base + s).unwrap().last_mean(cfg.fitness_episodes))
            .collect();
        println!(
            "{:<16} mean={:.1} q1={:.1} q3={:.1} ({:.2}s/trial)",
            rule.id(),
            mean(&fit),
            quantile(&fit, 0.25),
            quantile(&fit, 0.75),
            start.elapsed().as_secs_f64() / runs as f64
        );
    }
}
