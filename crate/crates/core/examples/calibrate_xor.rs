//! Sweeps initial weight ranges for the XOR network and reports the mean
//! final test accuracy of the MSTDPET and null rules.
//!
//! cargo run --release --example calibrate_xor -- <runs> <in_lo> <in_hi> <hid_lo> <hid_hi> [epochs]

use std::time::Instant;

use evoplast::snn::{NamedRule, PlasticityRule, ProjectionConfig};
use evoplast::stats::mean;
use evoplast::task_xor::{run_trial, XorConfig};

fn main() {
    let a: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let runs = a[0] as u64;
    let mut cfg = XorConfig::default();
    cfg.network.projections = vec![
        ProjectionConfig::uniform(a[1], a[2]),
        ProjectionConfig::uniform(a[3], a[4]),
    ];
    if let Some(&e) = a.get(5) {
        cfg.n_epochs = e as usize;
    }
    for rule in [NamedRule::Mstdpet, NamedRule::XorBest, NamedRule::Null] {
        let r = PlasticityRule::named(rule, cfg.learning_rate);
        let start = Instant::now();
        let curves: Vec<_> = (0..runs).map(|s| run_trial(&r, &cfg, 1000 + s).unwrap()).collect();
        let fin: Vec<f64> = curves.iter().map(|c| c.final_test_accuracy()).collect();
        let last50: Vec<f64> = curves
            .iter()
            .map(|c| mean(&c.epochs[c.epochs.len().saturating_sub(50)..].iter().map(|e| e.test_acc).collect::<Vec<_>>()))
            .collect();
        let k = 100.min(cfg.n_epochs);
        let wd: Vec<f64> = curves.iter().map(|c| c.weight_diff_growth(k).unwrap_or(0.0)).collect();
        let wc: Vec<f64> = curves.iter().map(|c| c.weight_diff_change(k).unwrap_or(0.0)).collect();
        println!(
            "{:<10} final={:.3} last50={:.3} wdiff_growth={:.1} wdiff_change={:.1} ({:.1}s/trial)",
            rule.id(),
            mean(&fin),
            mean(&last50),
            mean(&wd),
            mean(&wc),
            start.elapsed().as_secs_f64() / runs as f64
        );
    }
}
