//! Mean survival on the balance task for several quality weights and
//! sensing policies, per master seed.
//!
//! `cargo run --release -p asl-core --example calibrate_balance [episodes] [seeds]`

use asl_core::harness::{run_experiment, ExperimentConfig, Framework, Sensing};
use rayon::prelude::*;

fn survival(sensing: Sensing, lambda: f64, episodes: usize, master: u64) -> f64 {
    let mut c = ExperimentConfig::new(Framework::Sensorimotor);
    c.learner.alpha = 0.3;
    c.learner.buckets = 1;
    c.episodes = episodes;
    c.lambda = lambda;
    c.sensing = sensing;
    c.seed = master * 1_000_003;
    run_experiment(&c).expect("run").aggregate.steps.expect("steps").mean
}

fn main() {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(1000, |s| s.parse().expect("episode count"));
    let seeds: u64 = args.next().map_or(20, |s| s.parse().expect("seed count"));
    let arms: [(&str, Sensing, f64); 6] = [
        ("λ=0.2", Sensing::Learned, 0.2),
        ("λ=0.1", Sensing::Learned, 0.1),
        ("λ=0.05", Sensing::Learned, 0.05),
        ("λ=0", Sensing::Learned, 0.0),
        ("fixed", Sensing::Fixed, 0.0),
        ("uniform", Sensing::Uniform, 0.0),
    ];
    let table: Vec<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|m| arms.iter().map(|(_, s, l)| survival(*s, *l, episodes, m)).collect())
        .collect();
    println!("seed {}", arms.map(|a| format!("{:>8}", a.0)).join(" "));
    for (m, row) in table.iter().enumerate() {
        println!("{m:>4} {}", row.iter().map(|v| format!("{v:>8.1}")).collect::<Vec<_>>().join(" "));
    }
    let beats = |a: usize, b: usize| table.iter().filter(|r| r[a] > r[b]).count();
    println!("λ=0.1 > λ=0: {}/{seeds}", beats(1, 3));
    println!("λ=0 > uniform: {}/{seeds}", beats(3, 5));
    println!("λ=0.1 > uniform: {}/{seeds}", beats(1, 5));
}
