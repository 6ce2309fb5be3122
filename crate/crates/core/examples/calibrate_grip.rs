//! Success of shaped against bare sparse reward on the grip task, paired by
//! episode, for a few discount factors.
//!
//! `cargo run --release -p asl-core --example calibrate_grip [episodes] [seeds]`

use asl_core::harness::{run_experiment, sign_test, ExperimentConfig, Framework};
use rayon::prelude::*;

fn successes(gamma: f64, lambda: f64, episodes: usize, master: u64) -> Vec<bool> {
    let mut c = ExperimentConfig::new(Framework::MultimodalSparse);
    c.learner.gamma = gamma;
    c.learner.alpha = 0.3;
    c.lambda_tact = lambda;
    c.lambda_vis = lambda;
    c.episodes = episodes;
    c.seed = master * 1_000_003;
    let report = run_experiment(&c).expect("run");
    report.rows.iter().map(|r| r.task_return > 0.0).collect()
}

fn main() {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(500, |s| s.parse().expect("episode count"));
    let seeds: u64 = args.next().map_or(6, |s| s.parse().expect("seed count"));
    for gamma in [0.75, 0.9] {
        for lambda in [0.05, 0.1, 0.2] {
            let lines: Vec<String> = (0..seeds)
                .into_par_iter()
                .map(|m| {
                    let shaped = successes(gamma, lambda, episodes, m);
                    let bare = successes(gamma, 0.0, episodes, m);
                    let wins = shaped.iter().zip(&bare).filter(|(a, b)| **a && !**b).count();
                    let losses = shaped.iter().zip(&bare).filter(|(a, b)| !**a && **b).count();
                    let count = |v: &[bool]| v.iter().filter(|x| **x).count();
                    format!(
                        "  seed {m}: shaped {} bare {} wins {wins} losses {losses} p={:.1e}",
                        count(&shaped),
                        count(&bare),
                        sign_test(wins, losses)
                    )
                })
                .collect();
            println!("γ={gamma} λ={lambda}");
            lines.iter().for_each(|l| println!("{l}"));
        }
    }
}
