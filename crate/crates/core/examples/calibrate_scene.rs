//! Accuracy of single-shot selection against the fixed option, by `k`.
//!
//! `cargo run --release -p asl-core --example calibrate_scene [episodes]`

use asl_core::envs::EnvSpec;
use asl_core::harness::{run_experiment, train_scene_model, ExperimentConfig, Framework, Sensing, TrainingSetup};

fn main() {
    let episodes: usize = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("episode count"));
    let dir = tempfile::tempdir().expect("temp dir");
    let model_path = dir.path().join("scene.model");
    train_scene_model(&EnvSpec::scene_classification(), &TrainingSetup::default())
        .and_then(|m| m.save(&model_path))
        .expect("scene model");
    let accuracy = |sensing: Sensing, k: usize, master: u64| {
        let mut c = ExperimentConfig::new(Framework::SingleShot);
        c.model_path = Some(model_path.clone());
        c.sensing = sensing;
        c.learner.k = k;
        c.episodes = episodes;
        c.seed = master * 1_000_003;
        run_experiment(&c).expect("run").aggregate.correct.expect("accuracy").mean
    };
    println!("{:<8} {}", "option", "accuracy per master seed 0..5 (mean)");
    let mut rows: Vec<(String, Sensing, usize)> = vec![("fixed".into(), Sensing::Fixed, 1)];
    rows.extend([1, 2, 4, 8, 16, 25].map(|k| (format!("k={k}"), Sensing::Learned, k)));
    for (name, sensing, k) in rows {
        let per: Vec<f64> = (0..5).map(|m| accuracy(sensing, k, m)).collect();
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        let cells: Vec<String> = per.iter().map(|a| format!("{a:.3}")).collect();
        println!("{name:<8} {} ({mean:.3})", cells.join(" "));
    }
}
