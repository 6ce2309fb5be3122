use std::hint::black_box;

use asl_core::envs::{env_reset, EnvSpec};
use asl_core::harness::{train_scene_model, TrainingSetup};
use asl_core::learn::{toy_mdp_fixture, value_iteration};
use asl_core::loops::{capture, run_multimodal_sparse, run_sensorimotor, run_single_shot};
use asl_core::perception::quality_max_confidence;
use asl_core::policies::{multi_sense_policy_step, ActionPolicyState, MultiSensePolicy, SenseController};
use asl_core::{LearnerConfig, MetricId, QualityScore};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn sensing(c: &mut Criterion) {
    let spec = EnvSpec::scene_classification();
    let (_, scene) = env_reset(&spec, 1).unwrap();
    c.bench_function("capture_scene_16", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            capture(&spec, black_box(&scene), &[12], None, seed).unwrap()
        })
    });
    let model = train_scene_model(&spec, &TrainingSetup { samples: 500, epochs: 100, ..Default::default() }).unwrap();
    let obs = capture(&spec, &scene, &[10], None, 3).unwrap();
    c.bench_function("quality_max_confidence", |b| b.iter(|| quality_max_confidence(&model, black_box(&obs))));
    for k in [1, 8, 25] {
        c.bench_function(&format!("single_shot_k{k}"), |b| {
            let mut seed = 0u64;
            b.iter(|| {
                seed += 1;
                run_single_shot(&spec, k, &model, seed).unwrap()
            })
        });
    }
}

fn policies(c: &mut Criterion) {
    let policy = MultiSensePolicy::new(&[10, 9], LearnerConfig::default()).unwrap();
    let q = [
        QualityScore::new(0.4, MetricId::VisualAlignment).unwrap(),
        QualityScore::new(0.8, MetricId::Grip).unwrap(),
    ];
    c.bench_function("multi_sense_policy_step", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            multi_sense_policy_step(&policy, &q, &[4, 4], seed).unwrap()
        })
    });
    let mdp = toy_mdp_fixture();
    c.bench_function("value_iteration_toy", |b| b.iter(|| value_iteration(black_box(&mdp), 0.9, 1e-8).unwrap()));
}

fn episodes(c: &mut Criterion) {
    let cfg = LearnerConfig { alpha: 0.3, buckets: 1, ..LearnerConfig::default() };
    let balance = EnvSpec::balance();
    let model = balance.builtin_model().unwrap();
    let n = balance.modalities[0].space.total_size();
    c.bench_function("balance_episode", |b| {
        b.iter_batched(
            || ActionPolicyState::perception_aware(balance.obs_buckets(), balance.actions, cfg).unwrap(),
            |mut action| {
                let mut sense = SenseController::Uniform { options: n };
                run_sensorimotor(&balance, &mut action, &mut sense, Some(&model), 0.1, 7).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    let grip = EnvSpec::grip();
    let gm = grip.builtin_model().unwrap();
    let sizes: Vec<usize> = grip.modalities.iter().map(|m| m.space.total_size()).collect();
    c.bench_function("grip_episode", |b| {
        b.iter_batched(
            || {
                (
                    ActionPolicyState::perception_aware(grip.obs_buckets(), grip.actions, cfg).unwrap(),
                    MultiSensePolicy::new(&sizes, cfg).unwrap(),
                )
            },
            |(mut action, mut sense)| run_multimodal_sparse(&grip, &mut action, &mut sense, &gm, 0.1, 0.1, 7).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, sensing, policies, episodes);
criterion_main!(benches);
