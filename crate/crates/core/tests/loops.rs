use asl_core::envs::{EnvSpec, GripParams, EnvKind};
use asl_core::loops::{
    run_conventional, run_fixed_sensing, run_multimodal_sparse, run_perception_only, run_sensorimotor,
    run_single_shot,
};
use asl_core::policies::{ActionPolicyState, MultiSensePolicy, SenseController, SensePolicyState};
use asl_core::{LearnerConfig, Trajectory};
use proptest::prelude::*;

fn cfg() -> LearnerConfig {
    LearnerConfig::default()
}

fn sensorimotor(spec: &EnvSpec, lambda: f64, seed: u64, learned: bool) -> Trajectory {
    let n = spec.modalities[0].space.total_size();
    let mut action = ActionPolicyState::perception_aware(spec.obs_buckets(), spec.actions, cfg()).unwrap();
    let mut sense = if learned {
        SenseController::Learned(SensePolicyState::new(n, cfg()).unwrap())
    } else {
        SenseController::Uniform { options: n }
    };
    let model = spec.builtin_model().unwrap();
    run_sensorimotor(spec, &mut action, &mut sense, Some(&model), lambda, seed).unwrap()
}

fn grip(spec: &EnvSpec, lambda: f64, seed: u64) -> Trajectory {
    let sizes: Vec<usize> = spec.modalities.iter().map(|m| m.space.total_size()).collect();
    let mut action = ActionPolicyState::perception_aware(spec.obs_buckets(), spec.actions, cfg()).unwrap();
    let mut sense = MultiSensePolicy::new(&sizes, cfg()).unwrap();
    let model = spec.builtin_model().unwrap();
    run_multimodal_sparse(spec, &mut action, &mut sense, &model, lambda, lambda, seed).unwrap()
}

fn well_formed(t: &Trajectory, horizon: usize) {
    assert!(t.indices_valid());
    assert!(!t.is_empty() && t.len() <= horizon);
    let (last, rest) = t.steps.split_last().unwrap();
    assert!(rest.iter().all(|s| !s.done));
    assert!(last.done || t.len() == horizon);
    assert!(t.steps.iter().all(|s| s.reward.is_consistent()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sensorimotor_records_every_step(seed in any::<u64>(), lambda in 0.0f64..2.0, learned in any::<bool>()) {
        let spec = EnvSpec::balance();
        let t = sensorimotor(&spec, lambda, seed, learned);
        well_formed(&t, spec.horizon);
        prop_assert_eq!(&t, &sensorimotor(&spec, lambda, seed, learned));
    }

    #[test]
    fn grip_reward_is_sparse(seed in any::<u64>(), lambda in 0.0f64..1.0) {
        let spec = EnvSpec::grip();
        let t = grip(&spec, lambda, seed);
        well_formed(&t, spec.horizon);
        let task: Vec<f64> = t.steps.iter().map(|s| s.reward.task).collect();
        let (last, rest) = task.split_last().unwrap();
        prop_assert!(rest.iter().all(|r| *r == 0.0));
        prop_assert!(*last == 0.0 || (*last == 1.0 && t.steps.last().unwrap().done));
        prop_assert!(t.steps.iter().all(|s| s.weights.as_ref().unwrap().is_valid()));
        prop_assert_eq!(&t, &grip(&spec, lambda, seed));
    }

    #[test]
    fn nesting_reproduces_conventional(seed in any::<u64>(), episodes in 1usize..6) {
        let spec = EnvSpec::balance();
        let fixed = spec.modalities[0].fixed;
        let mut plain = ActionPolicyState::new(spec.obs_buckets(), spec.actions, cfg()).unwrap();
        let mut nested = plain.clone();
        for e in 0..episodes as u64 {
            let a = run_conventional(&spec, &mut plain, seed ^ e).unwrap();
            let mut pinned = SenseController::Fixed(fixed);
            let b = run_sensorimotor(&spec, &mut nested, &mut pinned, None, 0.0, seed ^ e).unwrap();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(plain, nested);
    }

    #[test]
    fn conventional_mdp_episode(seed in any::<u64>()) {
        let spec = EnvSpec::mdp(asl_core::learn::toy_mdp_fixture(), 50);
        let mut policy = ActionPolicyState::new(spec.obs_buckets(), spec.actions, cfg()).unwrap();
        let t = run_conventional(&spec, &mut policy, seed).unwrap();
        well_formed(&t, spec.horizon);
        // Entry rewards of the fixture: -0.5, 0, or 1 on reaching the goal.
        for s in &t.steps {
            prop_assert!([-0.5, 0.0, 1.0].contains(&s.reward.task));
        }
    }
}

#[test]
fn pinned_perception_matches_fixed_sensing() {
    let spec = EnvSpec::drifting_perception();
    let model = asl_core::harness::train_scene_model(
        &spec,
        &asl_core::harness::TrainingSetup { samples: 300, epochs: 100, ..Default::default() },
    )
    .unwrap();
    for seed in 0..20 {
        let mut pinned = SenseController::Fixed(spec.modalities[0].fixed);
        let a = run_perception_only(&spec, &mut pinned, &model, seed).unwrap();
        let b = run_fixed_sensing(&spec, Some(&model), seed).unwrap();
        assert_eq!(a.len(), spec.horizon);
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.observation, y.observation);
            assert_eq!(x.correct, y.correct);
            assert_eq!(x.reward.task, 0.0);
        }
    }
}

#[test]
fn loops_refuse_mismatched_environments() {
    let scene = EnvSpec::scene_classification();
    let balance = EnvSpec::balance();
    let model = balance.builtin_model().unwrap();
    let mut policy = ActionPolicyState::new(scene.obs_buckets().max(1), 2, cfg()).unwrap();
    assert!(run_conventional(&scene, &mut policy, 0).is_err());
    assert!(run_single_shot(&balance, 2, &model, 0).is_err());
    let mut sense = SenseController::Fixed(0);
    assert!(run_perception_only(&balance, &mut sense, &model, 0).is_err());
    let mut action = ActionPolicyState::new(balance.obs_buckets(), 2, cfg()).unwrap();
    assert!(run_sensorimotor(&balance, &mut action, &mut sense, Some(&model), -1.0, 0).is_err());
    assert!(run_sensorimotor(&balance, &mut action, &mut sense, Some(&model), f64::NAN, 0).is_err());
}

#[test]
fn grip_success_with_easy_parameters() {
    let mut spec = EnvSpec::grip();
    if let EnvKind::Grip(p) = &mut spec.kind {
        *p = GripParams { turn_step: 0.5, ..p.clone() };
    }
    let successes = (0..50).filter(|s| grip(&spec, 0.0, *s).task_return() == 1.0).count();
    assert!(successes > 0);
}
