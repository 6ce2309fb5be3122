//! Closed loops tying environments, sensing, perception and policies
//! together.
//!
//! Seed streams per episode seed `s` (see [`crate::seed`]): reset uses
//! `derive(s, Reset, 0)`, environment step `t` uses `Env t`, the capture of
//! observation `t` uses `Measure t`, and action and sensing choices at step
//! `t` use `Action t` and `Sense t`. Loops that share a stream therefore see
//! identical draws, which makes the degenerate-policy equivalences exact.
//!
//! A [`StepRecord`] for step `t` holds the observation `s_t`, the option
//! `o_t` that captured it, its quality, the action `a_t` and the reward of
//! the transition `t -> t+1`. Quality terms in rewards score the observation
//! produced by the step, `s_{t+1}`.

use serde::{Deserialize, Serialize};

use crate::domain::{
    AnalogScene, MetricId, ModalityWeights, Observation, QualityScore, QualityTerm, RewardBreakdown,
    SensorOption, StepRecord, Trajectory,
};
use crate::envs::{env_reset, env_step, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::perception::{
    argmax, modality, quality_grip, quality_max_confidence, quality_visual_alignment, PerceptionModel,
};
use crate::policies::{
    action_policy_step, multi_sense_policy_step, sample_candidates, select_single_shot, ActionPolicyState,
    MultiSensePolicy, SenseController,
};
use crate::seed::{derive, Stream};
use crate::sensing::{measure, measure_multi};

/// `task + Σ λ_i q_i`, keeping each term.
pub fn compose_reward(task: f64, terms: &[(f64, QualityScore)]) -> RewardBreakdown {
    let quality_terms: Vec<QualityTerm> = terms
        .iter()
        .map(|(lambda, q)| QualityTerm {
            metric: q.metric,
            lambda: *lambda,
            value: q.value,
        })
        .collect();
    let mut breakdown = RewardBreakdown {
        task,
        quality_terms,
        total: 0.0,
    };
    breakdown.total = breakdown.recompute();
    breakdown
}

/// Capture every modality of `scene` at grid indices `options`.
pub fn capture(
    spec: &EnvSpec,
    scene: &AnalogScene,
    options: &[usize],
    weights: Option<&ModalityWeights>,
    seed: u64,
) -> Result<Observation> {
    if options.len() != spec.modalities.len() {
        return Err(Error::ModalityMismatch {
            expected: spec.modalities.len(),
            actual: options.len(),
        });
    }
    let resolved: Vec<SensorOption> = spec
        .modalities
        .iter()
        .zip(options)
        .map(|(m, &i)| m.space.option(i))
        .collect::<Result<_>>()?;
    if let [only] = spec.modalities.as_slice() {
        return measure(scene, &resolved[0], &only.capture, seed);
    }
    let uniform;
    let weights = match weights {
        Some(w) => w,
        None => {
            uniform = ModalityWeights::uniform(options.len())?;
            &uniform
        }
    };
    let models: Vec<_> = spec.modalities.iter().map(|m| m.capture).collect();
    measure_multi(scene, &resolved, weights, &models, seed)
}

fn option_values(spec: &EnvSpec, indices: &[usize]) -> Result<Vec<SensorOption>> {
    spec.modalities
        .iter()
        .zip(indices)
        .map(|(m, &i)| m.space.option(i))
        .collect()
}

fn require_actions(spec: &EnvSpec) -> Result<()> {
    spec.validate()?;
    if spec.is_perception_only() {
        return Err(Error::Framework(format!(
            "{} has no actions; use a perception loop",
            spec.kind.name()
        )));
    }
    Ok(())
}

fn require_perception(spec: &EnvSpec) -> Result<()> {
    spec.validate()?;
    if !spec.is_perception_only() {
        return Err(Error::Framework(format!(
            "{} takes actions; perception loops need an action-free environment",
            spec.kind.name()
        )));
    }
    Ok(())
}

fn classify(model: &PerceptionModel, obs: &Observation, label: Option<usize>) -> Result<Option<bool>> {
    let probs = model.predict(obs)?;
    Ok(label.map(|l| argmax(&probs) == l))
}

/// Conventional RL: `o_fixed` every step, action table trained on the task
/// reward alone. Reaching the horizon truncates without a terminal update.
pub fn run_conventional(spec: &EnvSpec, policy: &mut ActionPolicyState, seed: u64) -> Result<Trajectory> {
    require_actions(spec)?;
    let fixed: Vec<usize> = spec.modalities.iter().map(|m| m.fixed).collect();
    let fixed_options = option_values(spec, &fixed)?;
    let (mut state, scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let mut obs = capture(spec, &scene, &fixed, None, derive(seed, Stream::Measure, 0))?;
    let mut bucket = spec.observation_bucket(&obs)?;
    let mut trajectory = Trajectory::new(seed);
    for t in 0..spec.horizon {
        let s = policy.state_index(bucket, None, None)?;
        let a = action_policy_step(policy, bucket, None, None, derive(seed, Stream::Action, t as u64))?;
        let out = env_step(spec, &state, Some(a), derive(seed, Stream::Env, t as u64))?;
        let next_obs = capture(spec, &out.scene, &fixed, None, derive(seed, Stream::Measure, t as u64 + 1))?;
        let next_bucket = spec.observation_bucket(&next_obs)?;
        let reward = compose_reward(out.reward, &[]);
        let s_next = policy.state_index(next_bucket, None, None)?;
        policy.learn(s, a, reward.total, s_next, out.done)?;
        trajectory.steps.push(StepRecord {
            step: t,
            observation: obs,
            action: Some(a),
            options: fixed_options.clone(),
            option_indices: fixed.clone(),
            weights: None,
            qualities: Vec::new(),
            reward,
            correct: None,
            done: out.done,
        });
        if out.done {
            break;
        }
        state = out.state;
        obs = next_obs;
        bucket = next_bucket;
    }
    Ok(trajectory)
}

/// Conventional loop of an action-free environment: `o_fixed` every step,
/// nothing learned. With a model, each step records the classifier's
/// correctness and max-confidence quality.
pub fn run_fixed_sensing(spec: &EnvSpec, model: Option<&PerceptionModel>, seed: u64) -> Result<Trajectory> {
    require_perception(spec)?;
    let fixed: Vec<usize> = spec.modalities.iter().map(|m| m.fixed).collect();
    let fixed_options = option_values(spec, &fixed)?;
    let (mut state, mut scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let mut obs = capture(spec, &scene, &fixed, None, derive(seed, Stream::Measure, 0))?;
    let mut trajectory = Trajectory::new(seed);
    for t in 0..spec.horizon {
        let (qualities, correct) = match model {
            Some(m) => (vec![quality_max_confidence(m, &obs)?], classify(m, &obs, scene.label)?),
            None => (Vec::new(), None),
        };
        let out = env_step(spec, &state, None, derive(seed, Stream::Env, t as u64))?;
        let next_obs = capture(spec, &out.scene, &fixed, None, derive(seed, Stream::Measure, t as u64 + 1))?;
        trajectory.steps.push(StepRecord {
            step: t,
            observation: obs,
            action: None,
            options: fixed_options.clone(),
            option_indices: fixed.clone(),
            weights: None,
            qualities,
            reward: compose_reward(out.reward, &[]),
            correct,
            done: out.done,
        });
        if out.done {
            break;
        }
        state = out.state;
        scene = out.scene;
        obs = next_obs;
    }
    Ok(trajectory)
}

/// Outcome of one single-shot adaptive capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub seed: u64,
    /// Grid indices of the sampled candidates, ascending.
    pub candidates: Vec<usize>,
    /// Max-confidence quality of each candidate capture.
    pub candidate_qualities: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_option: SensorOption,
    pub quality: QualityScore,
    /// Re-capture at the chosen option.
    pub observation: Observation,
    pub prediction: Vec<f64>,
    pub predicted: usize,
    pub label: usize,
    pub correct: bool,
}

/// Seed of the capture of grid option `index` in a single-shot episode.
/// Candidate noise depends only on the episode and the option, so any scan
/// over the same options sees the same captures.
pub fn candidate_seed(seed: u64, index: usize) -> u64 {
    derive(seed, Stream::Measure, index as u64)
}

fn scene_label(scene: &AnalogScene) -> Result<usize> {
    scene
        .label
        .ok_or_else(|| Error::InvalidSpec("classification scene without a label".into()))
}

/// Single-shot adaptive sensing: sample `k` candidate options, capture the
/// frozen latent scene with each, keep the highest-confidence option and
/// classify a fresh capture at that option.
pub fn run_single_shot(spec: &EnvSpec, k: usize, model: &PerceptionModel, seed: u64) -> Result<SelectionRecord> {
    spec.validate()?;
    if !matches!(spec.kind, EnvKind::SceneClassification(_)) {
        return Err(Error::Framework(format!(
            "single-shot sensing needs a scene-classification environment, got {}",
            spec.kind.name()
        )));
    }
    let space = &spec.modalities[0].space;
    let (_, scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let label = scene_label(&scene)?;
    let options = sample_candidates(space, k, derive(seed, Stream::Candidates, 0))?;
    let mut candidates = Vec::with_capacity(k);
    let mut indices = Vec::with_capacity(k);
    for option in options {
        let index = space.index_of(&option)?;
        let obs = capture(spec, &scene, &[index], None, candidate_seed(seed, index))?;
        indices.push(index);
        candidates.push((option, obs));
    }
    let candidate_qualities = candidates
        .iter()
        .map(|(_, obs)| quality_max_confidence(model, obs).map(|q| q.value))
        .collect::<Result<Vec<_>>>()?;
    let (best, quality) = select_single_shot(&candidates, model)?;
    let chosen_index = indices[best];
    let observation = capture(spec, &scene, &[chosen_index], None, derive(seed, Stream::Final, 0))?;
    let prediction = model.predict(&observation)?;
    let predicted = argmax(&prediction);
    Ok(SelectionRecord {
        seed,
        candidates: indices,
        candidate_qualities,
        chosen_index,
        chosen_option: candidates.swap_remove(best).0,
        quality,
        observation,
        prediction,
        predicted,
        label,
        correct: predicted == label,
    })
}

/// Non-adaptive single-shot baseline: classify a capture at `o_fixed`,
/// drawn with the same final-capture seed as [`run_single_shot`].
pub fn run_single_shot_fixed(spec: &EnvSpec, model: &PerceptionModel, seed: u64) -> Result<SelectionRecord> {
    spec.validate()?;
    let m = &spec.modalities[0];
    let (_, scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let label = scene_label(&scene)?;
    let observation = capture(spec, &scene, &[m.fixed], None, derive(seed, Stream::Final, 0))?;
    let quality = quality_max_confidence(model, &observation)?;
    let prediction = model.predict(&observation)?;
    let predicted = argmax(&prediction);
    Ok(SelectionRecord {
        seed,
        candidates: vec![m.fixed],
        candidate_qualities: vec![quality.value],
        chosen_index: m.fixed,
        chosen_option: m.fixed_option(),
        quality,
        observation,
        prediction,
        predicted,
        label,
        correct: predicted == label,
    })
}

/// Perception-only adaptive sensing: the sensing table learns from the
/// max-confidence quality of the observation each choice produces.
/// Correctness of the model is recorded per step but not rewarded.
pub fn run_perception_only(
    spec: &EnvSpec,
    sense: &mut SenseController,
    model: &PerceptionModel,
    seed: u64,
) -> Result<Trajectory> {
    require_perception(spec)?;
    if spec.modalities.len() != 1 {
        return Err(Error::ModalityMismatch {
            expected: 1,
            actual: spec.modalities.len(),
        });
    }
    let space = &spec.modalities[0].space;
    let (mut state, mut scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let mut option = spec.modalities[0].fixed;
    let mut obs = capture(spec, &scene, &[option], None, derive(seed, Stream::Measure, 0))?;
    let mut q = quality_max_confidence(model, &obs)?;
    let mut trajectory = Trajectory::new(seed);
    for t in 0..spec.horizon {
        let correct = classify(model, &obs, scene.label)?;
        let next_option = sense.choose(&q, option, derive(seed, Stream::Sense, t as u64))?;
        let out = env_step(spec, &state, None, derive(seed, Stream::Env, t as u64))?;
        let next_obs = capture(spec, &out.scene, &[next_option], None, derive(seed, Stream::Measure, t as u64 + 1))?;
        let q_next = quality_max_confidence(model, &next_obs)?;
        let reward = compose_reward(0.0, &[(1.0, q_next)]);
        sense.learn(q.value, option, next_option, reward.total, q_next.value, out.done)?;
        trajectory.steps.push(StepRecord {
            step: t,
            observation: obs,
            action: None,
            options: vec![space.option(option)?],
            option_indices: vec![option],
            weights: None,
            qualities: vec![q],
            reward,
            correct,
            done: out.done,
        });
        if out.done {
            break;
        }
        state = out.state;
        scene = out.scene;
        obs = next_obs;
        option = next_option;
        q = q_next;
    }
    Ok(trajectory)
}

/// Placeholder quality when a loop runs without a perception model.
fn no_quality() -> QualityScore {
    QualityScore {
        value: 0.0,
        metric: MetricId::MaxConfidence,
    }
}

/// Sensorimotor loop: joint action and sensing choices, both tables trained
/// on `R_task + λ Q_M(s_{t+1})`. With `model = None` no quality is computed
/// or rewarded, which together with a fixed sensing controller and a plain
/// action policy reduces to [`run_conventional`].
pub fn run_sensorimotor(
    spec: &EnvSpec,
    action: &mut ActionPolicyState,
    sense: &mut SenseController,
    model: Option<&PerceptionModel>,
    lambda: f64,
    seed: u64,
) -> Result<Trajectory> {
    require_actions(spec)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::out_of_range("lambda", lambda, "[0, inf)"));
    }
    if spec.modalities.len() != 1 {
        return Err(Error::ModalityMismatch {
            expected: 1,
            actual: spec.modalities.len(),
        });
    }
    let score = |obs: &Observation| match model {
        Some(m) => quality_max_confidence(m, obs).map(Some),
        None => Ok(None),
    };
    let space = &spec.modalities[0].space;
    let mut option = match sense {
        SenseController::Fixed(i) => *i,
        _ => spec.modalities[0].fixed,
    };
    let (mut state, scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let mut obs = capture(spec, &scene, &[option], None, derive(seed, Stream::Measure, 0))?;
    let mut q = score(&obs)?;
    let mut bucket = spec.observation_bucket(&obs)?;
    let mut prev_action = None;
    let mut trajectory = Trajectory::new(seed);
    for t in 0..spec.horizon {
        let s = action.state_index(bucket, prev_action, q.as_ref())?;
        let a = action_policy_step(action, bucket, prev_action, q.as_ref(), derive(seed, Stream::Action, t as u64))?;
        let q_now = q.unwrap_or_else(no_quality);
        let next_option = sense.choose(&q_now, option, derive(seed, Stream::Sense, t as u64))?;
        let out = env_step(spec, &state, Some(a), derive(seed, Stream::Env, t as u64))?;
        let next_obs = capture(spec, &out.scene, &[next_option], None, derive(seed, Stream::Measure, t as u64 + 1))?;
        let q_next = score(&next_obs)?;
        let next_bucket = spec.observation_bucket(&next_obs)?;
        let reward = match q_next {
            Some(qn) => compose_reward(out.reward, &[(lambda, qn)]),
            None => compose_reward(out.reward, &[]),
        };
        let s_next = action.state_index(next_bucket, Some(a), q_next.as_ref())?;
        action.learn(s, a, reward.total, s_next, out.done)?;
        let q_next_value = q_next.unwrap_or_else(no_quality).value;
        sense.learn(q_now.value, option, next_option, reward.total, q_next_value, out.done)?;
        trajectory.steps.push(StepRecord {
            step: t,
            observation: obs,
            action: Some(a),
            options: vec![space.option(option)?],
            option_indices: vec![option],
            weights: None,
            qualities: q.into_iter().collect(),
            reward,
            correct: None,
            done: out.done,
        });
        if out.done {
            break;
        }
        state = out.state;
        obs = next_obs;
        q = q_next;
        bucket = next_bucket;
        prev_action = Some(a);
        option = next_option;
    }
    Ok(trajectory)
}

/// Cross-modal qualities `(Q_grip, Q_vis)` of a grip observation.
fn grip_qualities(spec: &EnvSpec, obs: &Observation, model: &PerceptionModel, prev_action: Option<usize>) -> Result<(QualityScore, QualityScore)> {
    let cam = &obs.options[modality::VISUAL];
    let tact = &obs.options[modality::TACTILE];
    debug_assert_eq!(spec.modalities.len(), 2);
    Ok((
        quality_grip(obs, prev_action, tact)?,
        quality_visual_alignment(obs, prev_action, cam, tact, model)?,
    ))
}

/// Multimodal sparse-reward loop: per-modality sensing with quality-softmax
/// modality weights and `R_sparse + λ_tact Q_grip + λ_vis Q_vis`. The action
/// policy's quality context is `Q_grip`.
pub fn run_multimodal_sparse(
    spec: &EnvSpec,
    action: &mut ActionPolicyState,
    sense: &mut MultiSensePolicy,
    model: &PerceptionModel,
    lambda_tact: f64,
    lambda_vis: f64,
    seed: u64,
) -> Result<Trajectory> {
    require_actions(spec)?;
    if spec.modalities.len() != 2 || sense.modalities.len() != 2 {
        return Err(Error::ModalityMismatch {
            expected: 2,
            actual: spec.modalities.len().min(sense.modalities.len()),
        });
    }
    for (name, v) in [("lambda_tact", lambda_tact), ("lambda_vis", lambda_vis)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::out_of_range(name, v, "[0, inf)"));
        }
    }
    let mut options: Vec<usize> = spec.modalities.iter().map(|m| m.fixed).collect();
    let mut weights = ModalityWeights::uniform(2)?;
    let (mut state, scene) = env_reset(spec, derive(seed, Stream::Reset, 0))?;
    let mut obs = capture(spec, &scene, &options, Some(&weights), derive(seed, Stream::Measure, 0))?;
    let (mut q_grip, mut q_vis) = grip_qualities(spec, &obs, model, None)?;
    let mut bucket = spec.observation_bucket(&obs)?;
    let mut prev_action = None;
    let mut trajectory = Trajectory::new(seed);
    for t in 0..spec.horizon {
        let s = action.state_index(bucket, prev_action, Some(&q_grip))?;
        let a = action_policy_step(action, bucket, prev_action, Some(&q_grip), derive(seed, Stream::Action, t as u64))?;
        let mut by_modality = [q_grip; 2];
        by_modality[modality::VISUAL] = q_vis;
        by_modality[modality::TACTILE] = q_grip;
        let (next_options, next_weights) =
            multi_sense_policy_step(sense, &by_modality, &options, derive(seed, Stream::Sense, t as u64))?;
        let out = env_step(spec, &state, Some(a), derive(seed, Stream::Env, t as u64))?;
        let next_obs = capture(
            spec,
            &out.scene,
            &next_options,
            Some(&next_weights),
            derive(seed, Stream::Measure, t as u64 + 1),
        )?;
        let (g_next, v_next) = grip_qualities(spec, &next_obs, model, Some(a))?;
        let reward = compose_reward(out.reward, &[(lambda_tact, g_next), (lambda_vis, v_next)]);
        let next_bucket = spec.observation_bucket(&next_obs)?;
        let s_next = action.state_index(next_bucket, Some(a), Some(&g_next))?;
        action.learn(s, a, reward.total, s_next, out.done)?;
        let mut next_by_modality = [g_next; 2];
        next_by_modality[modality::VISUAL] = v_next;
        for (n, policy) in sense.modalities.iter_mut().enumerate() {
            policy.learn(
                by_modality[n].value,
                options[n],
                next_options[n],
                reward.total,
                next_by_modality[n].value,
                out.done,
            )?;
        }
        trajectory.steps.push(StepRecord {
            step: t,
            action: Some(a),
            options: obs.options.clone(),
            option_indices: options.clone(),
            weights: Some(weights.clone()),
            qualities: vec![q_grip, q_vis],
            reward,
            correct: None,
            done: out.done,
            observation: obs,
        });
        if out.done {
            break;
        }
        state = out.state;
        obs = next_obs;
        q_grip = g_next;
        q_vis = v_next;
        bucket = next_bucket;
        prev_action = Some(a);
        options = next_options;
        weights = next_weights;
    }
    Ok(trajectory)
}
