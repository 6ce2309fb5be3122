//! Sensing and action policies.
//!
//! * `sample_candidates`: state-agnostic uniform sampling of k distinct options,
//! * `select_single_shot`: argmax of the max-confidence quality over candidates,
//! * [`SensePolicyState`]: tabular ε-greedy sensing policy keyed by
//!   (quality bucket, previous option),
//! * [`ActionPolicyState`]: tabular ε-greedy action policy keyed by
//!   (observation bucket, quality bucket, previous action),
//! * [`MultiSensePolicy`]: per-modality sensing plus a quality-softmax
//!   update of the modality weights.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::domain::{LearnerConfig, ModalityWeights, Observation, OptionSpace, QualityScore, SensorOption};
use crate::error::{Error, Result};
use crate::learn::{epsilon_greedy, learn_step, QTable};
use crate::perception::{quality_max_confidence, PerceptionModel};
use crate::seed;

/// `min(floor(q * B), B - 1)`.
pub fn quality_bucket(q: f64, buckets: usize) -> usize {
    ((q * buckets as f64).floor().max(0.0) as usize).min(buckets - 1)
}

/// `k` distinct grid options drawn uniformly without replacement, returned in
/// ascending grid order.
pub fn sample_candidates(space: &OptionSpace, k: usize, seed: u64) -> Result<Vec<SensorOption>> {
    let total = space.total_size();
    if k == 0 || k > total {
        return Err(Error::out_of_range("k", k, format!("[1, {total}]")));
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, total, k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| space.option(i)).collect()
}

/// Pick the candidate whose observation has the highest max-confidence
/// quality; the earliest candidate wins ties.
pub fn select_single_shot(
    candidates: &[(SensorOption, Observation)],
    model: &PerceptionModel,
) -> Result<(usize, QualityScore)> {
    let mut best: Option<(usize, QualityScore)> = None;
    for (i, (_, obs)) in candidates.iter().enumerate() {
        let q = quality_max_confidence(model, obs)?;
        if best.map_or(true, |(_, b)| q.value > b.value) {
            best = Some((i, q));
        }
    }
    best.ok_or(Error::Empty("candidate list"))
}

/// Learned state of the sensing policy: values over next options for each
/// (quality bucket, previous option) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensePolicyState {
    buckets: usize,
    options: usize,
    table: QTable,
    config: LearnerConfig,
}

impl SensePolicyState {
    pub fn new(options: usize, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(SensePolicyState {
            buckets: config.buckets,
            options,
            table: QTable::new(config.buckets * options, options)?,
            config,
        })
    }

    pub fn options(&self) -> usize {
        self.options
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QTable {
        &mut self.table
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.config.epsilon = epsilon;
    }

    pub fn state_index(&self, q: f64, prev_option: usize) -> Result<usize> {
        if prev_option >= self.options {
            return Err(Error::out_of_range(
                "previous option",
                prev_option,
                format!("[0, {})", self.options),
            ));
        }
        Ok(quality_bucket(q, self.buckets) * self.options + prev_option)
    }

    /// Q-learning update for the transition (q, o_t) --o_next--> (q_next, o_next).
    pub fn learn(
        &mut self,
        q: f64,
        prev_option: usize,
        next_option: usize,
        reward: f64,
        q_next: f64,
        done: bool,
    ) -> Result<()> {
        let s = self.state_index(q, prev_option)?;
        let s_next = self.state_index(q_next, next_option)?;
        let config = self.config;
        learn_step(&mut self.table, &config, s, next_option, reward, s_next, done)
    }
}

/// `π_sense(o_{t+1} | s_t, o_t, Q_M)`: ε-greedy over the row for
/// `(bucket(q), prev_option)`.
pub fn sense_policy_step(
    state: &SensePolicyState,
    q: &QualityScore,
    prev_option: usize,
    seed: u64,
) -> Result<usize> {
    let s = state.state_index(q.value, prev_option)?;
    Ok(epsilon_greedy(state.table.row(s)?, state.config.epsilon, seed))
}

/// Learned state of the action policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPolicyState {
    obs_buckets: usize,
    quality_buckets: usize,
    /// 1 when the previous action is ignored, `actions + 1` otherwise (the
    /// extra slot stands for "no previous action").
    prev_slots: usize,
    actions: usize,
    table: QTable,
    config: LearnerConfig,
}

impl ActionPolicyState {
    /// Plain `π_action(a | s)` over observation buckets only.
    pub fn new(obs_buckets: usize, actions: usize, config: LearnerConfig) -> Result<Self> {
        Self::with_context(obs_buckets, actions, 1, false, config)
    }

    /// `π_action(a_t | s_t, a_{t-1}, Q_M)`: the observation bucket is
    /// augmented with the quality bucket and the previous action.
    pub fn perception_aware(obs_buckets: usize, actions: usize, config: LearnerConfig) -> Result<Self> {
        Self::with_context(obs_buckets, actions, config.buckets, true, config)
    }

    fn with_context(
        obs_buckets: usize,
        actions: usize,
        quality_buckets: usize,
        use_prev: bool,
        config: LearnerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if obs_buckets == 0 || actions == 0 || quality_buckets == 0 {
            return Err(Error::Empty("action policy dimension"));
        }
        let prev_slots = if use_prev { actions + 1 } else { 1 };
        Ok(ActionPolicyState {
            obs_buckets,
            quality_buckets,
            prev_slots,
            actions,
            table: QTable::new(obs_buckets * quality_buckets * prev_slots, actions)?,
            config,
        })
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn obs_buckets(&self) -> usize {
        self.obs_buckets
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QTable {
        &mut self.table
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.config.epsilon = epsilon;
    }

    pub fn state_index(
        &self,
        obs_bucket: usize,
        prev_action: Option<usize>,
        q: Option<&QualityScore>,
    ) -> Result<usize> {
        if obs_bucket >= self.obs_buckets {
            return Err(Error::out_of_range(
                "observation bucket",
                obs_bucket,
                format!("[0, {})", self.obs_buckets),
            ));
        }
        let qb = match q {
            Some(q) if self.quality_buckets > 1 => quality_bucket(q.value, self.quality_buckets),
            _ => 0,
        };
        let prev = if self.prev_slots == 1 {
            0
        } else {
            match prev_action {
                Some(a) if a < self.actions => a,
                Some(a) => {
                    return Err(Error::out_of_range(
                        "previous action",
                        a,
                        format!("[0, {})", self.actions),
                    ))
                }
                None => self.actions,
            }
        };
        Ok((obs_bucket * self.quality_buckets + qb) * self.prev_slots + prev)
    }

    pub fn learn(&mut self, state: usize, action: usize, reward: f64, next_state: usize, done: bool) -> Result<()> {
        let config = self.config;
        learn_step(&mut self.table, &config, state, action, reward, next_state, done)
    }
}

/// `π_action(a_t | s_t, o_t, a_{t-1}, Q_M)`, ε-greedy.
pub fn action_policy_step(
    state: &ActionPolicyState,
    obs_bucket: usize,
    prev_action: Option<usize>,
    q: Option<&QualityScore>,
    seed: u64,
) -> Result<usize> {
    let s = state.state_index(obs_bucket, prev_action, q)?;
    Ok(epsilon_greedy(state.table.row(s)?, state.config.epsilon, seed))
}

/// Sensing policy over several modalities plus the modality-weight update
/// `w ∝ exp(τ q_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSensePolicy {
    pub modalities: Vec<SensePolicyState>,
    pub temperature: f64,
}

impl MultiSensePolicy {
    pub fn new(options_per_modality: &[usize], config: LearnerConfig) -> Result<Self> {
        if options_per_modality.is_empty() {
            return Err(Error::NoModalities);
        }
        let modalities = options_per_modality
            .iter()
            .map(|&n| SensePolicyState::new(n, config))
            .collect::<Result<_>>()?;
        Ok(MultiSensePolicy {
            modalities,
            temperature: config.temperature,
        })
    }
}

/// Quality-softmax weights: `weights_project(exp(τ (q_n - max q)))`.
pub fn quality_weights(qualities: &[f64], temperature: f64) -> Result<ModalityWeights> {
    if qualities.is_empty() {
        return Err(Error::NoModalities);
    }
    let peak = qualities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = qualities
        .iter()
        .map(|q| (temperature * (q - peak)).exp())
        .collect();
    ModalityWeights::project(&raw)
}

/// `(o_{t+1}, w_{t+1}) = π_multi-sense(s_t, o_t, w_t, Q)`. Modality `n` draws
/// its option with seed `seed + n`.
pub fn multi_sense_policy_step(
    policy: &MultiSensePolicy,
    qualities: &[QualityScore],
    prev_options: &[usize],
    seed: u64,
) -> Result<(Vec<usize>, ModalityWeights)> {
    let n = policy.modalities.len();
    if n == 0 {
        return Err(Error::NoModalities);
    }
    for actual in [qualities.len(), prev_options.len()] {
        if actual != n {
            return Err(Error::ModalityMismatch { expected: n, actual });
        }
    }
    let options = policy
        .modalities
        .iter()
        .zip(qualities)
        .zip(prev_options)
        .enumerate()
        .map(|(i, ((state, q), &prev))| sense_policy_step(state, q, prev, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = qualities.iter().map(|q| q.value).collect();
    Ok((options, quality_weights(&values, policy.temperature)?))
}

/// How a closed loop chooses its next sensor option.
#[derive(Debug, Clone, PartialEq)]
pub enum SenseController {
    /// Learned ε-greedy table.
    Learned(SensePolicyState),
    /// Always the same grid index (`o_fixed`).
    Fixed(usize),
    /// Uniform over `options` grid indices at every step.
    Uniform { options: usize },
}

impl SenseController {
    pub fn choose(&self, q: &QualityScore, prev_option: usize, seed: u64) -> Result<usize> {
        match self {
            SenseController::Learned(state) => sense_policy_step(state, q, prev_option, seed),
            SenseController::Fixed(index) => Ok(*index),
            SenseController::Uniform { options } => {
                Ok(epsilon_greedy(&vec![0.0; *options], 1.0, seed))
            }
        }
    }

    /// Q-learning update; a no-op for non-learning controllers.
    pub fn learn(
        &mut self,
        q: f64,
        prev_option: usize,
        next_option: usize,
        reward: f64,
        q_next: f64,
        done: bool,
    ) -> Result<()> {
        match self {
            SenseController::Learned(state) => {
                state.learn(q, prev_option, next_option, reward, q_next, done)
            }
            _ => Ok(()),
        }
    }

    pub fn as_learned(&self) -> Option<&SensePolicyState> {
        match self {
            SenseController::Learned(state) => Some(state),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Axis, MetricId};
    use proptest::prelude::*;

    fn grid(steps: &[usize]) -> OptionSpace {
        OptionSpace::new(
            steps
                .iter()
                .enumerate()
                .map(|(i, &s)| Axis::new(format!("a{i}"), 0.0, 1.0, s).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn q(v: f64) -> QualityScore {
        QualityScore::new(v, MetricId::MaxConfidence).unwrap()
    }

    #[test]
    fn exhaustive_sample_is_the_enumeration() {
        let space = grid(&[3, 4]);
        let all = sample_candidates(&space, 12, 9).unwrap();
        assert_eq!(all, space.enumerate());
    }

    #[test]
    fn single_sample_is_on_grid() {
        let space = grid(&[5, 5]);
        for seed in 0..20 {
            let one = sample_candidates(&space, 1, seed).unwrap();
            assert_eq!(one.len(), 1);
            assert!(space.index_of(&one[0]).is_ok());
        }
        assert!(sample_candidates(&space, 0, 0).is_err());
        assert!(sample_candidates(&space, 26, 0).is_err());
    }

    #[test]
    fn inclusion_frequency_matches_k_over_n() {
        // Brute-force frequency: every option of an 8-grid should appear in
        // a k=2 sample with probability 2/8.
        let space = grid(&[8]);
        let draws = 100_000;
        let mut hits = [0usize; 8];
        for seed in 0..draws {
            for o in sample_candidates(&space, 2, seed).unwrap() {
                hits[space.index_of(&o).unwrap()] += 1;
            }
        }
        for h in hits {
            let freq = h as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "{freq}");
        }
    }

    #[test]
    fn bucket_clamps_top() {
        assert_eq!(quality_bucket(1.0, 4), 3);
        assert_eq!(quality_bucket(0.0, 4), 0);
        assert_eq!(quality_bucket(0.2499, 4), 0);
        assert_eq!(quality_bucket(0.25, 4), 1);
    }

    fn sense_state(options: usize, epsilon: f64, buckets: usize) -> SensePolicyState {
        SensePolicyState::new(
            options,
            LearnerConfig {
                epsilon,
                buckets,
                ..LearnerConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn greedy_sense_step_takes_strict_maximum() {
        let mut st = sense_state(5, 0.0, 4);
        let s = st.state_index(1.0, 2).unwrap();
        assert_eq!(s, 3 * 5 + 2);
        st.table_mut().set(s, 4, 0.3).unwrap();
        for seed in 0..50 {
            assert_eq!(sense_policy_step(&st, &q(1.0), 2, seed).unwrap(), 4);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let st = sense_state(5, 1.0, 2);
        let draws = 100_000u64;
        let mut counts = [0usize; 5];
        for seed in 0..draws {
            counts[sense_policy_step(&st, &q(0.4), 0, seed).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.2).abs() < 0.02);
        }
    }

    fn action_state(actions: usize, epsilon: f64) -> ActionPolicyState {
        ActionPolicyState::perception_aware(
            3,
            actions,
            LearnerConfig {
                epsilon,
                buckets: 2,
                ..LearnerConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn greedy_action_and_tie_break() {
        let mut st = action_state(2, 0.0);
        assert_eq!(action_policy_step(&st, 1, Some(1), Some(&q(0.9)), 0).unwrap(), 0);
        let s = st.state_index(1, Some(1), Some(&q(0.9))).unwrap();
        st.table_mut().set(s, 1, 1.0).unwrap();
        assert_eq!(action_policy_step(&st, 1, Some(1), Some(&q(0.9)), 0).unwrap(), 1);
        // A different quality bucket is a different state.
        assert_eq!(action_policy_step(&st, 1, Some(1), Some(&q(0.1)), 0).unwrap(), 0);
    }

    #[test]
    fn half_exploration_greedy_frequency() {
        let mut st = action_state(2, 0.5);
        let s = st.state_index(0, None, Some(&q(0.5))).unwrap();
        st.table_mut().set(s, 1, 1.0).unwrap();
        let draws = 100_000u64;
        let greedy = (0..draws)
            .filter(|&seed| action_policy_step(&st, 0, None, Some(&q(0.5)), seed).unwrap() == 1)
            .count();
        assert!((greedy as f64 / draws as f64 - 0.75).abs() < 0.02);
    }

    #[test]
    fn plain_action_policy_ignores_context() {
        let st = ActionPolicyState::new(4, 2, LearnerConfig::default()).unwrap();
        let a = st.state_index(3, Some(1), Some(&q(0.9))).unwrap();
        let b = st.state_index(3, None, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(st.table().states(), 4);
    }

    fn multi(temperature: f64) -> MultiSensePolicy {
        MultiSensePolicy::new(
            &[3, 3],
            LearnerConfig {
                temperature,
                ..LearnerConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn equal_qualities_give_uniform_weights() {
        let (_, w) = multi_sense_policy_step(&multi(3.0), &[q(0.6), q(0.6)], &[0, 0], 1).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_temperature_gives_uniform_weights() {
        let (_, w) = multi_sense_policy_step(&multi(0.0), &[q(1.0), q(0.0)], &[0, 2], 1).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn unit_temperature_logistic_weights() {
        let (opts, w) = multi_sense_policy_step(&multi(1.0), &[q(1.0), q(0.0)], &[0, 0], 1).unwrap();
        let e = std::f64::consts::E;
        assert!((w.as_slice()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((w.as_slice()[0] - 0.731).abs() < 1e-3);
        assert!((w.as_slice()[1] - 0.269).abs() < 1e-3);
        assert_eq!(opts.len(), 2);
    }

    #[test]
    fn multi_sense_mismatch() {
        assert!(multi_sense_policy_step(&multi(1.0), &[q(1.0)], &[0, 0], 1).is_err());
        assert!(MultiSensePolicy::new(&[], LearnerConfig::default()).is_err());
    }

    #[test]
    fn single_shot_selection() {
        let model = PerceptionModel::new(2, 1, vec![5.0, -5.0], vec![0.0, 0.0]).unwrap();
        let mk = |v: f64| Observation {
            modalities: vec![vec![v]],
            clip_flags: vec![vec![false]],
            options: vec![SensorOption::new(vec![v]).unwrap()],
            weights: None,
        };
        let opt = SensorOption::new(vec![0.0]).unwrap();
        let one = vec![(opt.clone(), mk(0.3))];
        assert_eq!(select_single_shot(&one, &model).unwrap().0, 0);
        let same = vec![(opt.clone(), mk(0.3)); 4];
        assert_eq!(select_single_shot(&same, &model).unwrap().0, 0);
        let mixed = vec![(opt.clone(), mk(0.1)), (opt.clone(), mk(0.9)), (opt, mk(0.9))];
        assert_eq!(select_single_shot(&mixed, &model).unwrap().0, 1);
        assert!(select_single_shot(&[], &model).is_err());
    }

    proptest! {
        #[test]
        fn samples_distinct_and_on_grid(
            a in 1usize..6, b in 1usize..6, k_frac in 0.0f64..1.0, seed in any::<u64>()
        ) {
            let space = grid(&[a, b]);
            let k = 1 + (k_frac * (space.total_size() - 1) as f64) as usize;
            let picked = sample_candidates(&space, k, seed).unwrap();
            let mut idx: Vec<usize> = picked.iter().map(|o| space.index_of(o).unwrap()).collect();
            prop_assert_eq!(picked.len(), k);
            prop_assert!(picked.iter().all(|o| space.contains(o)));
            idx.dedup();
            prop_assert_eq!(idx.len(), k);
        }

        #[test]
        fn selection_invariant_under_monotone_transform(
            vals in proptest::collection::vec(0.0f64..1.0, 1..10),
            scale in 0.1f64..10.0,
        ) {
            // Scaling all logits of a 2-class model by a positive constant is a
            // strictly increasing transform of the confidences.
            let mk = |v: f64| Observation {
                modalities: vec![vec![v]],
                clip_flags: vec![vec![false]],
                options: vec![SensorOption::new(vec![0.0]).unwrap()],
                weights: None,
            };
            let cands: Vec<_> = vals.iter().map(|&v| (SensorOption::new(vec![0.0]).unwrap(), mk(v))).collect();
            let m1 = PerceptionModel::new(2, 1, vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
            let m2 = PerceptionModel::new(2, 1, vec![scale, 0.0], vec![0.0, 0.0]).unwrap();
            prop_assert_eq!(
                select_single_shot(&cands, &m1).unwrap().0,
                select_single_shot(&cands, &m2).unwrap().0
            );
        }
    }
}
