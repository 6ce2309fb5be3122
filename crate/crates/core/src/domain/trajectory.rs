use serde::{Deserialize, Serialize};

use super::{ModalityWeights, Observation, QualityScore, RewardBreakdown, SensorOption};

/// One environment step of a closed loop.
///
/// `observation` is the state observed at the start of the step, captured
/// with `options`; `reward` is what the step earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub observation: Observation,
    pub action: Option<usize>,
    /// Option per modality that produced `observation`.
    pub options: Vec<SensorOption>,
    /// Flat grid index per modality.
    pub option_indices: Vec<usize>,
    pub weights: Option<ModalityWeights>,
    pub qualities: Vec<QualityScore>,
    pub reward: RewardBreakdown,
    /// Correctness of the perception model on `observation`, where defined.
    pub correct: Option<bool>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(seed: u64) -> Self {
        Trajectory {
            seed,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.total).sum()
    }

    pub fn task_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.task).sum()
    }

    pub fn mean_quality(&self) -> Option<f64> {
        let qs: Vec<f64> = self
            .steps
            .iter()
            .filter_map(|s| s.qualities.first().map(|q| q.value))
            .collect();
        (!qs.is_empty()).then(|| qs.iter().sum::<f64>() / qs.len() as f64)
    }

    /// Step indices run 0, 1, 2, ... without gaps.
    pub fn indices_valid(&self) -> bool {
        self.steps.iter().enumerate().all(|(i, s)| s.step == i)
    }
}
