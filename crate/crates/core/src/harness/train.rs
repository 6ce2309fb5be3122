//! Fitting the classification model used by scene experiments.

use serde::{Deserialize, Serialize};

use crate::envs::{env_reset, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::loops::capture;
use crate::perception::{train_perception, PerceptionModel};
use crate::seed::{derive, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetup {
    pub samples: usize,
    /// Training scenes use lighting Uniform[-lighting, lighting] stops.
    pub lighting: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        TrainingSetup {
            samples: 2000,
            lighting: 1.0,
            epochs: 400,
            learning_rate: 2.0,
            seed: 7,
        }
    }
}

/// Train a classifier on `o_fixed` captures of scenes whose lighting stays
/// close to nominal, mimicking a model trained on well-exposed data.
pub fn train_scene_model(spec: &EnvSpec, setup: &TrainingSetup) -> Result<PerceptionModel> {
    let params = match &spec.kind {
        EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p) => p.clone(),
        other => {
            return Err(Error::Framework(format!(
                "scene models train on classification scenes, not {}",
                other.name()
            )))
        }
    };
    if setup.samples == 0 {
        return Err(Error::Empty("training set"));
    }
    let mut train_spec = EnvSpec::scene_classification();
    train_spec.kind = EnvKind::SceneClassification(crate::envs::SceneParams {
        lighting_shift: setup.lighting,
        ..params.clone()
    });
    train_spec.modalities = spec.modalities.clone();
    let fixed = spec.modalities[0].fixed;
    let data = (0..setup.samples)
        .map(|i| {
            let seed = derive(setup.seed, Stream::Training, i as u64);
            let (_, scene) = env_reset(&train_spec, seed)?;
            let obs = capture(&train_spec, &scene, &[fixed], None, derive(seed, Stream::Measure, 0))?;
            let label = scene.label.expect("classification scenes are labelled");
            Ok((obs, label))
        })
        .collect::<Result<Vec<_>>>()?;
    train_perception(&data, params.classes, setup.epochs, setup.learning_rate, setup.seed)
}
