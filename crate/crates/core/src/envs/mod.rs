//! Synthetic environments: latent dynamics, analog scenes and task rewards.
//!
//! Every kind is deterministic given `(spec, seed)`. Perception-only kinds
//! (scene classification, drifting perception) take no action; their task
//! reward is left at 0 here because correctness depends on the perception
//! model, which the loops score.

mod balance;
mod grip;
mod scene;

pub use balance::{balance_model, BalanceParams, BalanceState, THETA, THETA_DOT};
pub use grip::{grip_visual_model, GripParams, GripState, REGRIP, RELEASE, TURN};
pub use scene::{prototypes, SceneParams, SceneState};

use serde::{Deserialize, Serialize};

use crate::domain::{AnalogScene, Axis, Observation, OptionSpace, SensorOption};
use crate::error::{Error, Result};
use crate::learn::FiniteMdp;
use crate::perception::PerceptionModel;
use crate::sensing::{CaptureModel, Response};

/// One sensory channel: its option grid, capture model and fixed option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub space: OptionSpace,
    pub capture: CaptureModel,
    /// Grid index of `o_fixed`.
    pub fixed: usize,
}

impl ModalitySpec {
    pub fn fixed_option(&self) -> SensorOption {
        self.space.option(self.fixed).expect("validated fixed index")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvKind {
    SceneClassification(SceneParams),
    DriftingPerception(SceneParams),
    Balance(BalanceParams),
    Grip(GripParams),
    /// An explicit finite MDP observed through a one-hot scene.
    Mdp(FiniteMdp),
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::SceneClassification(_) => "scene-classification",
            EnvKind::DriftingPerception(_) => "drifting-perception",
            EnvKind::Balance(_) => "balance",
            EnvKind::Grip(_) => "grip",
            EnvKind::Mdp(_) => "mdp",
        }
    }

    pub fn is_perception_only(&self) -> bool {
        matches!(
            self,
            EnvKind::SceneClassification(_) | EnvKind::DriftingPerception(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// |A|; zero for perception-only kinds.
    pub actions: usize,
    pub modalities: Vec<ModalitySpec>,
    /// Episode horizon T.
    pub horizon: usize,
}

/// Latent environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvState {
    Scene(SceneState),
    Balance(BalanceState),
    Grip(GripState),
    Mdp { state: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub scene: AnalogScene,
    pub reward: f64,
    pub done: bool,
}

pub(crate) fn grid2(stops: (f64, f64, usize), gain: (f64, f64, usize)) -> OptionSpace {
    OptionSpace::new(vec![
        Axis::new("exposure", stops.0, stops.1, stops.2).expect("valid axis"),
        Axis::new("gain", gain.0, gain.1, gain.2).expect("valid axis"),
    ])
    .expect("valid space")
}

impl EnvSpec {
    /// Single-shot classification: one scene per episode, T = 1, 5x5
    /// exposure/gain grid with `o_fixed` = (0 stops, gain 1).
    pub fn scene_classification() -> Self {
        EnvSpec {
            kind: EnvKind::SceneClassification(SceneParams::default()),
            actions: 0,
            modalities: vec![scene::camera_modality()],
            horizon: 1,
        }
    }

    /// Classification under a lighting random walk, T = 50.
    pub fn drifting_perception() -> Self {
        EnvSpec {
            kind: EnvKind::DriftingPerception(SceneParams::default()),
            actions: 0,
            modalities: vec![scene::camera_modality()],
            horizon: 50,
        }
    }

    pub fn balance() -> Self {
        EnvSpec {
            kind: EnvKind::Balance(BalanceParams::default()),
            actions: 2,
            modalities: vec![balance::range_modality()],
            horizon: 200,
        }
    }

    pub fn grip() -> Self {
        EnvSpec {
            kind: EnvKind::Grip(GripParams::default()),
            actions: 3,
            modalities: grip::modalities(),
            horizon: 60,
        }
    }

    /// Wrap an explicit MDP; the observation is a noiseless one-hot capture.
    pub fn mdp(mdp: FiniteMdp, horizon: usize) -> Self {
        let space = OptionSpace::new(vec![Axis::new("exposure", 0.0, 1.0, 1).expect("valid axis")])
            .expect("valid space");
        EnvSpec {
            actions: mdp.actions,
            kind: EnvKind::Mdp(mdp),
            modalities: vec![ModalitySpec {
                name: "state".into(),
                space,
                capture: CaptureModel::default(),
                fixed: 0,
            }],
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be >= 1".into()));
        }
        if self.modalities.is_empty() {
            return Err(Error::NoModalities);
        }
        for m in &self.modalities {
            m.capture.validate()?;
            if m.fixed >= m.space.total_size() {
                return Err(Error::InvalidSpec(format!(
                    "fixed option {} outside the {}-option grid of `{}`",
                    m.fixed,
                    m.space.total_size(),
                    m.name
                )));
            }
        }
        let expected_actions = match &self.kind {
            EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p) => {
                p.validate()?;
                0
            }
            EnvKind::Balance(p) => {
                p.validate()?;
                2
            }
            EnvKind::Grip(p) => {
                p.validate()?;
                if self.modalities.len() != 2 {
                    return Err(Error::ModalityMismatch {
                        expected: 2,
                        actual: self.modalities.len(),
                    });
                }
                3
            }
            EnvKind::Mdp(mdp) => {
                mdp.validate()?;
                mdp.actions
            }
        };
        if self.actions != expected_actions {
            return Err(Error::InvalidSpec(format!(
                "{} expects {} actions, spec declares {}",
                self.kind.name(),
                expected_actions,
                self.actions
            )));
        }
        if matches!(self.kind, EnvKind::SceneClassification(_)) && self.horizon != 1 {
            return Err(Error::InvalidSpec("scene classification has horizon 1".into()));
        }
        Ok(())
    }

    pub fn is_perception_only(&self) -> bool {
        self.kind.is_perception_only()
    }

    pub fn fixed_options(&self) -> Vec<SensorOption> {
        self.modalities.iter().map(ModalitySpec::fixed_option).collect()
    }

    /// Number of discrete observation buckets seen by action policies.
    pub fn obs_buckets(&self) -> usize {
        match &self.kind {
            EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p) => p.classes,
            EnvKind::Balance(p) => p.obs_buckets(),
            EnvKind::Grip(p) => p.obs_buckets(),
            EnvKind::Mdp(mdp) => mdp.states,
        }
    }

    /// Discretize an observation for tabular action policies.
    pub fn observation_bucket(&self, obs: &Observation) -> Result<usize> {
        match &self.kind {
            EnvKind::Balance(p) => p.bucket(obs),
            EnvKind::Grip(p) => p.bucket(obs),
            EnvKind::Mdp(_) => Ok(crate::perception::argmax(obs.modality(0)?)),
            EnvKind::SceneClassification(_) | EnvKind::DriftingPerception(_) => Err(
                Error::Framework("perception-only environments have no action buckets".into()),
            ),
        }
    }

    /// Fixed perception model of kinds that ship one (balance, grip visual).
    pub fn builtin_model(&self) -> Option<PerceptionModel> {
        match &self.kind {
            EnvKind::Balance(p) => Some(balance_model(p)),
            EnvKind::Grip(p) => Some(grip_visual_model(p)),
            _ => None,
        }
    }
}

/// Initial latent state and first analog scene.
pub fn env_reset(spec: &EnvSpec, seed: u64) -> Result<(EnvState, AnalogScene)> {
    spec.validate()?;
    match &spec.kind {
        EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p) => {
            let (state, scene) = scene::reset(p, seed)?;
            Ok((EnvState::Scene(state), scene))
        }
        EnvKind::Balance(p) => {
            let (state, scene) = balance::reset(p, seed)?;
            Ok((EnvState::Balance(state), scene))
        }
        EnvKind::Grip(p) => {
            let (state, scene) = grip::reset(p, seed)?;
            Ok((EnvState::Grip(state), scene))
        }
        EnvKind::Mdp(mdp) => Ok((
            EnvState::Mdp { state: mdp.start },
            one_hot(mdp.states, mdp.start)?,
        )),
    }
}

/// One environment transition. Perception-only kinds require `action =
/// None`; the others require a valid action index.
pub fn env_step(
    spec: &EnvSpec,
    state: &EnvState,
    action: Option<usize>,
    seed: u64,
) -> Result<StepOutcome> {
    match (&spec.kind, state) {
        (EnvKind::SceneClassification(p), EnvState::Scene(s)) => {
            if action.is_some() {
                return Err(Error::InvalidAction(action));
            }
            let scene = scene::observe(p, s, seed)?;
            Ok(StepOutcome {
                state: EnvState::Scene(s.clone()),
                scene,
                reward: 0.0,
                done: true,
            })
        }
        (EnvKind::DriftingPerception(p), EnvState::Scene(s)) => {
            if action.is_some() {
                return Err(Error::InvalidAction(action));
            }
            let (next, scene) = scene::drift(p, s, seed)?;
            Ok(StepOutcome {
                state: EnvState::Scene(next),
                scene,
                reward: 0.0,
                done: false,
            })
        }
        (EnvKind::Balance(p), EnvState::Balance(s)) => {
            let a = require_action(action, spec.actions)?;
            let (next, scene, reward, done) = balance::step(p, s, a, seed)?;
            Ok(StepOutcome {
                state: EnvState::Balance(next),
                scene,
                reward,
                done,
            })
        }
        (EnvKind::Grip(p), EnvState::Grip(s)) => {
            let a = require_action(action, spec.actions)?;
            let (next, scene, reward, done) = grip::step(p, s, a, seed)?;
            Ok(StepOutcome {
                state: EnvState::Grip(next),
                scene,
                reward,
                done,
            })
        }
        (EnvKind::Mdp(mdp), EnvState::Mdp { state }) => {
            let a = require_action(action, spec.actions)?;
            let u: f64 = rand::Rng::random(&mut crate::seed::rng(seed));
            let next = mdp.sample_next(*state, a, u);
            Ok(StepOutcome {
                state: EnvState::Mdp { state: next },
                scene: one_hot(mdp.states, next)?,
                reward: mdp.rewards[next],
                done: mdp.terminal[next],
            })
        }
        _ => Err(Error::InvalidSpec("environment state does not match spec".into())),
    }
}

fn require_action(action: Option<usize>, actions: usize) -> Result<usize> {
    match action {
        Some(a) if a < actions => Ok(a),
        other => Err(Error::InvalidAction(other)),
    }
}

fn one_hot(n: usize, i: usize) -> Result<AnalogScene> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    AnalogScene::new(vec![v], vec![], Some(i))
}

pub(crate) fn range_capture(read_noise: f64) -> CaptureModel {
    CaptureModel {
        read_noise,
        gain_noise: 0.0,
        blur: 1,
        response: Response::Range,
    }
}

pub(crate) fn exposure_capture(read_noise: f64, gain_noise: f64) -> CaptureModel {
    CaptureModel {
        read_noise,
        gain_noise,
        blur: 1,
        response: Response::ExposureGain,
    }
}
