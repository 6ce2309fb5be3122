//! Bottle-cap turning with a visual and a tactile channel and a sparse
//! success reward.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{exposure_capture, grid2, ModalitySpec};
use crate::domain::{AnalogScene, Observation};
use crate::error::{Error, Result};
use crate::perception::{modality, PerceptionModel};
use crate::seed::{self, Stream};
use crate::sensing::{CaptureModel, Response};

pub const TURN: usize = 0;
pub const REGRIP: usize = 1;
pub const RELEASE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripParams {
    /// Δφ: cap advance per turn at full engagement.
    pub turn_step: f64,
    /// Fraction of engagement lost on every turn.
    pub engagement_decay: f64,
    /// Success when φ reaches this angle.
    pub success_angle: f64,
    /// Angle lost when the grip is released.
    pub release_slip: f64,
    /// Regrip draws g ~ Uniform[regrip_min, 1].
    pub regrip_min: f64,
    /// Tactile pressure profile at full engagement.
    pub pressure_profile: Vec<f64>,
    /// Visual alignment pattern: `2^L (base + contrast * progress * t_j)`
    /// with `t_j` alternating ±1.
    pub visual_elements: usize,
    pub visual_base: f64,
    pub visual_contrast: f64,
    /// Episode lighting of the visual channel, Uniform[-shift, shift] stops.
    pub lighting_shift: f64,
    /// Analog noise σ of both channels.
    pub analog_noise: f64,
    /// Sharpness of the built-in alignment model.
    pub alignment_gain: f64,
    /// Engagement bucket edges on the tactile estimate of g.
    pub engagement_edges: Vec<f64>,
    /// Progress bucket edges on the visual estimate of φ / success angle.
    pub progress_edges: Vec<f64>,
}

impl Default for GripParams {
    fn default() -> Self {
        GripParams {
            turn_step: 0.07,
            engagement_decay: 0.25,
            success_angle: 1.0,
            release_slip: 0.2,
            regrip_min: 0.5,
            pressure_profile: vec![0.3, 0.5, 0.7, 0.85, 0.85, 0.7, 0.5, 0.3],
            visual_elements: 8,
            visual_base: 0.5,
            visual_contrast: 0.4,
            lighting_shift: 1.5,
            analog_noise: 0.01,
            alignment_gain: 2.0,
            engagement_edges: vec![0.15, 0.55],
            progress_edges: vec![1.0 / 3.0, 2.0 / 3.0],
        }
    }
}

impl GripParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("turn step", self.turn_step),
            ("success angle", self.success_angle),
            ("release slip", self.release_slip),
            ("visual base", self.visual_base),
            ("visual contrast", self.visual_contrast),
            ("lighting shift", self.lighting_shift),
            ("analog noise", self.analog_noise),
            ("alignment gain", self.alignment_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!("grip {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.engagement_decay) || !(0.0..=1.0).contains(&self.regrip_min) {
            return Err(Error::InvalidSpec("grip decay and regrip minimum must lie in [0, 1]".into()));
        }
        if self.success_angle <= 0.0 || self.visual_base <= 0.0 {
            return Err(Error::InvalidSpec("grip success angle and visual base must be positive".into()));
        }
        if self.pressure_profile.is_empty() || self.visual_elements == 0 {
            return Err(Error::Empty("grip channel"));
        }
        if self.pressure_profile.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidSpec("pressure profile must be positive".into()));
        }
        for edges in [&self.engagement_edges, &self.progress_edges] {
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSpec("bucket edges must increase".into()));
            }
        }
        Ok(())
    }

    fn template(&self) -> impl Iterator<Item = f64> {
        (0..self.visual_elements).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
    }

    pub fn obs_buckets(&self) -> usize {
        (self.engagement_edges.len() + 1) * (self.progress_edges.len() + 1)
    }

    /// Engagement estimated from tactile brightness and progress from the
    /// lighting-invariant contrast ratio of the visual pattern.
    pub(super) fn bucket(&self, obs: &Observation) -> Result<usize> {
        let tactile = obs.modality(modality::TACTILE)?;
        let sensitivity = obs
            .options
            .get(modality::TACTILE)
            .and_then(|o| o.value(0))
            .ok_or_else(|| Error::InvalidOption("missing tactile sensitivity".into()))?;
        let profile_mean = self.pressure_profile.iter().sum::<f64>() / self.pressure_profile.len() as f64;
        let mean = tactile.iter().sum::<f64>() / tactile.len() as f64;
        let engagement = mean / sensitivity.exp2() / profile_mean;

        let visual = obs.modality(modality::VISUAL)?;
        let total: f64 = visual.iter().sum();
        let signed: f64 = visual.iter().zip(self.template()).map(|(y, t)| y * t).sum();
        let progress = if total > 0.0 {
            signed / total * self.visual_base / self.visual_contrast
        } else {
            0.0
        };
        let bin = |v: f64, edges: &[f64]| edges.iter().filter(|&&e| v >= e).count();
        Ok(bin(engagement, &self.engagement_edges) * (self.progress_edges.len() + 1)
            + bin(progress, &self.progress_edges))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripState {
    /// Cap angle φ.
    pub angle: f64,
    /// Grip engagement g in [0, 1].
    pub engagement: f64,
    /// Visual lighting in stops, fixed per episode.
    pub lighting: f64,
}

/// Visual camera (modality 0): 5 exposures x 2 gains, `o_fixed` = (0, 1).
/// Tactile array (modality 1): 3 sensitivities x 3 pressure thresholds,
/// `o_fixed` = (0 stops, threshold 0.3).
pub(super) fn modalities() -> Vec<ModalitySpec> {
    vec![
        ModalitySpec {
            name: "visual".into(),
            space: grid2((-2.0, 2.0, 5), (1.0, 2.0, 2)),
            capture: exposure_capture(0.02, 0.02),
            fixed: 4,
        },
        ModalitySpec {
            name: "tactile".into(),
            space: crate::domain::OptionSpace::new(vec![
                crate::domain::Axis::new("sensitivity", -1.0, 1.0, 3).expect("valid axis"),
                crate::domain::Axis::new("threshold", 0.1, 0.5, 3).expect("valid axis"),
            ])
            .expect("valid space"),
            capture: CaptureModel {
                read_noise: 0.02,
                gain_noise: 0.0,
                blur: 1,
                response: Response::Sensitivity,
            },
            fixed: 4,
        },
    ]
}

/// Built-in alignment classifier over the visual channel: class 1
/// ("aligned") scores the alternating template, class 0 is the reference.
pub fn grip_visual_model(params: &GripParams) -> PerceptionModel {
    let d = params.visual_elements;
    let mut weights = vec![0.0; 2 * d];
    for (j, t) in params.template().enumerate() {
        weights[d + j] = params.alignment_gain * t;
    }
    PerceptionModel::new(2, d, weights, vec![0.0, 0.0]).expect("valid alignment model")
}

fn render(params: &GripParams, state: &GripState, seed: u64) -> Result<AnalogScene> {
    let noise = Normal::new(0.0, params.analog_noise)
        .map_err(|e| Error::InvalidSpec(format!("grip noise: {e}")))?;
    let mut rng = seed::rng(seed);
    let progress = (state.angle / params.success_angle).clamp(0.0, 1.0);
    let light = state.lighting.exp2();
    let visual = params
        .template()
        .map(|t| {
            light * (params.visual_base + params.visual_contrast * progress * t) + noise.sample(&mut rng)
        })
        .collect();
    let tactile = params
        .pressure_profile
        .iter()
        .map(|p| p * state.engagement + noise.sample(&mut rng))
        .collect();
    AnalogScene::new(
        vec![visual, tactile],
        vec![state.angle, state.engagement, state.lighting],
        None,
    )
}

pub(super) fn reset(params: &GripParams, seed: u64) -> Result<(GripState, AnalogScene)> {
    params.validate()?;
    let mut rng = seed::rng(seed);
    let lighting = if params.lighting_shift > 0.0 {
        rng.random_range(-params.lighting_shift..=params.lighting_shift)
    } else {
        0.0
    };
    let state = GripState {
        angle: 0.0,
        engagement: 0.0,
        lighting,
    };
    let scene = render(params, &state, seed::derive(seed, Stream::Env, 0))?;
    Ok((state, scene))
}

pub(super) fn step(
    params: &GripParams,
    state: &GripState,
    action: usize,
    seed: u64,
) -> Result<(GripState, AnalogScene, f64, bool)> {
    let mut rng = seed::rng(seed);
    let mut next = state.clone();
    match action {
        TURN => {
            next.angle += params.turn_step * state.engagement;
            next.engagement *= 1.0 - params.engagement_decay;
        }
        REGRIP => {
            next.engagement = rng.random_range(params.regrip_min..=1.0);
        }
        _ => {
            next.engagement = 0.0;
            next.angle = (state.angle - params.release_slip).max(0.0);
        }
    }
    let done = next.angle >= params.success_angle;
    let scene = render(params, &next, seed::derive(seed, Stream::Env, 1))?;
    Ok((next, scene, if done { 1.0 } else { 0.0 }, done))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ModalityWeights;
    use crate::perception::{quality_grip, quality_visual_alignment};
    use crate::sensing::measure_multi;

    fn capture(params: &GripParams, state: &GripState, cam: usize, tact: usize) -> Observation {
        let mods = modalities();
        let scene = render(params, state, 1).unwrap();
        let options = vec![mods[0].space.option(cam).unwrap(), mods[1].space.option(tact).unwrap()];
        let models: Vec<_> = mods.iter().map(|m| m.capture).collect();
        measure_multi(&scene, &options, &ModalityWeights::uniform(2).unwrap(), &models, 2).unwrap()
    }

    #[test]
    fn turning_to_the_threshold_succeeds() {
        let p = GripParams::default();
        let state = GripState {
            angle: 0.95,
            engagement: 1.0,
            lighting: 0.0,
        };
        let (next, _, reward, done) = step(&p, &state, TURN, 0).unwrap();
        assert!(next.angle >= 1.0);
        assert_eq!(reward, 1.0);
        assert!(done);
    }

    #[test]
    fn release_drops_grip_and_slips() {
        let p = GripParams::default();
        let state = GripState {
            angle: 0.5,
            engagement: 0.8,
            lighting: 0.0,
        };
        let (next, _, reward, done) = step(&p, &state, RELEASE, 0).unwrap();
        assert_eq!(next.engagement, 0.0);
        assert!((next.angle - 0.3).abs() < 1e-12);
        assert_eq!(reward, 0.0);
        assert!(!done);
        let (next, ..) = step(&p, &next, REGRIP, 9).unwrap();
        assert!((0.5..=1.0).contains(&next.engagement));
    }

    #[test]
    fn tactile_quality_tracks_engagement() {
        let p = GripParams::default();
        let loose = GripState {
            angle: 0.0,
            engagement: 0.0,
            lighting: 0.0,
        };
        let firm = GripState {
            engagement: 0.9,
            ..loose.clone()
        };
        let mods = modalities();
        let tact = mods[1].space.option(4).unwrap();
        let q0 = quality_grip(&capture(&p, &loose, 4, 4), None, &tact).unwrap();
        let q1 = quality_grip(&capture(&p, &firm, 4, 4), None, &tact).unwrap();
        assert_eq!(q0.value, 0.0);
        assert!(q1.value >= 0.75, "{}", q1.value);
    }

    #[test]
    fn visual_quality_grows_with_progress() {
        let p = GripParams::default();
        let model = grip_visual_model(&p);
        let mods = modalities();
        let (cam, tact) = (mods[0].space.option(4).unwrap(), mods[1].space.option(4).unwrap());
        let q = |angle: f64| {
            let state = GripState {
                angle,
                engagement: 0.5,
                lighting: 0.0,
            };
            quality_visual_alignment(&capture(&p, &state, 4, 4), None, &cam, &tact, &model)
                .unwrap()
                .value
        };
        assert!(q(0.0) < 0.6);
        assert!(q(0.5) > q(0.0));
        assert!(q(0.95) > q(0.5));
    }

    #[test]
    fn buckets_recover_engagement_and_progress() {
        let p = GripParams::default();
        let state = GripState {
            angle: 0.9,
            engagement: 0.9,
            lighting: 1.0,
        };
        // exposure -1 stops cancels the lighting; sensitivity 0.
        let obs = capture(&p, &state, 2, 4);
        assert_eq!(p.bucket(&obs).unwrap(), 2 * 3 + 2);
        let empty = GripState {
            angle: 0.0,
            engagement: 0.0,
            lighting: 1.0,
        };
        assert_eq!(p.bucket(&capture(&p, &empty, 2, 4)).unwrap(), 0);
    }
}
