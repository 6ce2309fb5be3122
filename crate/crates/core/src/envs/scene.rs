//! Classification scenes under lighting shift.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{exposure_capture, grid2, ModalitySpec};
use crate::domain::AnalogScene;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// C.
    pub classes: usize,
    /// d.
    pub dim: usize,
    /// Seed of the prototype family; fixed across episodes.
    pub prototype_seed: u64,
    /// Prototype values lie in `base ± contrast`.
    pub base: f64,
    pub contrast: f64,
    /// Per-feature analog noise σ.
    pub feature_noise: f64,
    /// Episode lighting L ~ Uniform[-shift, shift] stops.
    pub lighting_shift: f64,
    /// σ_L of the drifting random walk; 0 gives static lighting.
    pub drift: f64,
    /// Drifting lighting is clamped to [-clamp, clamp].
    pub lighting_clamp: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            classes: 4,
            dim: 16,
            prototype_seed: 0x5eed,
            base: 0.6,
            contrast: 0.3,
            feature_noise: 0.02,
            lighting_shift: 3.0,
            drift: 0.5,
            lighting_clamp: 4.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim == 0 {
            return Err(Error::InvalidSpec("scenes need >= 2 classes and >= 1 feature".into()));
        }
        for (name, v) in [
            ("base", self.base),
            ("contrast", self.contrast),
            ("feature noise", self.feature_noise),
            ("lighting shift", self.lighting_shift),
            ("drift", self.drift),
            ("lighting clamp", self.lighting_clamp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Latent scene: the class and current lighting in stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub label: usize,
    pub lighting: f64,
}

/// Camera with a 5x5 exposure/gain grid; `o_fixed` is (0 stops, gain 1).
pub(super) fn camera_modality() -> ModalitySpec {
    let space = grid2((-3.0, 3.0, 5), (1.0, 4.0, 5));
    ModalitySpec {
        name: "camera".into(),
        space,
        capture: exposure_capture(0.03, 0.01),
        fixed: 10,
    }
}

/// Class prototypes, `classes x dim`, each element `base + contrast * u`
/// with `u ~ Uniform[-1, 1]`. Every prototype has the same mean brightness
/// up to sampling error, so classes differ by pattern only.
pub fn prototypes(params: &SceneParams) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(params.prototype_seed);
    (0..params.classes)
        .map(|_| {
            let raw: Vec<f64> = (0..params.dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            raw.iter()
                .map(|u| params.base + params.contrast * (u - mean).clamp(-1.0, 1.0))
                .collect()
        })
        .collect()
}

fn render(params: &SceneParams, state: &SceneState, seed: u64) -> Result<AnalogScene> {
    let protos = prototypes(params);
    let noise = Normal::new(0.0, params.feature_noise)
        .map_err(|e| Error::InvalidSpec(format!("feature noise: {e}")))?;
    let mut rng = seed::rng(seed);
    let scale = state.lighting.exp2();
    let features = protos[state.label]
        .iter()
        .map(|p| p * scale + noise.sample(&mut rng))
        .collect();
    AnalogScene::new(vec![features], vec![state.lighting], Some(state.label))
}

pub(super) fn reset(params: &SceneParams, seed: u64) -> Result<(SceneState, AnalogScene)> {
    params.validate()?;
    let mut rng = seed::rng(seed);
    let label = rng.random_range(0..params.classes);
    let lighting = if params.lighting_shift > 0.0 {
        rng.random_range(-params.lighting_shift..=params.lighting_shift)
    } else {
        0.0
    };
    let state = SceneState { label, lighting };
    let scene = render(params, &state, seed::derive(seed, Stream::Env, 0))?;
    Ok((state, scene))
}

/// A fresh draw of the same latent scene (lighting unchanged).
pub(super) fn observe(params: &SceneParams, state: &SceneState, seed: u64) -> Result<AnalogScene> {
    render(params, state, seed)
}

/// `L_{t+1} = clamp(L_t + N(0, σ_L), ±clamp)`, label fixed.
pub(super) fn drift(params: &SceneParams, state: &SceneState, seed: u64) -> Result<(SceneState, AnalogScene)> {
    let mut rng = seed::rng(seed);
    let step: f64 = if params.drift > 0.0 {
        Normal::new(0.0, params.drift)
            .map_err(|e| Error::InvalidSpec(format!("drift: {e}")))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let lighting = (state.lighting + step).clamp(-params.lighting_clamp, params.lighting_clamp);
    let next = SceneState {
        label: state.label,
        lighting,
    };
    let scene = render(params, &next, seed::derive(seed, Stream::Env, 1))?;
    Ok((next, scene))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_in_range() {
        let p = SceneParams::default();
        for s in 0..500 {
            let (state, scene) = reset(&p, s).unwrap();
            assert!(state.label < p.classes);
            assert_eq!(scene.label, Some(state.label));
            assert!(state.lighting.abs() <= 3.0);
        }
    }

    #[test]
    fn prototypes_share_brightness_but_differ() {
        let p = SceneParams::default();
        let protos = prototypes(&p);
        for proto in &protos {
            let mean = proto.iter().sum::<f64>() / proto.len() as f64;
            assert!((mean - p.base).abs() < 0.05, "mean {mean}");
        }
        assert_ne!(protos[0], protos[1]);
    }

    #[test]
    fn drift_clamps() {
        let p = SceneParams {
            drift: 5.0,
            ..SceneParams::default()
        };
        let mut state = SceneState {
            label: 0,
            lighting: 3.9,
        };
        let mut hit = false;
        for t in 0..200 {
            let (next, scene) = drift(&p, &state, t).unwrap();
            assert!(next.lighting.abs() <= 4.0);
            assert_eq!(scene.context, vec![next.lighting]);
            hit |= next.lighting.abs() == 4.0;
            state = next;
        }
        assert!(hit);
    }

    #[test]
    fn static_variant_keeps_lighting() {
        let p = SceneParams {
            drift: 0.0,
            ..SceneParams::default()
        };
        let state = SceneState {
            label: 1,
            lighting: 0.7,
        };
        assert_eq!(drift(&p, &state, 3).unwrap().0, state);
    }
}
