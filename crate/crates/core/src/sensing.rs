//! The measurement function: analog scene + sensor option -> digital observation.
//!
//! Per element `x` the capture pipeline is
//!
//! 1. response: `x * 2^stops * gain` (exposure/gain sensors), `x * 2^stops`
//!    (sensitivity sensors) or
//!    `0.5 + x / (2 r)` (range sensors),
//! 2. additive read noise `N(0, (σ0 + c_g * max(gain - 1, 0))^2)`,
//! 3. moving-average blur of odd width (window truncated at the edges),
//! 4. clipping to [0, 1] with a per-element flag,
//! 5. rounding to the nearest of 256 levels.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{AnalogScene, ModalityWeights, Observation, SensorOption, LEVELS};
use crate::error::{Error, Result};
use crate::seed;

/// How a sensor option's parameters act on the analog signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Response {
    /// Axis 0 is exposure in log2 stops, axis 1 (if present) a gain
    /// multiplier. Further axes are ignored by the capture.
    ExposureGain,
    /// Axis 0 is sensitivity in log2 stops; remaining axes (e.g. a detection
    /// threshold) are read by downstream metrics, not by the capture.
    Sensitivity,
    /// Axis 0 is a symmetric range `r > 0`: signed analog values in `[-r, r]`
    /// map linearly onto [0, 1], anything outside clips.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureModel {
    /// σ0, base read noise in normalized intensity units.
    pub read_noise: f64,
    /// c_g, extra noise per unit of gain above 1.
    pub gain_noise: f64,
    /// Moving-average width in elements; odd.
    pub blur: usize,
    pub response: Response,
}

impl Default for CaptureModel {
    fn default() -> Self {
        CaptureModel {
            read_noise: 0.0,
            gain_noise: 0.0,
            blur: 1,
            response: Response::ExposureGain,
        }
    }
}

impl CaptureModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.read_noise.is_finite() && self.read_noise >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "read noise must be finite and non-negative, got {}",
                self.read_noise
            )));
        }
        if !(self.gain_noise.is_finite() && self.gain_noise >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "gain noise must be finite and non-negative, got {}",
                self.gain_noise
            )));
        }
        if self.blur == 0 || self.blur % 2 == 0 {
            return Err(Error::InvalidSpec(format!(
                "blur width must be odd and >= 1, got {}",
                self.blur
            )));
        }
        Ok(())
    }
}

/// Scale and offset applied by `option` plus the gain that drives noise.
fn transfer(option: &SensorOption, response: Response) -> Result<(f64, f64, f64)> {
    if option.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidOption("non-finite parameter".into()));
    }
    match response {
        Response::ExposureGain => {
            let stops = option
                .value(0)
                .ok_or_else(|| Error::InvalidOption("missing exposure axis".into()))?;
            let gain = option.value(1).unwrap_or(1.0);
            if gain < 0.0 {
                return Err(Error::InvalidOption(format!("negative gain {gain}")));
            }
            Ok((stops.exp2() * gain, 0.0, gain))
        }
        Response::Sensitivity => {
            let stops = option
                .value(0)
                .ok_or_else(|| Error::InvalidOption("missing sensitivity axis".into()))?;
            Ok((stops.exp2(), 0.0, 1.0))
        }
        Response::Range => {
            let range = option
                .value(0)
                .ok_or_else(|| Error::InvalidOption("missing range axis".into()))?;
            if range <= 0.0 {
                return Err(Error::InvalidOption(format!("non-positive range {range}")));
            }
            Ok((0.5 / range, 0.5, 1.0))
        }
    }
}

/// Values after response, noise and blur, before clipping.
pub fn pre_clip(
    features: &[f64],
    option: &SensorOption,
    model: &CaptureModel,
    seed: u64,
) -> Result<Vec<f64>> {
    model.validate()?;
    let (scale, offset, gain) = transfer(option, model.response)?;
    let sigma = model.read_noise + model.gain_noise * (gain - 1.0).max(0.0);
    let mut rng = seed::rng(seed);
    let noisy: Vec<f64> = features
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x * scale + offset + sigma * z
        })
        .collect();
    Ok(blur(&noisy, model.blur))
}

fn blur(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Nearest 8-bit level of a value already inside [0, 1].
pub fn quantize(v: f64) -> f64 {
    let top = (LEVELS - 1) as f64;
    (v * top).round() / top
}

/// Capture one modality's feature vector.
pub fn measure_features(
    features: &[f64],
    option: &SensorOption,
    model: &CaptureModel,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let raw = pre_clip(features, option, model, seed)?;
    let flags: Vec<bool> = raw.iter().map(|&y| !(0.0..=1.0).contains(&y)).collect();
    let values = raw.iter().map(|&y| quantize(y.clamp(0.0, 1.0))).collect();
    Ok((values, flags))
}

/// `f(e, o)`: capture the first (primary) modality of `scene` under `option`.
pub fn measure(
    scene: &AnalogScene,
    option: &SensorOption,
    model: &CaptureModel,
    seed: u64,
) -> Result<Observation> {
    let (values, flags) = measure_features(scene.modality(0)?, option, model, seed)?;
    Ok(Observation {
        modalities: vec![values],
        clip_flags: vec![flags],
        options: vec![option.clone()],
        weights: None,
    })
}

/// Multimodal capture. Modality `n` is measured independently with seed
/// `seed + n`; the fused feature vector is the weight-scaled concatenation
/// (see [`Observation::features`]).
pub fn measure_multi(
    scene: &AnalogScene,
    options: &[SensorOption],
    weights: &ModalityWeights,
    models: &[CaptureModel],
    seed: u64,
) -> Result<Observation> {
    let n = scene.modalities.len();
    for actual in [options.len(), weights.len(), models.len()] {
        if actual != n {
            return Err(Error::ModalityMismatch {
                expected: n,
                actual,
            });
        }
    }
    let mut modalities = Vec::with_capacity(n);
    let mut clip_flags = Vec::with_capacity(n);
    for (i, ((features, option), model)) in
        scene.modalities.iter().zip(options).zip(models).enumerate()
    {
        let (values, flags) =
            measure_features(features, option, model, seed.wrapping_add(i as u64))?;
        modalities.push(values);
        clip_flags.push(flags);
    }
    Ok(Observation {
        modalities,
        clip_flags,
        options: options.to_vec(),
        weights: Some(weights.clone()),
    })
}
