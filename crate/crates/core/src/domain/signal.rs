use serde::{Deserialize, Serialize};

use super::{ModalityWeights, SensorOption};
use crate::error::{Error, Result};

/// Number of digital levels of a capture, 0/255 through 255/255.
pub const LEVELS: u32 = 256;

/// Latent pre-capture signal of the environment at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogScene {
    /// One feature vector per sensory modality, arbitrary scale.
    pub modalities: Vec<Vec<f64>>,
    /// Nuisance parameters, e.g. lighting in log2 stops.
    pub context: Vec<f64>,
    pub label: Option<usize>,
}

impl AnalogScene {
    pub fn new(modalities: Vec<Vec<f64>>, context: Vec<f64>, label: Option<usize>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::NoModalities);
        }
        if modalities.iter().any(Vec::is_empty) {
            return Err(Error::Empty("modality feature vector"));
        }
        if context.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("non-finite scene context".into()));
        }
        Ok(AnalogScene {
            modalities,
            context,
            label,
        })
    }

    pub fn modality(&self, n: usize) -> Result<&[f64]> {
        self.modalities
            .get(n)
            .map(Vec::as_slice)
            .ok_or(Error::ModalityMismatch {
                expected: n + 1,
                actual: self.modalities.len(),
            })
    }
}

/// A digitized measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Per-modality values on the 256-level grid in [0, 1].
    pub modalities: Vec<Vec<f64>>,
    /// True where the pre-quantization value fell outside [0, 1].
    pub clip_flags: Vec<Vec<bool>>,
    /// Option used for each modality's capture.
    pub options: Vec<SensorOption>,
    /// Fusion weights of a multimodal capture.
    pub weights: Option<ModalityWeights>,
}

impl Observation {
    pub fn capturing_option(&self) -> &SensorOption {
        &self.options[0]
    }

    pub fn modality(&self, n: usize) -> Result<&[f64]> {
        self.modalities
            .get(n)
            .map(Vec::as_slice)
            .ok_or(Error::ModalityMismatch {
                expected: n + 1,
                actual: self.modalities.len(),
            })
    }

    pub fn clip_flags(&self, n: usize) -> Result<&[bool]> {
        self.clip_flags
            .get(n)
            .map(Vec::as_slice)
            .ok_or(Error::ModalityMismatch {
                expected: n + 1,
                actual: self.clip_flags.len(),
            })
    }

    /// Fraction of clipped elements in modality `n`.
    pub fn clipped_fraction(&self, n: usize) -> Result<f64> {
        let flags = self.clip_flags(n)?;
        Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len().max(1) as f64)
    }

    /// Feature vector seen by perception models: the concatenation of all
    /// modalities, each scaled by its fusion weight when weights are present.
    pub fn features(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => self
                .modalities
                .iter()
                .zip(w.as_slice())
                .flat_map(|(m, &wn)| m.iter().map(move |v| v * wn))
                .collect(),
            None => self.modalities.concat(),
        }
    }

    pub fn feature_len(&self) -> usize {
        self.modalities.iter().map(Vec::len).sum()
    }

    /// Whether every stored value is one of the 256 levels.
    pub fn on_level_grid(&self) -> bool {
        let top = (LEVELS - 1) as f64;
        self.modalities.iter().flatten().all(|&v| {
            let scaled = v * top;
            (0.0..=1.0).contains(&v) && (scaled - scaled.round()).abs() < 1e-9
        })
    }
}
