use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricId {
    MaxConfidence,
    Grip,
    VisualAlignment,
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricId::MaxConfidence => "max-confidence",
            MetricId::Grip => "grip",
            MetricId::VisualAlignment => "visual-alignment",
        })
    }
}

/// Value of a perception-aware quality metric, always in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub value: f64,
    pub metric: MetricId,
}

impl QualityScore {
    pub fn new(value: f64, metric: MetricId) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::out_of_range("quality", value, "[0, 1]"));
        }
        Ok(QualityScore { value, metric })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityTerm {
    pub metric: MetricId,
    pub lambda: f64,
    pub value: f64,
}

/// Composite reward: a task term plus weighted quality terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task: f64,
    pub quality_terms: Vec<QualityTerm>,
    pub total: f64,
}

impl RewardBreakdown {
    /// `task + Σ λ_i q_i`, summed left to right.
    pub fn recompute(&self) -> f64 {
        self.quality_terms
            .iter()
            .fold(self.task, |acc, t| acc + t.lambda * t.value)
    }

    pub fn is_consistent(&self) -> bool {
        self.recompute().to_bits() == self.total.to_bits()
    }
}
