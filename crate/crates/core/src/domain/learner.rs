use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSchedule {
    /// Fixed learning rate α.
    Constant,
    /// α / visits(s, a).
    InverseVisits,
}

/// Hyperparameters shared by the tabular learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Candidate count for single-shot selection.
    pub k: usize,
    /// Quality buckets B.
    pub buckets: usize,
    /// Temperature τ of the modality-weight update.
    pub temperature: f64,
    pub schedule: AlphaSchedule,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.9,
            alpha: 0.1,
            epsilon: 0.1,
            k: 8,
            buckets: 4,
            temperature: 1.0,
            schedule: AlphaSchedule::Constant,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::out_of_range("gamma", self.gamma, "[0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::out_of_range("alpha", self.alpha, "(0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::out_of_range("epsilon", self.epsilon, "[0, 1]"));
        }
        if self.k == 0 {
            return Err(Error::out_of_range("k", self.k, ">= 1"));
        }
        if self.buckets == 0 {
            return Err(Error::out_of_range("buckets", self.buckets, ">= 1"));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::out_of_range("temperature", self.temperature, "[0, inf)"));
        }
        Ok(())
    }

    pub fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Effective step size for the `visits`-th update of a table entry.
    pub fn step_size(&self, visits: u32) -> f64 {
        match self.schedule {
            AlphaSchedule::Constant => self.alpha,
            AlphaSchedule::InverseVisits => self.alpha / visits.max(1) as f64,
        }
    }
}
