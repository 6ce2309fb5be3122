use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attention over N sensory modalities; a point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityWeights {
    weights: Vec<f64>,
}

impl ModalityWeights {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoModalities);
        }
        Ok(ModalityWeights {
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Project arbitrary finite scores onto the simplex: negatives are clamped
    /// to zero, then the vector is divided by its sum. An all-zero vector maps
    /// to the uniform distribution.
    pub fn project(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::NoModalities);
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "non-finite modality score in {raw:?}"
            )));
        }
        let peak = raw.iter().fold(0.0f64, |m, &v| m.max(v));
        if peak <= 0.0 {
            return Self::uniform(raw.len());
        }
        // Scale by the peak first so huge inputs cannot overflow the sum.
        let scaled: Vec<f64> = raw.iter().map(|&v| v.max(0.0) / peak).collect();
        let sum: f64 = scaled.iter().sum();
        let weights = scaled.iter().map(|v| (v / sum).min(1.0)).collect();
        Ok(ModalityWeights { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Simplex check at tolerance 1e-9.
    pub fn is_valid(&self) -> bool {
        let sum: f64 = self.weights.iter().sum();
        !self.weights.is_empty()
            && (sum - 1.0).abs() <= 1e-9
            && self.weights.iter().all(|w| (0.0..=1.0).contains(w))
    }
}

/// Free-function form of [`ModalityWeights::project`].
pub fn weights_project(raw: &[f64]) -> Result<ModalityWeights> {
    ModalityWeights::project(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_pair() {
        assert_eq!(weights_project(&[2.0, 2.0]).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn negative_clamped() {
        assert_eq!(weights_project(&[-1.0, 3.0]).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn zero_sum_falls_back_to_uniform() {
        let w = weights_project(&[0.0, 0.0, 0.0]).unwrap();
        for &v in w.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = weights_project(&[-5.0, -1.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_is_an_error() {
        let err = weights_project(&[]).unwrap_err();
        assert_eq!(err.to_string(), "no modalities");
    }

    proptest! {
        #[test]
        fn always_on_simplex(raw in proptest::collection::vec(-1e6f64..1e6, 1..12)) {
            let w = weights_project(&raw).unwrap();
            prop_assert!(w.is_valid());
            prop_assert_eq!(w.len(), raw.len());
        }
    }
}
