//! Perception models and perception-aware quality metrics.
//!
//! The model `M` is a multinomial logistic classifier over observation
//! features. Quality metrics:
//!
//! * max-confidence: `max(softmax(M(s)))`,
//! * grip: informative tactile coverage, the fraction of tactile elements
//!   that are neither clipped nor below the option's pressure threshold,
//! * visual alignment: max-confidence on the visual channel times the
//!   unclipped fraction of that channel.

use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{MetricId, Observation, QualityScore, SensorOption};
use crate::error::{Error, Result};
use crate::seed;

/// Modality slots of a multimodal (visual + tactile) observation.
pub mod modality {
    pub const VISUAL: usize = 0;
    pub const TACTILE: usize = 1;
}

/// Axis of a tactile option holding the pressure threshold.
pub const PRESSURE_THRESHOLD_AXIS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionModel {
    classes: usize,
    dim: usize,
    /// Row-major `classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl PerceptionModel {
    pub fn new(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::out_of_range("class count", classes, ">= 2"));
        }
        if dim == 0 {
            return Err(Error::Empty("feature dimension"));
        }
        if weights.len() != classes * dim {
            return Err(Error::DimensionMismatch {
                context: "weight matrix",
                expected: classes * dim,
                actual: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(Error::DimensionMismatch {
                context: "bias vector",
                expected: classes,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite model parameter".into()));
        }
        Ok(PerceptionModel {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn zeros(classes: usize, dim: usize) -> Result<Self> {
        Self::new(classes, dim, vec![0.0; classes * dim], vec![0.0; classes])
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn row(&self, c: usize) -> &[f64] {
        &self.weights[c * self.dim..(c + 1) * self.dim]
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "perception features",
                expected: self.dim,
                actual: features.len(),
            });
        }
        Ok((0..self.classes)
            .map(|c| {
                self.bias[c]
                    + self
                        .row(c)
                        .iter()
                        .zip(features)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn predict_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Class probabilities for the fused features of `obs`.
    pub fn predict(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.predict_features(&obs.features())
    }

    pub fn classify(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_features(features)?))
    }

    /// Save as text: a `C d` header, then one row per class holding the
    /// `d` weights followed by the bias.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.classes, self.dim);
        for c in 0..self.classes {
            let row: Vec<String> = self
                .row(c)
                .iter()
                .chain(std::iter::once(&self.bias[c]))
                .map(|v| format!("{v:?}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `C d` header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
        let [classes, dim] = dims[..] else {
            return Err(parse_err(1, "header must be `C d`".into()));
        };
        let mut weights = Vec::with_capacity(classes * dim);
        let mut bias = Vec::with_capacity(classes);
        for c in 0..classes {
            let (no, line) = lines
                .next()
                .ok_or_else(|| parse_err(c + 2, format!("missing row {c}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(no + 1, format!("bad number: {e}")))?;
            if row.len() != dim + 1 {
                return Err(parse_err(
                    no + 1,
                    format!("expected {} values, found {}", dim + 1, row.len()),
                ));
            }
            weights.extend_from_slice(&row[..dim]);
            bias.push(row[dim]);
        }
        if let Some((no, _)) = lines.next() {
            return Err(parse_err(no + 1, "trailing data".into()));
        }
        Self::new(classes, dim, weights, bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - peak).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn confidence(probs: &[f64]) -> f64 {
    probs.iter().copied().fold(0.0, f64::max).clamp(0.0, 1.0)
}

/// `Q_M(s) = max(softmax(M(s)))`.
pub fn quality_max_confidence(model: &PerceptionModel, obs: &Observation) -> Result<QualityScore> {
    let probs = model.predict(obs)?;
    QualityScore::new(confidence(&probs), MetricId::MaxConfidence)
}

/// Grip stability from the tactile channel. `prev_action` is part of the
/// metric's signature but the coverage formula does not depend on it.
pub fn quality_grip(
    obs: &Observation,
    _prev_action: Option<usize>,
    tactile_option: &SensorOption,
) -> Result<QualityScore> {
    let values = obs.modality(modality::TACTILE)?;
    let flags = obs.clip_flags(modality::TACTILE)?;
    let threshold = tactile_option
        .value(PRESSURE_THRESHOLD_AXIS)
        .ok_or_else(|| Error::InvalidOption("tactile option lacks a pressure threshold".into()))?;
    let informative = values
        .iter()
        .zip(flags)
        .filter(|(&v, &clipped)| !clipped && v >= threshold)
        .count();
    QualityScore::new(informative as f64 / values.len() as f64, MetricId::Grip)
}

/// Visual alignment confidence discounted by clipping of the visual channel.
/// Both options are accepted for the cross-modal signature; their effect
/// arrives through the shared observation.
pub fn quality_visual_alignment(
    obs: &Observation,
    _prev_action: Option<usize>,
    _cam_option: &SensorOption,
    _tact_option: &SensorOption,
    model: &PerceptionModel,
) -> Result<QualityScore> {
    let visual = obs.modality(modality::VISUAL)?;
    let probs = model.predict_features(visual)?;
    let unclipped = 1.0 - obs.clipped_fraction(modality::VISUAL)?;
    QualityScore::new(
        (confidence(&probs) * unclipped).clamp(0.0, 1.0),
        MetricId::VisualAlignment,
    )
}

/// Mean cross-entropy of `model` on `(features, label)` pairs, with its
/// gradient as `(loss, d_weights, d_bias)`.
pub fn loss_and_gradient(
    model: &PerceptionModel,
    data: &[(Vec<f64>, usize)],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let (c_count, d) = (model.classes, model.dim);
    let mut grad_w = vec![0.0; c_count * d];
    let mut grad_b = vec![0.0; c_count];
    let mut loss = 0.0;
    for (x, label) in data {
        if *label >= c_count {
            return Err(Error::out_of_range("label", label, format!("[0, {c_count})")));
        }
        let probs = model.predict_features(x)?;
        loss -= probs[*label].max(f64::MIN_POSITIVE).ln();
        for c in 0..c_count {
            let delta = probs[c] - if c == *label { 1.0 } else { 0.0 };
            grad_b[c] += delta;
            for (g, xi) in grad_w[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += delta * xi;
            }
        }
    }
    let n = data.len() as f64;
    loss /= n;
    grad_w.iter_mut().for_each(|g| *g /= n);
    grad_b.iter_mut().for_each(|g| *g /= n);
    Ok((loss, grad_w, grad_b))
}

pub fn accuracy(model: &PerceptionModel, data: &[(Vec<f64>, usize)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut hits = 0usize;
    for (x, label) in data {
        if model.classify(x)? == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Fit a logistic model by full-batch gradient descent on the mean
/// cross-entropy. Weights start from `N(0, 0.01^2)` drawn with `seed`. The
/// result never scores below the majority-class predictor on the training
/// set: if descent ends worse, that predictor is returned instead.
pub fn train_perception(
    dataset: &[(Observation, usize)],
    classes: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<PerceptionModel> {
    let data: Vec<(Vec<f64>, usize)> = dataset
        .iter()
        .map(|(obs, label)| (obs.features(), *label))
        .collect();
    train_on_features(&data, classes, epochs, learning_rate, seed)
}

pub fn train_on_features(
    data: &[(Vec<f64>, usize)],
    classes: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<PerceptionModel> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::out_of_range("learning rate", learning_rate, "(0, inf)"));
    }
    let dim = data[0].0.len();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "training features",
            expected: dim,
            actual: x.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let weights = (0..classes * dim).map(|_| init.sample(&mut rng)).collect();
    let mut model = PerceptionModel::new(classes, dim, weights, vec![0.0; classes])?;
    for _ in 0..epochs {
        let (_, gw, gb) = loss_and_gradient(&model, data)?;
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= learning_rate * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= learning_rate * g;
        }
    }

    let baseline = majority_model(data, classes, dim)?;
    if accuracy(&model, data)? < accuracy(&baseline, data)? {
        return Ok(baseline);
    }
    Ok(model)
}

/// Predicts the most frequent training label everywhere.
fn majority_model(data: &[(Vec<f64>, usize)], classes: usize, dim: usize) -> Result<PerceptionModel> {
    let mut counts = vec![0usize; classes];
    for (_, label) in data {
        if *label >= classes {
            return Err(Error::out_of_range("label", label, format!("[0, {classes})")));
        }
        counts[*label] += 1;
    }
    let majority = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let mut bias = vec![0.0; classes];
    bias[majority] = 10.0;
    PerceptionModel::new(classes, dim, vec![0.0; classes * dim], bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ModalityWeights;
    use proptest::prelude::*;

    fn obs1(values: Vec<f64>) -> Observation {
        let n = values.len();
        Observation {
            modalities: vec![values],
            clip_flags: vec![vec![false; n]],
            options: vec![SensorOption::new(vec![0.0, 1.0]).unwrap()],
            weights: None,
        }
    }

    /// Identity weights so logits equal the features.
    fn identity(c: usize) -> PerceptionModel {
        let mut w = vec![0.0; c * c];
        for i in 0..c {
            w[i * c + i] = 1.0;
        }
        PerceptionModel::new(c, c, w, vec![0.0; c]).unwrap()
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = PerceptionModel::zeros(5, 3).unwrap();
        let p = m.predict(&obs1(vec![0.2, 0.4, 0.9])).unwrap();
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let q = quality_max_confidence(&m, &obs1(vec![0.2, 0.4, 0.9])).unwrap();
        assert!((q.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn equal_logits_split_evenly() {
        for z in [-30.0, 0.0, 0.7, 500.0] {
            let p = softmax(&[z, z]);
            assert_eq!(p, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn three_class_softmax_by_hand() {
        let e = std::f64::consts::E;
        let expected = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        let p = identity(3).predict(&obs1(vec![1.0, 0.0, 0.0])).unwrap();
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p[0] - 0.5761).abs() < 1e-3);
        assert!((p[1] - 0.2119).abs() < 1e-3);
        let q = quality_max_confidence(&identity(3), &obs1(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((q.value - 0.5761).abs() < 1e-3);
        assert_eq!(q.metric, MetricId::MaxConfidence);
    }

    #[test]
    fn saturated_softmax_confidence() {
        let q = quality_max_confidence(&identity(3), &obs1(vec![100.0, 0.0, 0.0])).unwrap();
        assert!((q.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let m = PerceptionModel::zeros(2, 4).unwrap();
        assert!(matches!(
            m.predict(&obs1(vec![0.0; 3])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PerceptionModel::zeros(1, 4).is_err());
    }

    fn grip_obs(tactile: Vec<f64>, flags: Vec<bool>) -> Observation {
        Observation {
            modalities: vec![vec![0.5; 2], tactile],
            clip_flags: vec![vec![false; 2], flags],
            options: vec![
                SensorOption::new(vec![0.0, 1.0]).unwrap(),
                SensorOption::new(vec![0.0, 0.2]).unwrap(),
            ],
            weights: Some(ModalityWeights::uniform(2).unwrap()),
        }
    }

    #[test]
    fn grip_coverage() {
        let tact = SensorOption::new(vec![0.0, 0.2]).unwrap();
        let all_clipped = grip_obs(vec![1.0; 4], vec![true; 4]);
        assert_eq!(quality_grip(&all_clipped, Some(0), &tact).unwrap().value, 0.0);
        let full = grip_obs(vec![0.5; 4], vec![false; 4]);
        assert_eq!(quality_grip(&full, Some(0), &tact).unwrap().value, 1.0);
        let mixed = grip_obs(vec![1.0, 0.1, 0.5, 0.6], vec![true, false, false, false]);
        assert_eq!(quality_grip(&mixed, None, &tact).unwrap().value, 0.5);
    }

    #[test]
    fn grip_needs_tactile_channel() {
        let tact = SensorOption::new(vec![0.0, 0.2]).unwrap();
        assert!(quality_grip(&obs1(vec![0.5]), None, &tact).is_err());
    }

    #[test]
    fn visual_alignment_cases() {
        let cam = SensorOption::new(vec![0.0, 1.0]).unwrap();
        let tact = SensorOption::new(vec![0.0, 0.2]).unwrap();
        let uniform = PerceptionModel::zeros(4, 2).unwrap();
        let clean = grip_obs(vec![0.5; 4], vec![false; 4]);
        let q = quality_visual_alignment(&clean, None, &cam, &tact, &uniform).unwrap();
        assert!((q.value - 0.25).abs() < 1e-15);

        let mut blind = clean.clone();
        blind.clip_flags[modality::VISUAL] = vec![true, true];
        let q = quality_visual_alignment(&blind, None, &cam, &tact, &uniform).unwrap();
        assert_eq!(q.value, 0.0);

        // Logit gap ln 4 gives confidence 0.8 for two classes.
        let model = PerceptionModel::new(2, 2, vec![0.0; 4], vec![4f64.ln(), 0.0]).unwrap();
        let mut half = clean;
        half.clip_flags[modality::VISUAL] = vec![true, false];
        let q = quality_visual_alignment(&half, None, &cam, &tact, &model).unwrap();
        assert!((q.value - 0.4).abs() < 1e-12);
    }

    fn two_clusters() -> Vec<(Observation, usize)> {
        let mut data = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 100.0;
            data.push((obs1(vec![0.1 + t, 0.8 - t]), 0));
            data.push((obs1(vec![0.8 - t, 0.1 + t]), 1));
        }
        data
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let data = two_clusters();
        let model = train_perception(&data, 2, 300, 2.0, 3).unwrap();
        let feats: Vec<_> = data.iter().map(|(o, l)| (o.features(), *l)).collect();
        assert_eq!(accuracy(&model, &feats).unwrap(), 1.0);
    }

    #[test]
    fn single_class_predicts_that_class() {
        let data: Vec<_> = (0..10).map(|i| (obs1(vec![i as f64 / 10.0, 0.5]), 1)).collect();
        let model = train_perception(&data, 2, 50, 1.0, 0).unwrap();
        for x in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.9]] {
            assert_eq!(model.classify(&x).unwrap(), 1);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = two_clusters();
        let a = train_perception(&data, 2, 40, 1.0, 11).unwrap();
        let b = train_perception(&data, 2, 40, 1.0, 11).unwrap();
        assert_eq!(a, b);
        assert!(train_perception(&[], 2, 10, 1.0, 0).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let model = train_perception(&two_clusters(), 2, 30, 1.0, 5).unwrap();
        let text = model.to_text();
        assert!(text.starts_with("2 2\n"));
        assert_eq!(PerceptionModel::from_text(&text, "mem").unwrap(), model);
        assert!(PerceptionModel::from_text("2 2\n1 2 3\n", "mem").is_err());
    }

    proptest! {
        #[test]
        fn predict_is_a_distribution(
            c in 2usize..6,
            d in 1usize..6,
            params in proptest::collection::vec(-50.0f64..50.0, 66),
            xs in proptest::collection::vec(0.0f64..1.0, 6),
        ) {
            let model = PerceptionModel::new(
                c, d, params[..c * d].to_vec(), params[36..36 + c].to_vec()).unwrap();
            let p = model.predict_features(&xs[..d]).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let q = confidence(&p);
            prop_assert!(q >= 1.0 / c as f64 - 1e-12 && q <= 1.0);
        }
    }
}
