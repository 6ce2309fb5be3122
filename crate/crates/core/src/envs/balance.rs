//! Linearized cart-pole balancing behind a clipping range sensor.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{range_capture, ModalitySpec};
use crate::domain::{AnalogScene, Axis, Observation, OptionSpace};
use crate::error::{Error, Result};
use crate::perception::PerceptionModel;
use crate::seed;

const DT: f64 = 0.02;

/// State layout: `[x, x_dot, theta, theta_dot]`.
pub const THETA: usize = 2;
pub const THETA_DOT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceParams {
    /// Row-major 4x4 transition matrix A.
    pub a: [[f64; 4]; 4],
    pub b: [f64; 4],
    /// Force magnitude; action 0 pushes with `-force`, action 1 with `+force`.
    pub force: f64,
    /// σ_d, per-component process noise.
    pub noise: f64,
    /// Failure when `|theta|` exceeds this (rad).
    pub angle_limit: f64,
    /// Initial components ~ Uniform[-init, init].
    pub init: f64,
    /// Nominal magnitude of each state variable; the analog scene is
    /// `state / scale`.
    pub scale: [f64; 4],
    /// Buckets bin the switching variable `theta + lead * theta_dot` and the
    /// angular velocity, both dequantized from the reading.
    pub lead: f64,
    pub switch_edges: Vec<f64>,
    pub theta_dot_edges: Vec<f64>,
    /// Sharpness of the built-in range monitor model.
    pub monitor_gain: f64,
}

impl Default for BalanceParams {
    fn default() -> Self {
        BalanceParams {
            a: [
                [1.0, DT, 0.0, 0.0],
                [0.0, 1.0, -0.7171 * DT, 0.0],
                [0.0, 0.0, 1.0, DT],
                [0.0, 0.0, 15.776 * DT, 1.0],
            ],
            b: [0.0, 9.756 * DT, 0.0, -14.634 * DT],
            force: 1.0,
            noise: 0.01,
            angle_limit: 0.21,
            init: 0.05,
            scale: [2.4, 2.0, 0.21, 1.5],
            lead: 0.1,
            switch_edges: vec![-0.06, -0.02, 0.0, 0.02, 0.06],
            theta_dot_edges: vec![0.0],
            monitor_gain: 12.0,
        }
    }
}

impl BalanceParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.a.iter().flatten().chain(&self.b).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("balance dynamics must be finite".into()));
        }
        for (name, v) in [
            ("force", self.force),
            ("noise", self.noise),
            ("angle limit", self.angle_limit),
            ("init", self.init),
            ("lead", self.lead),
            ("monitor gain", self.monitor_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!("balance {name} must be finite and >= 0, got {v}")));
            }
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidSpec("balance scales must be positive".into()));
        }
        for edges in [&self.switch_edges, &self.theta_dot_edges] {
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSpec("bucket edges must increase".into()));
            }
        }
        Ok(())
    }

    pub fn obs_buckets(&self) -> usize {
        (self.switch_edges.len() + 1) * (self.theta_dot_edges.len() + 1)
    }

    /// Reading of element `i` converted back to physical units.
    fn dequantize(&self, obs: &Observation, i: usize) -> Result<f64> {
        let y = *obs
            .modality(0)?
            .get(i)
            .ok_or(Error::DimensionMismatch {
                context: "balance observation",
                expected: 4,
                actual: obs.modality(0)?.len(),
            })?;
        let r = obs
            .capturing_option()
            .value(0)
            .ok_or_else(|| Error::InvalidOption("missing range axis".into()))?;
        Ok((y - 0.5) * 2.0 * r * self.scale[i])
    }

    pub(super) fn bucket(&self, obs: &Observation) -> Result<usize> {
        let theta = self.dequantize(obs, THETA)?;
        let theta_dot = self.dequantize(obs, THETA_DOT)?;
        let bin = |v: f64, edges: &[f64]| edges.iter().filter(|&&e| v >= e).count();
        let switch = theta + self.lead * theta_dot;
        Ok(bin(switch, &self.switch_edges) * (self.theta_dot_edges.len() + 1)
            + bin(theta_dot, &self.theta_dot_edges))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceState {
    pub x: [f64; 4],
}

/// Range sensor over the four normalized state variables; `r` in
/// {0.1, 0.325, 0.55, 0.775, 1.0} of the nominal scale, `o_fixed` = 0.55.
pub(super) fn range_modality() -> ModalitySpec {
    let space = OptionSpace::new(vec![Axis::new("range", 0.1, 1.0, 5).expect("valid axis")])
        .expect("valid space");
    ModalitySpec {
        name: "state".into(),
        space,
        capture: range_capture(0.02),
        fixed: 2,
    }
}

/// Built-in range monitor: class 0 means "reading well inside the range",
/// classes 1-4 mean "angle high/low, angular velocity high/low". Confidence
/// is near 1 for centred readings and drops towards 1/2 at the clip edges.
pub fn balance_model(params: &BalanceParams) -> PerceptionModel {
    let k = params.monitor_gain;
    let mut weights = vec![0.0; 5 * 4];
    let mut bias = vec![0.0; 5];
    for (c, (feature, sign)) in [(THETA, 1.0), (THETA, -1.0), (THETA_DOT, 1.0), (THETA_DOT, -1.0)]
        .into_iter()
        .enumerate()
    {
        // high: k (y - 1); low: -k y.
        weights[(c + 1) * 4 + feature] = sign * k;
        bias[c + 1] = if sign > 0.0 { -k } else { 0.0 };
    }
    PerceptionModel::new(5, 4, weights, bias).expect("valid monitor")
}

fn render(params: &BalanceParams, x: &[f64; 4]) -> Result<AnalogScene> {
    let features = x.iter().zip(&params.scale).map(|(v, s)| v / s).collect();
    AnalogScene::new(vec![features], vec![], None)
}

pub(super) fn reset(params: &BalanceParams, seed: u64) -> Result<(BalanceState, AnalogScene)> {
    params.validate()?;
    let mut rng = seed::rng(seed);
    let mut x = [0.0; 4];
    if params.init > 0.0 {
        for v in &mut x {
            *v = rng.random_range(-params.init..=params.init);
        }
    }
    let scene = render(params, &x)?;
    Ok((BalanceState { x }, scene))
}

/// `x' = A x + B u + N(0, σ_d)`; reward 1 while `|theta'|` stays within the
/// limit, otherwise 0 and done.
pub(super) fn step(
    params: &BalanceParams,
    state: &BalanceState,
    action: usize,
    seed: u64,
) -> Result<(BalanceState, AnalogScene, f64, bool)> {
    let u = if action == 0 { -params.force } else { params.force };
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, params.noise)
        .map_err(|e| Error::InvalidSpec(format!("balance noise: {e}")))?;
    let mut next = [0.0; 4];
    for (i, out) in next.iter_mut().enumerate() {
        let drift: f64 = (0..4).map(|j| params.a[i][j] * state.x[j]).sum();
        *out = drift + params.b[i] * u + noise.sample(&mut rng);
    }
    let failed = next[THETA].abs() > params.angle_limit;
    let scene = render(params, &next)?;
    let reward = if failed { 0.0 } else { 1.0 };
    Ok((BalanceState { x: next }, scene, reward, failed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SensorOption;
    use crate::perception::quality_max_confidence;
    use crate::sensing::measure;

    #[test]
    fn initial_angle_within_range() {
        let p = BalanceParams::default();
        for s in 0..1000 {
            let (state, _) = reset(&p, s).unwrap();
            assert!(state.x[THETA].abs() <= 0.05);
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point_without_noise_or_force() {
        let p = BalanceParams {
            force: 0.0,
            noise: 0.0,
            ..BalanceParams::default()
        };
        let mut state = BalanceState { x: [0.0; 4] };
        for t in 0..100 {
            let (next, _, reward, done) = step(&p, &state, (t % 2) as usize, t).unwrap();
            assert_eq!(next.x, [0.0; 4]);
            assert_eq!(reward, 1.0);
            assert!(!done);
            state = next;
        }
    }

    #[test]
    fn falling_past_the_limit_ends_with_zero_reward() {
        let p = BalanceParams {
            noise: 0.0,
            ..BalanceParams::default()
        };
        let state = BalanceState {
            x: [0.0, 0.0, 0.209, 0.5],
        };
        let (next, _, reward, done) = step(&p, &state, 1, 0).unwrap();
        assert!(next.x[THETA] > 0.21);
        assert_eq!(reward, 0.0);
        assert!(done);
    }

    #[test]
    fn monitor_prefers_centred_readings() {
        let p = BalanceParams::default();
        let model = balance_model(&p);
        let capture = range_capture(0.0);
        let scene = AnalogScene::new(vec![vec![0.0, 0.0, 0.5, 0.3]], vec![], None).unwrap();
        let wide = SensorOption::new(vec![1.0]).unwrap();
        let narrow = SensorOption::new(vec![0.1]).unwrap();
        let q_wide = quality_max_confidence(&model, &measure(&scene, &wide, &capture, 0).unwrap()).unwrap();
        let q_narrow =
            quality_max_confidence(&model, &measure(&scene, &narrow, &capture, 0).unwrap()).unwrap();
        assert!(q_wide.value > 0.9, "{}", q_wide.value);
        assert!(q_narrow.value < 0.6, "{}", q_narrow.value);
    }

    #[test]
    fn bucket_reads_physical_units() {
        let p = BalanceParams::default();
        let capture = range_capture(0.0);
        let scene = render(&p, &[0.0, 0.0, 0.05, -0.9]).unwrap();
        let obs = measure(&scene, &SensorOption::new(vec![1.0]).unwrap(), &capture, 0).unwrap();
        // switch 0.05 - 0.09 = -0.04 -> bin 1 of 6; theta_dot < 0 -> bin 0 of 2.
        assert_eq!(p.bucket(&obs).unwrap(), 2);
    }
}
