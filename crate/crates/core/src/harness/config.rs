//! Experiment configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! # adaptive single-shot on shifted lighting
//! framework = single-shot
//! env.kind = scene-classification
//! k = 8
//! run.episodes = 2000
//! run.seed = 42
//! ```
//!
//! Blank lines and `#` comments are ignored, keys are unique, and unknown
//! keys or keys that do not apply to the chosen environment are rejected.
//! Omitted keys take the defaults of [`ExperimentConfig::new`] and of the
//! environment kind's constructor in [`crate::envs`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::train::TrainingSetup;
use crate::domain::{AlphaSchedule, LearnerConfig};
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::learn::toy_mdp_fixture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    Conventional,
    SingleShot,
    PerceptionOnly,
    Sensorimotor,
    MultimodalSparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKindName {
    SceneClassification,
    DriftingPerception,
    Balance,
    Grip,
    ToyMdp,
}

/// How sensor options are chosen where a framework allows a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sensing {
    /// Learned policy; `k`-candidate selection for single-shot runs.
    Learned,
    /// `o_fixed` throughout.
    Fixed,
    /// A uniformly random option per decision (single-shot: `k = 1`).
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsFormat {
    Csv,
    Jsonl,
}

impl MetricsFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MetricsFormat::Csv => "csv",
            MetricsFormat::Jsonl => "jsonl",
        }
    }
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}`, expected one of: {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(Framework {
    Conventional => "conventional",
    SingleShot => "single-shot",
    PerceptionOnly => "perception-only",
    Sensorimotor => "sensorimotor",
    MultimodalSparse => "multimodal-sparse",
});

keyword_enum!(EnvKindName {
    SceneClassification => "scene-classification",
    DriftingPerception => "drifting-perception",
    Balance => "balance",
    Grip => "grip",
    ToyMdp => "toy-mdp",
});

keyword_enum!(Sensing {
    Learned => "learned",
    Fixed => "fixed",
    Uniform => "uniform",
});

keyword_enum!(MetricsFormat {
    Csv => "csv",
    Jsonl => "jsonl",
});

impl EnvKindName {
    /// Environment with its default parameters.
    pub fn default_spec(self) -> EnvSpec {
        match self {
            EnvKindName::SceneClassification => EnvSpec::scene_classification(),
            EnvKindName::DriftingPerception => EnvSpec::drifting_perception(),
            EnvKindName::Balance => EnvSpec::balance(),
            EnvKindName::Grip => EnvSpec::grip(),
            EnvKindName::ToyMdp => EnvSpec::mdp(toy_mdp_fixture(), 100),
        }
    }
}

impl Framework {
    /// The framework's natural environment.
    pub fn default_env(self) -> EnvKindName {
        match self {
            Framework::Conventional => EnvKindName::ToyMdp,
            Framework::SingleShot => EnvKindName::SceneClassification,
            Framework::PerceptionOnly => EnvKindName::DriftingPerception,
            Framework::Sensorimotor => EnvKindName::Balance,
            Framework::MultimodalSparse => EnvKindName::Grip,
        }
    }

    pub fn accepts(self, env: EnvKindName) -> bool {
        use EnvKindName::*;
        match self {
            Framework::Conventional => matches!(env, Balance | Grip | ToyMdp),
            Framework::SingleShot => env == SceneClassification,
            Framework::PerceptionOnly => matches!(env, SceneClassification | DriftingPerception),
            Framework::Sensorimotor => env == Balance,
            Framework::MultimodalSparse => env == Grip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub env_kind: EnvKindName,
    pub spec: EnvSpec,
    /// `learner.k` doubles as the single-shot candidate count.
    pub learner: LearnerConfig,
    pub lambda: f64,
    pub lambda_tact: f64,
    pub lambda_vis: f64,
    pub perception: TrainingSetup,
    /// Load the scene model from this file instead of training one.
    pub model_path: Option<PathBuf>,
    pub episodes: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub format: MetricsFormat,
    pub sensing: Sensing,
    pub name: Option<String>,
}

impl ExperimentConfig {
    /// Defaults for `framework` on its natural environment.
    pub fn new(framework: Framework) -> Self {
        let env_kind = framework.default_env();
        ExperimentConfig {
            framework,
            env_kind,
            spec: env_kind.default_spec(),
            learner: LearnerConfig::default(),
            lambda: 0.1,
            lambda_tact: 0.1,
            lambda_vis: 0.1,
            perception: TrainingSetup::default(),
            model_path: None,
            episodes: 100,
            seed: 0,
            out_dir: None,
            format: MetricsFormat::Csv,
            sensing: if framework == Framework::Conventional {
                Sensing::Fixed
            } else {
                Sensing::Learned
            },
            name: None,
        }
    }

    /// Stem of the metrics file.
    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("{}-{}-{}", self.framework, self.env_kind, self.sensing)
        })
    }

    /// `<out_dir>/<name>.<csv|jsonl>`, when an output directory is set.
    pub fn metrics_path(&self) -> Option<PathBuf> {
        self.out_dir
            .as_ref()
            .map(|dir| dir.join(format!("{}.{}", self.run_name(), self.format.extension())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("run.episodes", "must be >= 1"));
        }
        if !self.framework.accepts(self.env_kind) {
            return Err(Error::config(
                "env.kind",
                format!("{} cannot run on {}", self.framework, self.env_kind),
            ));
        }
        self.learner
            .validate()
            .map_err(|e| Error::config(learner_key(&e), e.to_string()))?;
        self.spec
            .validate()
            .map_err(|e| Error::config("env", e.to_string()))?;
        if self.framework == Framework::SingleShot {
            let total = self.spec.modalities[0].space.total_size();
            if self.learner.k > total {
                return Err(Error::config(
                    "k",
                    format!("{} exceeds the {total} available options", self.learner.k),
                ));
            }
        }
        for (key, v) in [
            ("reward.lambda", self.lambda),
            ("reward.lambda_tact", self.lambda_tact),
            ("reward.lambda_vis", self.lambda_vis),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.framework == Framework::Conventional && self.sensing != Sensing::Fixed {
            return Err(Error::config("run.sensing", "conventional runs use the fixed option"));
        }
        if self.framework == Framework::MultimodalSparse && self.sensing != Sensing::Learned {
            return Err(Error::config("run.sensing", "multimodal-sparse runs learn their sensing"));
        }
        let p = &self.perception;
        if p.samples == 0 {
            return Err(Error::config("perception.samples", "must be >= 1"));
        }
        if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
            return Err(Error::config("perception.learning_rate", "must be positive"));
        }
        if !(p.lighting.is_finite() && p.lighting >= 0.0) {
            return Err(Error::config("perception.lighting", "must be finite and >= 0"));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(Error::config("run.name", "must be a plain, non-empty file stem"));
            }
        }
        Ok(())
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: String| Error::config(key, e);
        match key {
            "framework" => {
                self.framework = value.parse().map_err(bad)?;
            }
            "env.kind" => {
                let kind: EnvKindName = value.parse().map_err(bad)?;
                if kind != self.env_kind {
                    self.env_kind = kind;
                    self.spec = kind.default_spec();
                }
            }
            "k" => self.learner.k = parse(key, value)?,
            "learner.gamma" => self.learner.gamma = parse(key, value)?,
            "learner.alpha" => self.learner.alpha = parse(key, value)?,
            "learner.epsilon" => self.learner.epsilon = parse(key, value)?,
            "learner.buckets" => self.learner.buckets = parse(key, value)?,
            "learner.temperature" => self.learner.temperature = parse(key, value)?,
            "learner.schedule" => {
                self.learner.schedule = match value {
                    "constant" => AlphaSchedule::Constant,
                    "inverse-visits" => AlphaSchedule::InverseVisits,
                    other => {
                        return Err(bad(format!(
                            "unknown value `{other}`, expected one of: constant, inverse-visits"
                        )))
                    }
                }
            }
            "reward.lambda" => self.lambda = parse(key, value)?,
            "reward.lambda_tact" => self.lambda_tact = parse(key, value)?,
            "reward.lambda_vis" => self.lambda_vis = parse(key, value)?,
            "perception.samples" => self.perception.samples = parse(key, value)?,
            "perception.lighting" => self.perception.lighting = parse(key, value)?,
            "perception.epochs" => self.perception.epochs = parse(key, value)?,
            "perception.learning_rate" => self.perception.learning_rate = parse(key, value)?,
            "perception.seed" => self.perception.seed = parse(key, value)?,
            "perception.model" => self.model_path = Some(PathBuf::from(value)),
            "run.episodes" => self.episodes = parse(key, value)?,
            "run.seed" => self.seed = parse(key, value)?,
            "run.out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "run.format" => self.format = value.parse().map_err(bad)?,
            "run.sensing" => self.sensing = value.parse().map_err(bad)?,
            "run.name" => self.name = Some(value.to_string()),
            "env.horizon" => self.spec.horizon = parse(key, value)?,
            "sensor.read_noise" => self.spec.modalities[0].capture.read_noise = parse(key, value)?,
            "sensor.gain_noise" => self.spec.modalities[0].capture.gain_noise = parse(key, value)?,
            "sensor.blur" => self.spec.modalities[0].capture.blur = parse(key, value)?,
            "sensor.fixed" => self.spec.modalities[0].fixed = parse(key, value)?,
            "sensor.tactile_read_noise" => match self.spec.modalities.get_mut(1) {
                Some(m) => m.capture.read_noise = parse(key, value)?,
                None => return Err(not_applicable(key, self.env_kind)),
            },
            "sensor.tactile_fixed" => match self.spec.modalities.get_mut(1) {
                Some(m) => m.fixed = parse(key, value)?,
                None => return Err(not_applicable(key, self.env_kind)),
            },
            _ => self.set_env_param(key, value)?,
        }
        Ok(())
    }

    fn set_env_param(&mut self, key: &str, value: &str) -> Result<()> {
        let kind = self.env_kind;
        match (&mut self.spec.kind, key) {
            (EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p), _) => match key {
                "env.classes" => p.classes = parse(key, value)?,
                "env.dim" => p.dim = parse(key, value)?,
                "env.prototype_seed" => p.prototype_seed = parse(key, value)?,
                "env.feature_noise" => p.feature_noise = parse(key, value)?,
                "env.lighting_shift" => p.lighting_shift = parse(key, value)?,
                "env.drift" if kind == EnvKindName::DriftingPerception => p.drift = parse(key, value)?,
                _ => return Err(unknown_or_not_applicable(key, kind)),
            },
            (EnvKind::Balance(p), "env.process_noise") => p.noise = parse(key, value)?,
            (EnvKind::Grip(p), "env.lighting_shift") => p.lighting_shift = parse(key, value)?,
            (EnvKind::Grip(p), "env.turn_step") => p.turn_step = parse(key, value)?,
            _ => return Err(unknown_or_not_applicable(key, kind)),
        }
        Ok(())
    }

    /// Parse config text; `source` names the file in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: i + 1,
                    message: "empty key or value".into(),
                });
            }
            if entries.insert(key.to_string(), (i + 1, value.to_string())).is_some() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        // The framework and environment decide which defaults and keys apply,
        // so they are settled first.
        let framework: Framework = match entries.remove("framework") {
            Some((_, v)) => v.parse().map_err(|e| Error::config("framework", e))?,
            None => return Err(Error::config("framework", "missing")),
        };
        let mut config = ExperimentConfig::new(framework);
        if let Some((_, v)) = entries.remove("env.kind") {
            config.set("env.kind", &v)?;
        }
        let mut ordered: Vec<(usize, String, String)> =
            entries.into_iter().map(|(k, (line, v))| (line, k, v)).collect();
        ordered.sort();
        for (_, key, value) in ordered {
            config.set(&key, &value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("framework", &self.framework);
        put("env.kind", &self.env_kind);
        put("env.horizon", &self.spec.horizon);
        match &self.spec.kind {
            EnvKind::SceneClassification(p) | EnvKind::DriftingPerception(p) => {
                put("env.classes", &p.classes);
                put("env.dim", &p.dim);
                put("env.prototype_seed", &p.prototype_seed);
                put("env.feature_noise", &p.feature_noise);
                put("env.lighting_shift", &p.lighting_shift);
                if self.env_kind == EnvKindName::DriftingPerception {
                    put("env.drift", &p.drift);
                }
            }
            EnvKind::Balance(p) => put("env.process_noise", &p.noise),
            EnvKind::Grip(p) => {
                put("env.lighting_shift", &p.lighting_shift);
                put("env.turn_step", &p.turn_step);
            }
            EnvKind::Mdp(_) => {}
        }
        let first = &self.spec.modalities[0];
        put("sensor.read_noise", &first.capture.read_noise);
        put("sensor.gain_noise", &first.capture.gain_noise);
        put("sensor.blur", &first.capture.blur);
        put("sensor.fixed", &first.fixed);
        if let Some(tactile) = self.spec.modalities.get(1) {
            put("sensor.tactile_read_noise", &tactile.capture.read_noise);
            put("sensor.tactile_fixed", &tactile.fixed);
        }
        put("k", &self.learner.k);
        put("learner.gamma", &self.learner.gamma);
        put("learner.alpha", &self.learner.alpha);
        put("learner.epsilon", &self.learner.epsilon);
        put("learner.buckets", &self.learner.buckets);
        put("learner.temperature", &self.learner.temperature);
        put(
            "learner.schedule",
            &match self.learner.schedule {
                AlphaSchedule::Constant => "constant",
                AlphaSchedule::InverseVisits => "inverse-visits",
            },
        );
        put("reward.lambda", &self.lambda);
        put("reward.lambda_tact", &self.lambda_tact);
        put("reward.lambda_vis", &self.lambda_vis);
        put("perception.samples", &self.perception.samples);
        put("perception.lighting", &self.perception.lighting);
        put("perception.epochs", &self.perception.epochs);
        put("perception.learning_rate", &self.perception.learning_rate);
        put("perception.seed", &self.perception.seed);
        if let Some(path) = &self.model_path {
            put("perception.model", &path.display());
        }
        put("run.episodes", &self.episodes);
        put("run.seed", &self.seed);
        if let Some(dir) = &self.out_dir {
            put("run.out_dir", &dir.display());
        }
        put("run.format", &self.format);
        put("run.sensing", &self.sensing);
        if let Some(name) = &self.name {
            put("run.name", name);
        }
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

const ENV_KEYS: [&str; 8] = [
    "env.classes",
    "env.dim",
    "env.prototype_seed",
    "env.feature_noise",
    "env.lighting_shift",
    "env.drift",
    "env.process_noise",
    "env.turn_step",
];

fn not_applicable(key: &str, kind: EnvKindName) -> Error {
    Error::config(key, format!("does not apply to {kind}"))
}

fn unknown_or_not_applicable(key: &str, kind: EnvKindName) -> Error {
    if ENV_KEYS.contains(&key) {
        not_applicable(key, kind)
    } else {
        Error::config(key, "unknown key")
    }
}

fn learner_key(e: &Error) -> &'static str {
    match e {
        Error::OutOfRange { what: "k", .. } => "k",
        Error::OutOfRange { what, .. } => match *what {
            "gamma" => "learner.gamma",
            "alpha" => "learner.alpha",
            "epsilon" => "learner.epsilon",
            "buckets" => "learner.buckets",
            "temperature" => "learner.temperature",
            _ => "learner",
        },
        _ => "learner",
    }
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text, &path.display().to_string())
}
