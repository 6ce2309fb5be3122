//! Execution of an [`ExperimentConfig`] into a [`MetricsReport`].

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Framework, Sensing};
use super::metrics::{EpisodeRow, MetricsReport, MetricsWriter, ReportHeader};
use super::train::train_scene_model;
use crate::domain::Trajectory;
use crate::error::{Error, Result};
use crate::loops::{
    run_conventional, run_multimodal_sparse, run_perception_only, run_sensorimotor,
    run_single_shot, run_single_shot_fixed, SelectionRecord,
};
use crate::perception::PerceptionModel;
use crate::policies::{ActionPolicyState, MultiSensePolicy, SenseController, SensePolicyState};
use crate::seed::episode_seed;

/// Episodes evaluated per parallel batch of a stateless run.
const CHUNK: usize = 256;

fn histogram(indices: impl IntoIterator<Item = usize>) -> Vec<(usize, u64)> {
    let mut counts = BTreeMap::new();
    for i in indices {
        *counts.entry(i).or_insert(0u64) += 1;
    }
    counts.into_iter().collect()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Row of a closed-loop episode. Perception-only runs report the number of
/// correct classifications as their return.
pub fn trajectory_row(episode: u64, trajectory: &Trajectory, perception: bool) -> EpisodeRow {
    let flags: Vec<f64> = trajectory
        .steps
        .iter()
        .filter_map(|s| s.correct.map(|c| if c { 1.0 } else { 0.0 }))
        .collect();
    let task_return = if perception {
        flags.iter().sum()
    } else {
        trajectory.task_return()
    };
    EpisodeRow {
        episode,
        seed: trajectory.seed,
        task_return,
        total: trajectory.total_return(),
        steps: trajectory.len(),
        correct: mean(&flags),
        quality: trajectory.mean_quality(),
        options: histogram(trajectory.steps.iter().filter_map(|s| s.option_indices.first().copied())),
    }
}

/// Row of a single-shot episode: return is 1 for a correct label, total is
/// the chosen candidate's quality.
pub fn selection_row(episode: u64, record: &SelectionRecord) -> EpisodeRow {
    let hit = if record.correct { 1.0 } else { 0.0 };
    EpisodeRow {
        episode,
        seed: record.seed,
        task_return: hit,
        total: record.quality.value,
        steps: 1,
        correct: Some(hit),
        quality: Some(record.quality.value),
        options: vec![(record.chosen_index, 1)],
    }
}

/// The scene classifier used by the perception frameworks.
pub fn scene_model(config: &ExperimentConfig) -> Result<PerceptionModel> {
    match &config.model_path {
        Some(path) => PerceptionModel::load(path),
        None => train_scene_model(&config.spec, &config.perception),
    }
}

fn builtin_model(config: &ExperimentConfig) -> Result<PerceptionModel> {
    config.spec.builtin_model().ok_or_else(|| {
        Error::Framework(format!("{} has no built-in perception model", config.env_kind))
    })
}

fn sense_controller(config: &ExperimentConfig) -> Result<SenseController> {
    let m = &config.spec.modalities[0];
    let options = m.space.total_size();
    Ok(match config.sensing {
        Sensing::Learned => SenseController::Learned(SensePolicyState::new(options, config.learner)?),
        Sensing::Fixed => SenseController::Fixed(m.fixed),
        Sensing::Uniform => SenseController::Uniform { options },
    })
}

fn header(config: &ExperimentConfig, timestamp: u64) -> ReportHeader {
    ReportHeader {
        version: 1,
        rows: config.episodes,
        framework: config.framework.to_string(),
        env: config.env_kind.to_string(),
        sensing: config.sensing.to_string(),
        seed: config.seed,
        timestamp,
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs one experiment. Metrics are streamed to
/// [`ExperimentConfig::metrics_path`] when an output directory is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    run_experiment_observed(config, |_| {})
}

/// As [`run_experiment`], calling `observe` on each row in episode order.
pub fn run_experiment_observed(
    config: &ExperimentConfig,
    mut observe: impl FnMut(&EpisodeRow),
) -> Result<MetricsReport> {
    config.validate()?;
    let header = header(config, now());
    let mut writer = match config.metrics_path() {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Some(MetricsWriter::create(&path, config.format, &header)?)
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(config.episodes);
    let mut emit = |row: EpisodeRow| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            w.append(&row)?;
        }
        observe(&row);
        rows.push(row);
        Ok(())
    };
    let seed_of = |e: usize| episode_seed(config.seed, e as u64);
    let spec = &config.spec;
    match config.framework {
        Framework::SingleShot => {
            let model = scene_model(config)?;
            let one = |e: usize| -> Result<EpisodeRow> {
                let record = match config.sensing {
                    Sensing::Learned => run_single_shot(spec, config.learner.k, &model, seed_of(e))?,
                    Sensing::Fixed => run_single_shot_fixed(spec, &model, seed_of(e))?,
                    Sensing::Uniform => run_single_shot(spec, 1, &model, seed_of(e))?,
                };
                Ok(selection_row(e as u64, &record))
            };
            parallel(config.episodes, one, &mut emit)?;
        }
        Framework::PerceptionOnly if config.sensing != Sensing::Learned => {
            let model = scene_model(config)?;
            let controller = sense_controller(config)?;
            let one = |e: usize| -> Result<EpisodeRow> {
                let mut sense = controller.clone();
                let t = run_perception_only(spec, &mut sense, &model, seed_of(e))?;
                Ok(trajectory_row(e as u64, &t, true))
            };
            parallel(config.episodes, one, &mut emit)?;
        }
        Framework::PerceptionOnly => {
            let model = scene_model(config)?;
            let mut sense = sense_controller(config)?;
            for e in 0..config.episodes {
                let t = run_perception_only(spec, &mut sense, &model, seed_of(e))?;
                emit(trajectory_row(e as u64, &t, true))?;
            }
        }
        Framework::Conventional => {
            let mut policy = ActionPolicyState::new(spec.obs_buckets(), spec.actions, config.learner)?;
            for e in 0..config.episodes {
                let t = run_conventional(spec, &mut policy, seed_of(e))?;
                emit(trajectory_row(e as u64, &t, false))?;
            }
        }
        Framework::Sensorimotor => {
            let model = builtin_model(config)?;
            let mut action = ActionPolicyState::perception_aware(spec.obs_buckets(), spec.actions, config.learner)?;
            let mut sense = sense_controller(config)?;
            for e in 0..config.episodes {
                let t = run_sensorimotor(spec, &mut action, &mut sense, Some(&model), config.lambda, seed_of(e))?;
                emit(trajectory_row(e as u64, &t, false))?;
            }
        }
        Framework::MultimodalSparse => {
            let model = builtin_model(config)?;
            let sizes: Vec<usize> = spec.modalities.iter().map(|m| m.space.total_size()).collect();
            let mut action = ActionPolicyState::perception_aware(spec.obs_buckets(), spec.actions, config.learner)?;
            let mut sense = MultiSensePolicy::new(&sizes, config.learner)?;
            for e in 0..config.episodes {
                let t = run_multimodal_sparse(
                    spec,
                    &mut action,
                    &mut sense,
                    &model,
                    config.lambda_tact,
                    config.lambda_vis,
                    seed_of(e),
                )?;
                emit(trajectory_row(e as u64, &t, false))?;
            }
        }
    }
    let report = MetricsReport::new(header, rows);
    if let Some(w) = writer {
        w.finish(&report.aggregate)?;
    }
    Ok(report)
}

fn parallel(
    episodes: usize,
    one: impl Fn(usize) -> Result<EpisodeRow> + Sync,
    emit: &mut impl FnMut(EpisodeRow) -> Result<()>,
) -> Result<()> {
    for start in (0..episodes).step_by(CHUNK) {
        let end = (start + CHUNK).min(episodes);
        let batch: Vec<EpisodeRow> = (start..end).into_par_iter().map(&one).collect::<Result<_>>()?;
        for row in batch {
            emit(row)?;
        }
    }
    Ok(())
}

/// One run per value of `key`; each run is named `<base>-<key>-<value>`.
pub fn sweep(config: &ExperimentConfig, key: &str, values: &[String]) -> Result<Vec<(String, MetricsReport)>> {
    if values.is_empty() {
        return Err(Error::config(key, "sweep needs at least one value"));
    }
    let base = config.run_name();
    values
        .iter()
        .map(|v| {
            let mut c = config.clone();
            c.set(key, v)?;
            c.name = Some(format!("{base}-{}-{v}", key.replace('.', "_")));
            run_experiment(&c).map(|r| (v.clone(), r))
        })
        .collect()
}
