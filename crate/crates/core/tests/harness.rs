use asl_core::envs::{env_reset, EnvSpec};
use asl_core::harness::{
    compare, read_report, run_experiment, run_experiment_observed, sweep, train_scene_model, ExperimentConfig,
    Framework, Metric, MetricsFormat, Sensing, TrainingSetup,
};
use asl_core::loops::{candidate_seed, capture};
use asl_core::perception::{argmax, quality_max_confidence, PerceptionModel};
use asl_core::seed::{derive, episode_seed, Stream};
use asl_core::Error;

fn small_model(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("scene.model");
    train_scene_model(&EnvSpec::scene_classification(), &TrainingSetup::default())
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

fn single_shot(model: &std::path::Path, k: usize, episodes: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Framework::SingleShot);
    c.model_path = Some(model.to_path_buf());
    c.learner.k = k;
    c.episodes = episodes;
    c.seed = seed;
    c
}

/// Scans every option, keeps the most confident capture and classifies a
/// fresh capture with it.
fn oracle_correct(spec: &EnvSpec, model: &PerceptionModel, seed: u64) -> bool {
    let (_, scene) = env_reset(spec, derive(seed, Stream::Reset, 0)).unwrap();
    let best = (0..25)
        .map(|i| {
            let obs = capture(spec, &scene, &[i], None, candidate_seed(seed, i)).unwrap();
            (i, quality_max_confidence(model, &obs).unwrap().value)
        })
        .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
    let obs = capture(spec, &scene, &[best.0], None, derive(seed, Stream::Final, 0)).unwrap();
    argmax(&model.predict(&obs).unwrap()) == scene.label.unwrap()
}

#[test]
fn exhaustive_selection_matches_oracle_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_model(dir.path());
    let model = PerceptionModel::load(&path).unwrap();
    let spec = EnvSpec::scene_classification();
    let report = run_experiment(&single_shot(&path, 25, 2000, 3)).unwrap();
    let oracle = (0..2000).filter(|&e| oracle_correct(&spec, &model, episode_seed(3, e))).count();
    let hits = report.rows.iter().filter(|r| r.correct == Some(1.0)).count();
    assert_eq!(hits, oracle);
}

#[test]
fn one_episode_one_row() {
    let mut c = ExperimentConfig::new(Framework::Conventional);
    c.episodes = 1;
    let report = run_experiment(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.aggregate.count, 1);
    assert_eq!(report.rows[0].seed, episode_seed(0, 0));
}

#[test]
fn persisted_rows_match_memory() {
    let dir = tempfile::tempdir().unwrap();
    for (framework, format) in [
        (Framework::Conventional, MetricsFormat::Csv),
        (Framework::Sensorimotor, MetricsFormat::Jsonl),
        (Framework::MultimodalSparse, MetricsFormat::Csv),
    ] {
        let mut c = ExperimentConfig::new(framework);
        c.episodes = 40;
        c.seed = 9;
        c.format = format;
        c.out_dir = Some(dir.path().join("out"));
        let mut seen = Vec::new();
        let report = run_experiment_observed(&c, |row| seen.push(row.episode)).unwrap();
        assert_eq!(seen, (0..40).collect::<Vec<_>>());
        let back = read_report(&c.metrics_path().unwrap()).unwrap();
        assert_eq!(back.header, report.header);
        assert_eq!(back.rows, report.rows);
        let (a, b) = (back.recompute(), report.aggregate.clone());
        for (x, y) in [(a.total, b.total), (a.steps, b.steps), (a.task_return, b.task_return)] {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!((x.mean - y.mean).abs() <= 1e-12 && (x.std - y.std).abs() <= 1e-12);
        }
    }
}

#[test]
fn same_config_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_model(dir.path());
    let mut c = ExperimentConfig::new(Framework::PerceptionOnly);
    c.model_path = Some(path);
    c.episodes = 10;
    for sensing in [Sensing::Learned, Sensing::Uniform, Sensing::Fixed] {
        c.sensing = sensing;
        let (a, b) = (run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.aggregate, b.aggregate);
    }
}

#[test]
fn accuracy_grows_with_k() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_model(dir.path());
    let base = single_shot(&path, 1, 1000, 4_000_037);
    let values: Vec<String> = ["1", "4", "16"].map(String::from).to_vec();
    let runs = sweep(&base, "k", &values).unwrap();
    let acc: Vec<f64> = runs.iter().map(|(_, r)| r.aggregate.correct.unwrap().mean).collect();
    assert!(acc.windows(2).all(|w| w[0] <= w[1]), "{acc:?}");
    let higher = compare(&runs[2].1, &runs[0].1, Metric::Correct).unwrap();
    assert!(higher.wins > higher.losses && higher.p_value < 0.01);
}

#[test]
fn unwritable_output_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut c = ExperimentConfig::new(Framework::Conventional);
    c.out_dir = Some(blocker.join("sub"));
    match run_experiment(&c) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("file")),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn missing_model_is_io() {
    let mut c = ExperimentConfig::new(Framework::SingleShot);
    c.model_path = Some("/nonexistent/model.txt".into());
    assert!(run_experiment(&c).unwrap_err().is_io());
}
