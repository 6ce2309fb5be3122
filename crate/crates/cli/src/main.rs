//! `asl`: run, sweep and compare adaptive sensing experiments.
//!
//! Every command prints deterministic output except the first line of `run`,
//! `sweep` and `demo`, which is `started <unix seconds>`.
//!
//! Exit status: 0 on success, 1 on invalid input (usage, config, data), 2 on
//! I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use asl_core::harness::{
    compare, load_config, read_report, run_experiment_observed, EpisodeRow, ExperimentConfig, Framework,
    Metric, MetricsFormat, MetricsReport,
};
use clap::{Args, Parser, Subcommand};

const OUT_DIR_ENV: &str = "ASL_OUT_DIR";

#[derive(Parser)]
#[command(name = "asl", version, about = "Adaptive sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Repeat a run once per value of one config key.
    Sweep {
        config: PathBuf,
        /// Config key to override, e.g. `k` or `reward.lambda`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Paired comparison of two metrics files with a sign test.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// return, total, steps, correct or quality.
        #[arg(long, default_value = "return")]
        metric: Metric,
    },
    /// Print the sensor option grid of each modality.
    EnumerateOptions { config: PathBuf },
    /// Run a small built-in config for one framework.
    Demo {
        /// conventional, single-shot, perception-only, sensorimotor or
        /// multimodal-sparse.
        framework: Framework,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Args, Clone, Default)]
struct RunFlags {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Metrics directory; defaults to the config's, then to $ASL_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<MetricsFormat>,
    /// Print only the summary, not one line per episode.
    #[arg(long)]
    quiet: bool,
}

impl RunFlags {
    fn apply(&self, config: &mut ExperimentConfig) -> asl_core::Result<()> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(episodes) = self.episodes {
            config.episodes = episodes;
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        if let Some(out) = &self.out {
            config.out_dir = Some(out.clone());
        } else if config.out_dir.is_none() {
            config.out_dir = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        }
        config.validate()
    }
}

fn demo_config(framework: Framework) -> asl_core::Result<ExperimentConfig> {
    let text = match framework {
        Framework::Conventional => include_str!("../demos/conventional.conf"),
        Framework::SingleShot => include_str!("../demos/single-shot.conf"),
        Framework::PerceptionOnly => include_str!("../demos/perception-only.conf"),
        Framework::Sensorimotor => include_str!("../demos/sensorimotor.conf"),
        Framework::MultimodalSparse => include_str!("../demos/multimodal-sparse.conf"),
    };
    ExperimentConfig::parse(text, &format!("demo {framework}"))
}

fn episode_line(row: &EpisodeRow) -> String {
    let mut line = format!(
        "episode {} seed={} return={} total={} steps={}",
        row.episode, row.seed, row.task_return, row.total, row.steps
    );
    if let Some(c) = row.correct {
        line.push_str(&format!(" correct={c}"));
    }
    if let Some(q) = row.quality {
        line.push_str(&format!(" quality={q}"));
    }
    line
}

fn started(out: &mut impl Write) {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let _ = writeln!(out, "started {secs}");
}

fn execute(config: &ExperimentConfig, quiet: bool, out: &mut impl Write) -> asl_core::Result<MetricsReport> {
    let _ = writeln!(
        out,
        "run {}: framework={} env={} sensing={} seed={} episodes={}",
        config.run_name(),
        config.framework,
        config.env_kind,
        config.sensing,
        config.seed,
        config.episodes
    );
    let report = run_experiment_observed(config, |row| {
        if !quiet {
            let _ = writeln!(out, "{}", episode_line(row));
        }
    })?;
    let _ = writeln!(out, "aggregate {}", report.aggregate.to_line());
    if let Some(path) = config.metrics_path() {
        let _ = writeln!(out, "metrics {}", path.display());
    }
    Ok(report)
}

fn load(path: &Path, flags: &RunFlags) -> asl_core::Result<ExperimentConfig> {
    let mut config = load_config(path)?;
    flags.apply(&mut config)?;
    Ok(config)
}

fn run(command: Command, out: &mut impl Write) -> asl_core::Result<()> {
    match command {
        Command::Run { config, flags } => {
            let config = load(&config, &flags)?;
            started(out);
            execute(&config, flags.quiet, out)?;
        }
        Command::Sweep {
            config,
            param,
            values,
            flags,
        } => {
            let base = load(&config, &flags)?;
            let stem = base.run_name();
            let mut runs = Vec::with_capacity(values.len());
            for value in &values {
                let mut c = base.clone();
                c.set(&param, value)?;
                c.name = Some(format!("{stem}-{}-{value}", param.replace('.', "_")));
                c.validate()?;
                runs.push(c);
            }
            started(out);
            for (value, c) in values.iter().zip(&runs) {
                let _ = writeln!(out, "{param} = {value}");
                execute(c, flags.quiet, out)?;
            }
        }
        Command::Compare {
            report_a,
            report_b,
            metric,
        } => {
            let a = read_report(&report_a)?;
            let b = read_report(&report_b)?;
            let summary = compare(&a, &b, metric)?;
            let _ = writeln!(out, "a {}", report_a.display());
            let _ = writeln!(out, "b {}", report_b.display());
            let _ = write!(out, "{}", summary.to_table());
            let _ = writeln!(out, "{}", summary.to_json());
        }
        Command::EnumerateOptions { config } => {
            let config = load_config(&config)?;
            for (n, m) in config.spec.modalities.iter().enumerate() {
                let axes = m.space.axes();
                let _ = writeln!(
                    out,
                    "modality {n} {}: {} options, fixed {}",
                    m.name,
                    m.space.total_size(),
                    m.fixed
                );
                for (i, option) in m.space.enumerate().iter().enumerate() {
                    let cells: Vec<String> = axes
                        .iter()
                        .zip(&option.values)
                        .map(|(a, v)| format!("{}={v}", a.name))
                        .collect();
                    let _ = writeln!(out, "{i:>4} {}", cells.join(" "));
                }
            }
        }
        Command::Demo { framework, flags } => {
            let mut config = demo_config(framework)?;
            flags.apply(&mut config)?;
            started(out);
            execute(&config, flags.quiet, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
