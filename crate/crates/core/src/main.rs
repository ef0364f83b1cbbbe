use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use suntrack::agent::{self, AgentConfig};
use suntrack::environment::ScenarioConfig;
use suntrack::ephemeris::GeoLocation;
use suntrack::harness::{self, Experiment, HarnessError, TrackerConfig};
use suntrack::neural::Mlp;
use suntrack::seeding::derive_seed;
use suntrack::tracker;

#[derive(Parser)]
#[command(name = "suntrack", version, about = "Sun-tracking panel simulation: ephemeris, tracker, DQN controller")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path: a checkpoint for training commands, a directory for `run`,
    /// a CSV file for `ephemeris` and `baseline`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tracker config for `track-train`, run config for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sun azimuth and elevation through one UTC day.
    Ephemeris {
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// YYYY-MM-DD.
        #[arg(long)]
        date: NaiveDate,
        #[arg(long, default_value_t = 10)]
        step_min: u32,
    },
    /// Train the sun tracker on rendered sky frames.
    TrackTrain {
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Train the DQN panel controller.
    Train {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        agent: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Greedy evaluation of a trained controller.
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        agent: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Best static and oracle tracking yields for a scenario.
    Baseline {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Full pipeline from a run config.
    Run,
}

/// Tracker network for scenarios that observe the sun through it.
#[derive(clap::Args)]
struct TrackerArgs {
    #[arg(long = "tracker")]
    tracker_checkpoint: Option<PathBuf>,
    #[arg(long)]
    tracker_config: Option<PathBuf>,
}

impl TrackerArgs {
    fn load(&self) -> Result<Option<(TrackerConfig, Mlp)>, HarnessError> {
        let Some(ckpt) = &self.tracker_checkpoint else {
            return Ok(None);
        };
        let cfg = match &self.tracker_config {
            Some(p) => harness::load_config(p)?,
            None => TrackerConfig::default(),
        };
        Ok(Some((cfg, harness::load_checkpoint(ckpt)?)))
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), HarnessError> {
    match out {
        Some(p) => harness::write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|source| HarnessError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, HarnessError> {
    v.as_deref()
        .ok_or_else(|| HarnessError::Usage(format!("--{flag} is required for this command")))
}

fn agent_config(path: &Option<PathBuf>) -> Result<AgentConfig, HarnessError> {
    match path {
        Some(p) => harness::load_config(p),
        None => Ok(AgentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Ephemeris {
            lat,
            lon,
            date,
            step_min,
        } => {
            let loc = GeoLocation::new(*lat, *lon)?;
            let rows = harness::ephemeris_table(loc, *date, *step_min)?;
            emit(cli.out.as_deref(), &harness::csv_bytes(&harness::EPHEMERIS_HEADER, &rows)?)
        }
        Command::TrackTrain { metrics } => {
            let out = require(&cli.out, "out")?;
            let cfg: TrackerConfig = match &cli.config {
                Some(p) => harness::load_config(p)?,
                None => TrackerConfig::default(),
            };
            let (net, epochs) = tracker::train_tracker(&cfg.train, &cfg.loss, derive_seed(seed, "tracker"))?;
            harness::save_checkpoint(&net, out)?;
            emit(metrics.as_deref(), &harness::tracker_metrics_csv(&epochs)?)
        }
        Command::Train {
            scenario,
            agent: agent_path,
            metrics,
            tracker,
        } => {
            let out = require(&cli.out, "out")?;
            let scenario: ScenarioConfig = harness::load_config(scenario)?;
            let cfg = agent_config(agent_path)?;
            let tracker = tracker.load()?;
            let mut env = harness::solar_env(&scenario, tracker.as_ref().map(|(c, n)| (c, n)))?;
            let (net, episodes) = agent::run_training(&mut env, &cfg, derive_seed(seed, "agent"))?;
            harness::save_checkpoint(&net, out)?;
            emit(metrics.as_deref(), &harness::csv_bytes(&harness::EPISODE_HEADER, &episodes)?)
        }
        Command::Eval {
            scenario,
            agent: agent_path,
            checkpoint,
            episodes,
            metrics,
            tracker,
        } => {
            let scenario: ScenarioConfig = harness::load_config(scenario)?;
            let cfg = agent_config(agent_path)?;
            let net = harness::load_checkpoint(checkpoint)?;
            let tracker = tracker.load()?;
            let mut env = harness::solar_env(&scenario, tracker.as_ref().map(|(c, n)| (c, n)))?;
            let rows = harness::evaluate_policy(&mut env, &net, &cfg, *episodes, derive_seed(seed, "eval"))?;
            emit(metrics.as_deref(), &harness::csv_bytes(&harness::EPISODE_HEADER, &rows)?)
        }
        Command::Baseline { scenario } => {
            let scenario: ScenarioConfig = harness::load_config(scenario)?;
            let row = harness::baselines(&scenario)?.row();
            let bytes = harness::csv_bytes(&harness::BASELINE_HEADER, &[row])?;
            if let Some(p) = &cli.out {
                harness::write_atomic(p, &bytes)?;
            }
            emit(None, &bytes)
        }
        Command::Run => {
            let config = require(&cli.config, "config")?;
            let exp = Experiment::load(config, cli.seed, cli.out.clone())?;
            let summary = harness::run_experiment(&exp)?;
            let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            text.push('\n');
            emit(None, text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
