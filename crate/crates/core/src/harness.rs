//! Config files, checkpoints, metrics CSVs and the end-to-end experiment
//! behind the command-line tool.
//!
//! Every config type is JSON with unknown fields rejected. A run directory
//! receives its metrics and checkpoints first and `summary.json` last, written
//! by rename, so a directory without a summary holds an incomplete run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, AgentConfig, AgentError, EpisodeMetrics};
use crate::environment::{self, EnvError, ScenarioConfig, SolarEnv, TrackerModel};
use crate::ephemeris::{self, EphemerisError, GeoLocation, Timestamp};
use crate::neural::Mlp;
use crate::seeding::{derive_seed, indexed_seed};
use crate::tracker::{self, EvalKind, LossConfig, TrackerEpoch, TrackerError, TrainConfig};
use crate::Vec3;

pub const CHECKPOINT_VERSION: u64 = 1;
pub const SUMMARY_FILE: &str = "summary.json";

pub const EPHEMERIS_HEADER: [&str; 3] = ["time_utc", "azimuth_deg", "elevation_deg"];
pub const TRACKER_HEADER: [&str; 4] = ["epoch", "loss", "hit_rate", "occluded_hit_rate"];
pub const EPISODE_HEADER: [&str; 5] = ["episode", "return", "success", "energy_wh", "epsilon"];
pub const BASELINE_HEADER: [&str; 3] = ["best_static_wh", "oracle_tracking_wh", "gain_percent"];

/// Orientation grid used for the best static panel, in degrees.
pub const STATIC_GRID_DEG: f64 = 1.0;
/// Seeded frames per tracker hit-rate estimate.
pub const TRACKER_EVAL_FRAMES: usize = 200;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {msg}", .path.display())]
    Config { path: PathBuf, msg: String },
    #[error("{}: checkpoint format_version {found}, this build reads version {CHECKPOINT_VERSION}", .path.display())]
    Version { path: PathBuf, found: u64 },
    #[error("{}: invalid checkpoint: {msg}", .path.display())]
    Checkpoint { path: PathBuf, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Ephemeris(#[from] EphemerisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn config_err(path: &Path, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// A JSON config document with invariants beyond what parsing checks.
pub trait ConfigFile: Serialize + DeserializeOwned {
    fn check(&self) -> Result<(), String>;
}

impl ConfigFile for ScenarioConfig {
    fn check(&self) -> Result<(), String> {
        self.validate().map_err(|e| e.to_string())
    }
}

impl ConfigFile for AgentConfig {
    fn check(&self) -> Result<(), String> {
        self.validate().map_err(|e| e.to_string())
    }
}

/// Tracker training and loss settings in one file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub train: TrainConfig,
    pub loss: LossConfig,
}

impl ConfigFile for TrackerConfig {
    fn check(&self) -> Result<(), String> {
        self.train.validate().map_err(|e| e.to_string())?;
        self.loss.validate().map_err(|e| e.to_string())
    }
}

impl TrackerConfig {
    pub fn model(&self, net: Mlp) -> TrackerModel {
        TrackerModel {
            net,
            scene: self.train.scene.clone(),
            n_refine: self.train.n_refine,
        }
    }
}

/// Top-level run description. Paths are relative to the file that holds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: PathBuf,
    /// Agent config; defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<PathBuf>,
    /// Tracker config; defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Skip tracker training and use this network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_checkpoint: Option<PathBuf>,
    /// Skip agent training and only evaluate this network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_checkpoint: Option<PathBuf>,
}

fn default_eval_episodes() -> usize {
    10
}

impl ConfigFile for RunConfig {
    fn check(&self) -> Result<(), String> {
        if self.eval_episodes == 0 {
            return Err("eval_episodes: must be >= 1".into());
        }
        Ok(())
    }
}

/// Reads and validates a config file. An empty file parses as `{}`, so the
/// error names the first required field.
pub fn load_config<T: ConfigFile>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let text = if text.trim().is_empty() { "{}" } else { text.as_str() };
    let cfg: T = serde_json::from_str(text).map_err(|e| config_err(path, e.to_string()))?;
    cfg.check().map_err(|msg| config_err(path, msg))?;
    Ok(cfg)
}

/// Writes `cfg` as pretty JSON with every default filled in.
pub fn save_config<T: ConfigFile>(cfg: &T, path: &Path) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(cfg).map_err(|e| config_err(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    format_version: u64,
}

/// Checkpoint JSON. Weights are row-major `out x in` per layer; floats use
/// shortest round-trip formatting, so parsing restores every bit.
pub fn checkpoint_json(net: &Mlp) -> String {
    let doc = CheckpointDoc {
        layer_sizes: net.layer_sizes().to_vec(),
        weights: net.weights().to_vec(),
        biases: net.biases().to_vec(),
        format_version: CHECKPOINT_VERSION,
    };
    serde_json::to_string(&doc).expect("checkpoint serialization cannot fail")
}

pub fn save_checkpoint(net: &Mlp, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, checkpoint_json(net).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_checkpoint(&text).map_err(|e| match e {
        CheckpointIssue::Version(found) => HarnessError::Version {
            path: path.to_path_buf(),
            found,
        },
        CheckpointIssue::Invalid(msg) => HarnessError::Checkpoint {
            path: path.to_path_buf(),
            msg,
        },
    })
}

enum CheckpointIssue {
    Version(u64),
    Invalid(String),
}

fn parse_checkpoint(text: &str) -> Result<Mlp, CheckpointIssue> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CheckpointIssue::Invalid(e.to_string()))?;
    match value.get("format_version").map(|v| v.as_u64()) {
        Some(Some(CHECKPOINT_VERSION)) => {}
        Some(Some(found)) => return Err(CheckpointIssue::Version(found)),
        Some(None) => return Err(CheckpointIssue::Invalid("format_version: not an unsigned integer".into())),
        None => return Err(CheckpointIssue::Invalid("missing field `format_version`".into())),
    }
    let doc: CheckpointDoc = serde_json::from_value(value).map_err(|e| CheckpointIssue::Invalid(e.to_string()))?;
    Mlp::from_parts(doc.layer_sizes, doc.weights, doc.biases).map_err(|e| CheckpointIssue::Invalid(e.to_string()))
}

/// Renders `rows` as CSV under a fixed header. Row fields must serialize in
/// header order.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EphemerisRow {
    pub time_utc: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Sun position every `step_min` minutes from 00:00 UTC through the day.
pub fn ephemeris_table(loc: GeoLocation, date: NaiveDate, step_min: u32) -> Result<Vec<EphemerisRow>, HarnessError> {
    if step_min == 0 || step_min > 1440 {
        return Err(HarnessError::Usage("step-min: must lie in 1..=1440".into()));
    }
    let start = Timestamp::from_date(date);
    (0..1440 / step_min)
        .map(|k| {
            let t = start.plus_seconds(i64::from(k * step_min) * 60);
            let a = ephemeris::solar_direction(t, loc)?;
            Ok(EphemerisRow {
                time_utc: t.to_string(),
                azimuth_deg: a.azimuth_deg(),
                elevation_deg: a.elevation_deg(),
            })
        })
        .collect()
}

/// Static and oracle yields for one scenario, in Wh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baselines {
    pub flat_wh: f64,
    pub best_static_wh: f64,
    pub best_static_azimuth_deg: f64,
    pub best_static_tilt_deg: f64,
    pub oracle_wh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineRow {
    pub best_static_wh: f64,
    pub oracle_tracking_wh: f64,
    pub gain_percent: f64,
}

impl Baselines {
    pub fn row(&self) -> BaselineRow {
        BaselineRow {
            best_static_wh: self.best_static_wh,
            oracle_tracking_wh: self.oracle_wh,
            gain_percent: gain_percent(self.oracle_wh, self.best_static_wh),
        }
    }
}

/// `100 (value / reference - 1)`.
pub fn gain_percent(value: f64, reference: f64) -> f64 {
    100.0 * (value / reference - 1.0)
}

pub fn baselines(cfg: &ScenarioConfig) -> Result<Baselines, HarnessError> {
    let flat_wh = environment::static_yield(cfg, &Vec3::z())?;
    let (az, tilt, _, best_static_wh) = environment::best_static_orientation(cfg, STATIC_GRID_DEG)?;
    let oracle_wh = environment::oracle_tracking_yield(cfg)?;
    Ok(Baselines {
        flat_wh,
        best_static_wh,
        best_static_azimuth_deg: az,
        best_static_tilt_deg: tilt,
        oracle_wh,
    })
}

/// Clean and occluded hit-rates on freshly seeded frames.
pub fn tracker_hit_rates(net: &Mlp, cfg: &TrackerConfig, frames: usize, seed: u64) -> Result<(f64, f64), HarnessError> {
    let scene = &cfg.train.scene;
    let clean = tracker::eval_frames(scene, EvalKind::Clean, frames, indexed_seed(seed, 0));
    let occluded = tracker::eval_frames(scene, EvalKind::Occluded, frames, indexed_seed(seed, 1));
    Ok((
        tracker::evaluate_hit_rate(net, &clean, cfg.train.n_refine)?,
        tracker::evaluate_hit_rate(net, &occluded, cfg.train.n_refine)?,
    ))
}

pub fn solar_env(
    scenario: &ScenarioConfig,
    tracker: Option<(&TrackerConfig, &Mlp)>,
) -> Result<SolarEnv, HarnessError> {
    let model = match tracker {
        Some((cfg, net)) if scenario.use_tracker_observations => Some(cfg.model(net.clone())),
        _ => None,
    };
    Ok(SolarEnv::new(scenario.clone(), model)?)
}

/// Greedy rollouts of a frozen network; episode `i` resets with the `i`-th
/// seed of `seed`.
pub fn evaluate_policy(
    env: &mut SolarEnv,
    net: &Mlp,
    cfg: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeMetrics>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes)
        .map(|i| {
            let mut m = agent::run_episode(env, net, cfg, indexed_seed(seed, i as u64), 0.0, &mut rng)?;
            m.episode = i;
            Ok(m)
        })
        .collect()
}

/// Everything a run needs, with files already loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: ScenarioConfig,
    pub agent: AgentConfig,
    pub tracker: TrackerConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub tracker_checkpoint: Option<Mlp>,
    pub agent_checkpoint: Option<Mlp>,
}

impl Experiment {
    /// Loads a run config and every file it names. `seed` and `out_dir`
    /// override the file's values.
    pub fn load(path: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self, HarnessError> {
        let run: RunConfig = load_config(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| base.join(p);
        let out_dir = out_dir
            .or_else(|| run.output_dir.as_deref().map(resolve))
            .ok_or_else(|| config_err(path, "output_dir: required here or on the command line"))?;
        let agent = match &run.agent {
            Some(p) => load_config(&resolve(p))?,
            None => AgentConfig::default(),
        };
        let tracker = match &run.tracker {
            Some(p) => load_config(&resolve(p))?,
            None => TrackerConfig::default(),
        };
        Ok(Self {
            scenario: load_config(&resolve(&run.scenario))?,
            agent,
            tracker,
            seed: seed.unwrap_or(run.seed),
            out_dir,
            eval_episodes: run.eval_episodes,
            tracker_checkpoint: run.tracker_checkpoint.as_deref().map(|p| load_checkpoint(&resolve(p))).transpose()?,
            agent_checkpoint: run.agent_checkpoint.as_deref().map(|p| load_checkpoint(&resolve(p))).transpose()?,
        })
    }
}

/// Key-value result of a complete run. Tracker fields are absent when the
/// run had no tracker network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub eval_episodes: usize,
    pub tracker_hit_rate: Option<f64>,
    pub tracker_occluded_hit_rate: Option<f64>,
    pub agent_success_rate: f64,
    pub policy_energy_wh: f64,
    pub flat_static_wh: f64,
    pub best_static_wh: f64,
    pub oracle_wh: f64,
    pub policy_fraction_of_oracle: f64,
    pub gain_vs_best_static_percent: f64,
    pub gain_vs_flat_percent: f64,
    pub oracle_gain_vs_best_static_percent: f64,
}

/// Artifact names inside a run directory.
pub mod files {
    pub const TRACKER_CHECKPOINT: &str = "tracker.json";
    pub const TRACKER_METRICS: &str = "tracker_metrics.csv";
    pub const AGENT_CHECKPOINT: &str = "agent.json";
    pub const TRAIN_METRICS: &str = "train_metrics.csv";
    pub const EVAL_METRICS: &str = "eval_metrics.csv";
    pub const BASELINE: &str = "baseline.csv";
}

/// Runs the pipeline: tracker training, agent training, greedy evaluation,
/// baselines, summary. Stages with a supplied checkpoint are skipped and
/// write nothing. With an agent checkpoint and no tracker checkpoint the
/// tracker stage is skipped too, unless the scenario observes through it.
pub fn run_experiment(exp: &Experiment) -> Result<Summary, HarnessError> {
    let out = &exp.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let summary_path = out.join(SUMMARY_FILE);
    if summary_path.exists() {
        fs::remove_file(&summary_path).map_err(io_err(&summary_path))?;
    }

    let need_tracker = exp.agent_checkpoint.is_none() || exp.scenario.use_tracker_observations;
    let tracker_net = match &exp.tracker_checkpoint {
        Some(net) => Some(net.clone()),
        None if need_tracker => {
            let (net, epochs) =
                tracker::train_tracker(&exp.tracker.train, &exp.tracker.loss, derive_seed(exp.seed, "tracker"))?;
            save_checkpoint(&net, &out.join(files::TRACKER_CHECKPOINT))?;
            write_csv(&out.join(files::TRACKER_METRICS), &TRACKER_HEADER, &epochs)?;
            Some(net)
        }
        None => None,
    };
    let hit_rates = tracker_net
        .as_ref()
        .map(|net| tracker_hit_rates(net, &exp.tracker, TRACKER_EVAL_FRAMES, derive_seed(exp.seed, "tracker-eval")))
        .transpose()?;

    let mut env = solar_env(&exp.scenario, tracker_net.as_ref().map(|n| (&exp.tracker, n)))?;
    let policy = match &exp.agent_checkpoint {
        Some(net) => net.clone(),
        None => {
            let (net, episodes) = agent::run_training(&mut env, &exp.agent, derive_seed(exp.seed, "agent"))?;
            save_checkpoint(&net, &out.join(files::AGENT_CHECKPOINT))?;
            write_csv(&out.join(files::TRAIN_METRICS), &EPISODE_HEADER, &episodes)?;
            net
        }
    };
    let eval = evaluate_policy(&mut env, &policy, &exp.agent, exp.eval_episodes, derive_seed(exp.seed, "eval"))?;
    write_csv(&out.join(files::EVAL_METRICS), &EPISODE_HEADER, &eval)?;

    let base = baselines(&exp.scenario)?;
    write_csv(&out.join(files::BASELINE), &BASELINE_HEADER, &[base.row()])?;

    let n = eval.len() as f64;
    let energy = eval.iter().map(|m| m.energy_wh).sum::<f64>() / n;
    let summary = Summary {
        seed: exp.seed,
        eval_episodes: exp.eval_episodes,
        tracker_hit_rate: hit_rates.map(|h| h.0),
        tracker_occluded_hit_rate: hit_rates.map(|h| h.1),
        agent_success_rate: eval.iter().filter(|m| m.success).count() as f64 / n,
        policy_energy_wh: energy,
        flat_static_wh: base.flat_wh,
        best_static_wh: base.best_static_wh,
        oracle_wh: base.oracle_wh,
        policy_fraction_of_oracle: energy / base.oracle_wh,
        gain_vs_best_static_percent: gain_percent(energy, base.best_static_wh),
        gain_vs_flat_percent: gain_percent(energy, base.flat_wh),
        oracle_gain_vs_best_static_percent: gain_percent(base.oracle_wh, base.best_static_wh),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    text.push('\n');
    write_atomic(&summary_path, text.as_bytes())?;
    Ok(summary)
}

/// Tracker metrics rows, for callers that train outside [`run_experiment`].
pub fn tracker_metrics_csv(epochs: &[TrackerEpoch]) -> Result<Vec<u8>, HarnessError> {
    csv_bytes(&TRACKER_HEADER, epochs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mlp;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    const MINIMAL_SCENARIO: &str =
        r#"{"location": {"latitude_deg": -37.81, "longitude_deg": 144.96}, "date": "2024-01-15"}"#;

    #[test]
    fn empty_scenario_names_first_required_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.json", "");
        let err = load_config::<ScenarioConfig>(&p).unwrap_err().to_string();
        assert!(err.contains("location"), "{err}");
    }

    #[test]
    fn attenuation_outside_unit_interval_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"location": {"latitude_deg": -37.8, "longitude_deg": 145.0}, "date": "2024-01-15",
            "cloud_process": {"rate_per_hour": 1, "mean_duration_min": 10, "attenuation": 1.5}}"#;
        let p = write(dir.path(), "s.json", text);
        let err = load_config::<ScenarioConfig>(&p).unwrap_err().to_string();
        assert!(err.contains("attenuation") && err.contains("[0, 1]"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.json", r#"{"gama": 0.9}"#);
        let err = load_config::<AgentConfig>(&p).unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
    }

    #[test]
    fn minimal_scenario_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.json", MINIMAL_SCENARIO);
        let cfg: ScenarioConfig = load_config(&p).unwrap();
        assert_eq!(cfg, ScenarioConfig::melbourne_summer());
        let q = dir.path().join("again.json");
        save_config(&cfg, &q).unwrap();
        assert_eq!(load_config::<ScenarioConfig>(&q).unwrap(), cfg);
    }

    #[test]
    fn agent_and_tracker_configs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = AgentConfig {
            episodes: 7,
            ..Default::default()
        };
        save_config(&a, &dir.path().join("a.json")).unwrap();
        assert_eq!(load_config::<AgentConfig>(&dir.path().join("a.json")).unwrap(), a);
        let t = TrackerConfig::default();
        save_config(&t, &dir.path().join("t.json")).unwrap();
        assert_eq!(load_config::<TrackerConfig>(&dir.path().join("t.json")).unwrap(), t);
        assert_eq!(load_config::<TrackerConfig>(&write(dir.path(), "e.json", "  \n")).unwrap(), t);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let net = Mlp::new(&[5, 7, 3], 11).unwrap();
        let p = dir.path().join("n.json");
        save_checkpoint(&net, &p).unwrap();
        let back = load_checkpoint(&p).unwrap();
        for (a, b) in net.params().zip(back.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
            assert_eq!(net.forward(&x).unwrap(), back.forward(&x).unwrap());
        }
    }

    #[test]
    fn checkpoint_layout() {
        let net = Mlp::new(&[2, 3, 1], 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&checkpoint_json(&net)).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["layer_sizes"], serde_json::json!([2, 3, 1]));
        assert_eq!(v["weights"][0].as_array().unwrap().len(), 6);
        assert_eq!(v["biases"][1].as_array().unwrap().len(), 1);
    }

    #[test]
    fn truncated_checkpoint_fails() {
        let dir = tempfile::tempdir().unwrap();
        let text = checkpoint_json(&Mlp::new(&[3, 4, 2], 1).unwrap());
        let p = write(dir.path(), "n.json", &text[..text.len() / 2]);
        assert!(matches!(load_checkpoint(&p), Err(HarnessError::Checkpoint { .. })));
    }

    #[test]
    fn wrong_version_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let text = checkpoint_json(&Mlp::new(&[3, 2], 1).unwrap()).replace("\"format_version\":1", "\"format_version\":2");
        let p = write(dir.path(), "n.json", &text);
        match load_checkpoint(&p) {
            Err(HarnessError::Version { found, .. }) => assert_eq!(found, 2),
            other => panic!("expected a version error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_shapes_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "n.json",
            r#"{"layer_sizes":[2,1],"weights":[[1.0]],"biases":[[0.0]],"format_version":1}"#,
        );
        assert!(matches!(load_checkpoint(&p), Err(HarnessError::Checkpoint { .. })));
    }

    #[test]
    fn csv_headers_are_fixed() {
        let rows = [EpisodeMetrics {
            episode: 0,
            return_: 1.5,
            success: true,
            energy_wh: 2.0,
            epsilon: 0.1,
        }];
        let text = String::from_utf8(csv_bytes(&EPISODE_HEADER, &rows).unwrap()).unwrap();
        assert_eq!(text, "episode,return,success,energy_wh,epsilon\n0,1.5,true,2.0,0.1\n");
        let empty: [TrackerEpoch; 0] = [];
        assert_eq!(tracker_metrics_csv(&empty).unwrap(), b"epoch,loss,hit_rate,occluded_hit_rate\n");
        let b = BaselineRow {
            best_static_wh: 1.0,
            oracle_tracking_wh: 1.5,
            gain_percent: 50.0,
        };
        let text = String::from_utf8(csv_bytes(&BASELINE_HEADER, &[b]).unwrap()).unwrap();
        assert!(text.starts_with("best_static_wh,oracle_tracking_wh,gain_percent\n"));
    }

    #[test]
    fn ephemeris_table_covers_the_day() {
        let date = NaiveDate::from_ymd_opt(2024, 1, 15).unwrap();
        let rows = ephemeris_table(GeoLocation::melbourne(), date, 60).unwrap();
        assert_eq!(rows.len(), 24);
        assert_eq!(rows[0].time_utc, "2024-01-15T00:00:00Z");
        assert_eq!(rows[23].time_utc, "2024-01-15T23:00:00Z");
        // 02:00 UTC is local noon in Melbourne in summer
        assert!(rows[2].elevation_deg > 60.0);
        assert!(ephemeris_table(GeoLocation::melbourne(), date, 0).is_err());
    }

    #[test]
    fn run_config_requires_an_output_dir() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "s.json", MINIMAL_SCENARIO);
        let p = write(dir.path(), "run.json", r#"{"scenario": "s.json"}"#);
        let err = Experiment::load(&p, None, None).unwrap_err().to_string();
        assert!(err.contains("output_dir"), "{err}");
        let exp = Experiment::load(&p, Some(4), Some(dir.path().join("out"))).unwrap();
        assert_eq!(exp.seed, 4);
        assert_eq!(exp.eval_episodes, 10);
    }

    #[test]
    fn run_config_rejects_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "run.json", r#"{"scenario": "nope.json", "output_dir": "out"}"#);
        assert!(matches!(Experiment::load(&p, None, None), Err(HarnessError::Io { .. })));
    }

    #[test]
    fn gain_is_relative_percent() {
        assert!((gain_percent(134.0, 100.0) - 34.0).abs() < 1e-12);
        assert_eq!(gain_percent(50.0, 100.0), -50.0);
    }
}
