//! Experiment orchestration: config loading, seeded multi-run execution,
//! CSV/JSON persistence, log re-analysis and plot series.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! <out>/summary.json
//! <out>/<condition>/seed_<n>/episodes.csv   episode,steps,success,return
//! <out>/<condition>/seed_<n>/symbols.csv    episode,t,agent,symbol,context
//! <out>/<condition>/seed_<n>/run.json       per-run metrics
//! <out>/<condition>/seed_<n>/params.json    final network parameters
//! <out>/plots/*.csv                         written by `emit_plot_data`
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    attenuation_rate, entropy_series, inter_agent_jsd, mean_final_steps, probe_accuracy,
    shannon_entropy, smooth, symbol_counts, welch_t_test, Distribution4, ProbeDataset, WelchResult,
};
use crate::gridworld::Agent;
use crate::protocol::{Condition, Symbol};
use crate::stats::{mean, standard_error};
use crate::training::{run_training, AgentParams, EpisodeRecord, SymbolEntry, TrainingConfig};
use crate::{par, Error, Result};

pub const DEFAULT_METRIC_WINDOW: usize = 100;
pub const SMOOTHING_WINDOW: usize = 50;
pub const PROBE_TRAIN_FRACTION: f64 = 0.8;

pub const SUMMARY_FILE: &str = "summary.json";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const SYMBOLS_FILE: &str = "symbols.csv";
pub const RUN_FILE: &str = "run.json";
pub const PARAMS_FILE: &str = "params.json";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid_size: usize,
    pub episodes: usize,
    pub runs: usize,
    pub max_steps: usize,
    pub gamma: f64,
    pub lr: f64,
    pub epsilon: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub base_seed: u64,
    pub conditions: Vec<Condition>,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            grid_size: t.grid_size,
            episodes: t.episodes,
            runs: 10,
            max_steps: t.max_steps,
            gamma: t.gamma,
            lr: t.lr,
            epsilon: t.epsilon,
            buffer_capacity: t.buffer_capacity,
            batch_size: t.batch_size,
            hidden_units: t.hidden_units,
            base_seed: 0,
            conditions: Condition::ALL.to_vec(),
            output_dir: PathBuf::from("runs"),
        }
    }
}

const CONFIG_KEYS: [&str; 13] = [
    "grid_size",
    "episodes",
    "runs",
    "max_steps",
    "gamma",
    "lr",
    "epsilon",
    "buffer_capacity",
    "batch_size",
    "hidden_units",
    "base_seed",
    "conditions",
    "output_dir",
];

impl Config {
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            grid_size: self.grid_size,
            max_steps: self.max_steps,
            episodes: self.episodes,
            gamma: self.gamma,
            lr: self.lr,
            epsilon: self.epsilon,
            buffer_capacity: self.buffer_capacity,
            batch_size: self.batch_size,
            hidden_units: self.hidden_units,
        }
    }

    /// Final-episode window used by every metric.
    pub fn metric_window(&self) -> usize {
        DEFAULT_METRIC_WINDOW.min(self.episodes)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|i| self.base_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.training().validate()?;
        if self.runs == 0 {
            return Err(Error::ConfigInvalid("runs must be positive".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::ConfigInvalid("conditions must not be empty".into()));
        }
        let mut seen = self.conditions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.conditions.len() {
            return Err(Error::ConfigInvalid("conditions contain duplicates".into()));
        }
        if self.base_seed.checked_add(self.runs as u64).is_none() {
            return Err(Error::ConfigInvalid("base_seed + runs overflows".into()));
        }
        Ok(())
    }
}

/// Parses a JSON object of config keys; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<Config> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(Error::ConfigParse("top level must be a JSON object".into()));
    };
    let unknown: Vec<&str> = map
        .keys()
        .map(String::as_str)
        .filter(|k| !CONFIG_KEYS.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::ConfigUnknownKey(unknown.join(", ")));
    }
    let config: Config =
        serde_json::from_value(value).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Metrics of one training run, over its final window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub condition: Condition,
    pub seed: u64,
    pub episodes: usize,
    pub metric_window: usize,
    pub mean_final_steps: f64,
    pub success_rate: f64,
    pub symbol_distribution: Distribution4,
    pub entropy: f64,
    pub inter_agent_jsd: f64,
    pub probe_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub seeds: Vec<u64>,
    pub mean_final_steps: Vec<f64>,
    pub pooled_mean_steps: f64,
    pub stderr_steps: f64,
    /// Pooled over both agents and all seeds.
    pub symbol_distribution: Distribution4,
    pub entropy: f64,
    pub entropy_per_seed: Vec<f64>,
    pub inter_agent_jsd: f64,
    pub inter_agent_jsd_per_seed: Vec<f64>,
    pub probe_accuracy: f64,
    pub probe_accuracy_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `(psp - ec) / ec * 100` on pooled final-window mean steps.
    pub attenuation_rate_percent: f64,
    /// Absent when either condition has fewer than two seeds.
    pub welch: Option<WelchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub metric_window: usize,
    pub conditions: Vec<ConditionSummary>,
    pub comparison: Option<Comparison>,
}

impl RunSummary {
    pub fn condition(&self, condition: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

fn final_window(episodes: &[EpisodeRecord], window: usize) -> Result<&[EpisodeRecord]> {
    if window == 0 || window > episodes.len() {
        return Err(Error::InvalidArgument(format!(
            "metric window {window} exceeds {} episodes",
            episodes.len()
        )));
    }
    Ok(&episodes[episodes.len() - window..])
}

pub fn run_report(
    condition: Condition,
    seed: u64,
    episodes: &[EpisodeRecord],
    window: usize,
) -> Result<RunReport> {
    let tail = final_window(episodes, window)?;
    let symbol_distribution = Distribution4::from_counts(symbol_counts(tail, None))?;
    Ok(RunReport {
        condition,
        seed,
        episodes: episodes.len(),
        metric_window: window,
        mean_final_steps: mean_final_steps(tail, window)?,
        success_rate: tail.iter().filter(|e| e.success).count() as f64 / window as f64,
        symbol_distribution,
        entropy: shannon_entropy(&symbol_distribution),
        inter_agent_jsd: inter_agent_jsd(tail, window)?,
        probe_accuracy: probe_accuracy(
            &ProbeDataset::from_episodes(tail, window)?,
            seed,
            PROBE_TRAIN_FRACTION,
        )?,
    })
}

/// Aggregates per-seed final windows into the cross-condition summary.
pub fn summarize(
    runs: &[(Condition, Vec<(u64, Vec<EpisodeRecord>)>)],
    window: usize,
) -> Result<RunSummary> {
    let mut conditions = Vec::new();
    for (condition, seeds) in runs {
        if seeds.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no runs for condition {condition}"
            )));
        }
        let reports = seeds
            .iter()
            .map(|(seed, eps)| run_report(*condition, *seed, eps, window))
            .collect::<Result<Vec<_>>>()?;
        let mut pooled = [0u64; 4];
        for (_, eps) in seeds {
            let c = symbol_counts(final_window(eps, window)?, None);
            pooled.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        let symbol_distribution = Distribution4::from_counts(pooled)?;
        let steps: Vec<f64> = reports.iter().map(|r| r.mean_final_steps).collect();
        let jsd: Vec<f64> = reports.iter().map(|r| r.inter_agent_jsd).collect();
        let probe: Vec<f64> = reports.iter().map(|r| r.probe_accuracy).collect();
        conditions.push(ConditionSummary {
            condition: *condition,
            seeds: reports.iter().map(|r| r.seed).collect(),
            pooled_mean_steps: mean(&steps),
            stderr_steps: standard_error(&steps),
            mean_final_steps: steps,
            symbol_distribution,
            entropy: shannon_entropy(&symbol_distribution),
            entropy_per_seed: reports.iter().map(|r| r.entropy).collect(),
            inter_agent_jsd: mean(&jsd),
            inter_agent_jsd_per_seed: jsd,
            probe_accuracy: mean(&probe),
            probe_accuracy_per_seed: probe,
        });
    }
    conditions.sort_by_key(|c| c.condition);

    let find = |c: Condition| conditions.iter().find(|s| s.condition == c);
    let comparison = match (find(Condition::Ec), find(Condition::Psp)) {
        (Some(ec), Some(psp)) => Some(Comparison {
            attenuation_rate_percent: attenuation_rate(
                psp.pooled_mean_steps,
                ec.pooled_mean_steps,
            )?,
            welch: welch_t_test(&psp.mean_final_steps, &ec.mean_final_steps).ok(),
        }),
        _ => None,
    };
    Ok(RunSummary {
        metric_window: window,
        conditions,
        comparison,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeRow {
    episode: usize,
    steps: usize,
    success: u8,
    #[serde(rename = "return")]
    total_return: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SymbolRow {
    episode: usize,
    t: usize,
    agent: u8,
    symbol: usize,
    context: usize,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::log(path, e.to_string())
}

pub fn write_episode_logs(dir: &Path, episodes: &[EpisodeRecord]) -> Result<()> {
    let path = dir.join(EPISODES_FILE);
    let mut w = csv_writer(&path)?;
    for e in episodes {
        w.serialize(EpisodeRow {
            episode: e.episode,
            steps: e.steps,
            success: e.success as u8,
            total_return: e.total_return,
        })
        .map_err(|err| csv_err(&path, err))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SYMBOLS_FILE);
    let mut w = csv_writer(&path)?;
    for e in episodes {
        for s in &e.symbols {
            w.serialize(SymbolRow {
                episode: e.episode,
                t: s.t,
                agent: s.agent.index() as u8 + 1,
                symbol: s.symbol.index(),
                context: s.context.index(),
            })
            .map_err(|err| csv_err(&path, err))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Rebuilds episode records from a run directory's CSV logs.
pub fn read_episode_logs(dir: &Path) -> Result<Vec<EpisodeRecord>> {
    let path = dir.join(EPISODES_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut episodes = Vec::new();
    for (i, row) in reader.deserialize::<EpisodeRow>().enumerate() {
        let row = row.map_err(|e| csv_err(&path, e))?;
        if row.episode != i {
            return Err(Error::log(
                &path,
                format!("row {}: expected episode {i}, found {}", i + 1, row.episode),
            ));
        }
        if row.steps == 0 || row.success > 1 || !row.total_return.is_finite() {
            return Err(Error::log(
                &path,
                format!("row {}: invalid episode values", i + 1),
            ));
        }
        episodes.push(EpisodeRecord {
            episode: row.episode,
            steps: row.steps,
            success: row.success == 1,
            total_return: row.total_return,
            symbols: Vec::with_capacity(2 * row.steps),
        });
    }
    if episodes.is_empty() {
        return Err(Error::log(&path, "no episodes"));
    }

    let path = dir.join(SYMBOLS_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for (i, row) in reader.deserialize::<SymbolRow>().enumerate() {
        let row = row.map_err(|e| csv_err(&path, e))?;
        let line = i + 1;
        let bad = |msg: &str| Error::log(&path, format!("row {line}: {msg}"));
        let agent = Agent::from_index((row.agent as usize).wrapping_sub(1))
            .ok_or_else(|| bad("agent must be 1 or 2"))?;
        let symbol = Symbol::from_index(row.symbol).ok_or_else(|| bad("symbol out of range"))?;
        let context = Symbol::from_index(row.context).ok_or_else(|| bad("context out of range"))?;
        let episode = episodes
            .get_mut(row.episode)
            .ok_or_else(|| bad("episode not present in episodes log"))?;
        if row.t == 0 || row.t > episode.steps {
            return Err(bad("timestep outside the episode"));
        }
        episode.symbols.push(SymbolEntry {
            t: row.t,
            agent,
            symbol,
            context,
        });
    }
    if let Some(e) = episodes.iter().find(|e| e.symbols.len() != 2 * e.steps) {
        return Err(Error::log(
            &path,
            format!(
                "episode {} has {} symbol rows, expected {}",
                e.episode,
                e.symbols.len(),
                2 * e.steps
            ),
        ));
    }
    Ok(episodes)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::log(path, e.to_string()))
}

pub fn run_dir(root: &Path, condition: Condition, seed: u64) -> PathBuf {
    root.join(condition.as_str()).join(format!("seed_{seed}"))
}

fn partial_dir(dir: &Path) -> PathBuf {
    let mut name = dir.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    dir.with_file_name(name)
}

/// Trains one run and writes its artifacts. Logs go to a `.partial`
/// directory that is renamed into place only once complete.
fn execute_run(
    config: &Config,
    root: &Path,
    condition: Condition,
    seed: u64,
) -> Result<(RunReport, Vec<EpisodeRecord>)> {
    let dir = run_dir(root, condition, seed);
    let staging = partial_dir(&dir);
    for d in [&dir, &staging] {
        if d.exists() {
            fs::remove_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let outcome = (|| {
        let result = run_training(&config.training(), condition, seed)?;
        let window = config.metric_window();
        let report = run_report(condition, seed, &result.episodes, window)?;
        write_episode_logs(&staging, &result.episodes)?;
        write_json(&staging.join(RUN_FILE), &report)?;
        write_json::<[AgentParams; 2]>(&staging.join(PARAMS_FILE), &result.final_params)?;
        let tail = result.episodes[result.episodes.len() - window..].to_vec();
        Ok((report, tail))
    })();
    match outcome {
        Ok(v) => {
            fs::rename(&staging, &dir).map_err(|e| Error::io(&dir, e))?;
            Ok(v)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Runs every condition x seed (concurrently when the `parallel` feature is
/// on), writes per-run artifacts and the summary, and returns the summary.
pub fn run_experiment(config: &Config) -> Result<RunSummary> {
    config.validate()?;
    let root = &config.output_dir;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let jobs: Vec<(Condition, u64)> = config
        .conditions
        .iter()
        .flat_map(|&c| config.seeds().into_iter().map(move |s| (c, s)))
        .collect();
    let results = par::map(&jobs, |&(condition, seed)| {
        execute_run(config, root, condition, seed)
    });

    let mut grouped: BTreeMap<Condition, Vec<(u64, Vec<EpisodeRecord>)>> = BTreeMap::new();
    for ((condition, seed), result) in jobs.iter().zip(results) {
        let (_, tail) = result?;
        grouped.entry(*condition).or_default().push((*seed, tail));
    }
    let grouped: Vec<_> = grouped.into_iter().collect();
    let summary = summarize(&grouped, config.metric_window())?;
    write_json(&root.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn seed_dirs(condition_dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(condition_dir).map_err(|e| Error::io(condition_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(condition_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|s| s.parse::<u64>().ok())
        {
            if entry.path().is_dir() {
                out.push((seed, entry.path()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// All complete runs under an experiment directory, grouped by condition.
pub fn load_runs(root: &Path) -> Result<Vec<(Condition, Vec<(u64, Vec<EpisodeRecord>)>)>> {
    let mut runs = Vec::new();
    for condition in Condition::ALL {
        let dir = root.join(condition.as_str());
        if !dir.is_dir() {
            continue;
        }
        let seeds = seed_dirs(&dir)?
            .into_iter()
            .map(|(seed, path)| read_episode_logs(&path).map(|eps| (seed, eps)))
            .collect::<Result<Vec<_>>>()?;
        if !seeds.is_empty() {
            runs.push((condition, seeds));
        }
    }
    if runs.is_empty() {
        return Err(Error::log(root, "no complete run logs found"));
    }
    Ok(runs)
}

/// Recomputes the summary from CSV logs alone. `window` defaults to the
/// smaller of 100 and the shortest run.
pub fn analyze(root: &Path, window: Option<usize>) -> Result<RunSummary> {
    let runs = load_runs(root)?;
    let shortest = runs
        .iter()
        .flat_map(|(_, seeds)| seeds.iter().map(|(_, e)| e.len()))
        .min()
        .unwrap_or(0);
    let window = window.unwrap_or(DEFAULT_METRIC_WINDOW.min(shortest));
    summarize(&runs, window)
}

pub fn read_summary(root: &Path) -> Result<RunSummary> {
    read_json(&root.join(SUMMARY_FILE))
}

pub fn read_run_report(dir: &Path) -> Result<RunReport> {
    read_json(&dir.join(RUN_FILE))
}

#[derive(Debug, Serialize)]
struct CurveRow {
    episode: usize,
    mean: f64,
    stderr: f64,
    condition: Condition,
}

#[derive(Debug, Serialize)]
struct SmoothedRow {
    episode: usize,
    mean: f64,
    condition: Condition,
}

#[derive(Debug, Serialize)]
struct FrequencyRow {
    condition: Condition,
    #[serde(rename = "C_A")]
    c_a: f64,
    #[serde(rename = "C_B")]
    c_b: f64,
    #[serde(rename = "C_C")]
    c_c: f64,
    #[serde(rename = "C_D")]
    c_d: f64,
}

#[derive(Debug, Serialize)]
struct EntropyRow {
    episode: usize,
    entropy: f64,
    condition: Condition,
}

/// Writes plot-ready series under `<root>/plots/` and returns the files:
///
/// - `learning_curve.csv`: `episode,mean,stderr,condition`, per-episode
///   steps averaged over seeds with standard error
/// - `learning_curve_smoothed.csv`: `episode,mean,condition`, trailing
///   50-episode average of the above
/// - `symbol_frequency.csv`: `condition,C_A,C_B,C_C,C_D`, final-window
///   frequencies pooled over agents and seeds
/// - `entropy.csv`: `episode,entropy,condition`, entropy of the pooled
///   symbol distribution over a trailing 50-episode window
pub fn emit_plot_data(root: &Path) -> Result<Vec<PathBuf>> {
    let runs = load_runs(root)?;
    let out_dir = root.join(PLOTS_DIR);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let paths: Vec<PathBuf> = [
        "learning_curve.csv",
        "learning_curve_smoothed.csv",
        "symbol_frequency.csv",
        "entropy.csv",
    ]
    .iter()
    .map(|n| out_dir.join(n))
    .collect();
    let mut curve = csv_writer(&paths[0])?;
    let mut smoothed = csv_writer(&paths[1])?;
    let mut freq = csv_writer(&paths[2])?;
    let mut entropy = csv_writer(&paths[3])?;

    for (condition, seeds) in &runs {
        let len = seeds.iter().map(|(_, e)| e.len()).min().unwrap_or(0);
        let mut means = Vec::with_capacity(len);
        for i in 0..len {
            let steps: Vec<f64> = seeds.iter().map(|(_, e)| e[i].steps as f64).collect();
            let m = mean(&steps);
            means.push(m);
            curve
                .serialize(CurveRow {
                    episode: i,
                    mean: m,
                    stderr: standard_error(&steps),
                    condition: *condition,
                })
                .map_err(|e| csv_err(&paths[0], e))?;
        }
        for (i, m) in smooth(&means, SMOOTHING_WINDOW).into_iter().enumerate() {
            smoothed
                .serialize(SmoothedRow {
                    episode: i,
                    mean: m,
                    condition: *condition,
                })
                .map_err(|e| csv_err(&paths[1], e))?;
        }

        let window = DEFAULT_METRIC_WINDOW.min(len);
        let mut pooled = [0u64; 4];
        for (_, eps) in seeds {
            let c = symbol_counts(&eps[eps.len() - window..], None);
            pooled.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        let [c_a, c_b, c_c, c_d] = Distribution4::from_counts(pooled)?.probabilities();
        freq.serialize(FrequencyRow {
            condition: *condition,
            c_a,
            c_b,
            c_c,
            c_d,
        })
        .map_err(|e| csv_err(&paths[2], e))?;

        let slices: Vec<&[EpisodeRecord]> = seeds.iter().map(|(_, e)| e.as_slice()).collect();
        for (i, h) in entropy_series(&slices, SMOOTHING_WINDOW)?
            .into_iter()
            .enumerate()
        {
            entropy
                .serialize(EntropyRow {
                    episode: i,
                    entropy: h,
                    condition: *condition,
                })
                .map_err(|e| csv_err(&paths[3], e))?;
        }
    }
    for (w, p) in [curve, smoothed, freq, entropy].iter_mut().zip(&paths) {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    Ok(paths)
}
