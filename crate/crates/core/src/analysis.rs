//! Efficiency, attenuation, symbol statistics and probing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::Agent;
use crate::protocol::Symbol;
use crate::training::EpisodeRecord;
use crate::{Error, Result};

pub use crate::stats::{welch_t_test, WelchResult};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Probability distribution over the four symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Distribution4([f64; 4]);

impl Distribution4 {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entries must be finite and non-negative: {p:?}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self(p))
    }

    pub fn uniform() -> Self {
        Self([0.25; 4])
    }

    pub fn from_counts(counts: [u64; 4]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidDistribution("no observations".into()));
        }
        let t = total as f64;
        Ok(Self(counts.map(|c| c as f64 / t)))
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for Distribution4 {
    type Error = Error;

    fn try_from(p: [f64; 4]) -> Result<Self> {
        Self::new(p)
    }
}

impl From<Distribution4> for [f64; 4] {
    fn from(d: Distribution4) -> Self {
        d.0
    }
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(d: &Distribution4) -> f64 {
    entropy_bits(&d.0).max(0.0)
}

/// Jensen-Shannon divergence in bits: `H(m) - (H(p) + H(q)) / 2` with
/// `m = (p + q) / 2`. Lies in `[0, 1]`.
pub fn js_divergence(p: &Distribution4, q: &Distribution4) -> f64 {
    let m: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| 0.5 * (a + b)).collect();
    let jsd = entropy_bits(&m) - 0.5 * (entropy_bits(&p.0) + entropy_bits(&q.0));
    jsd.clamp(0.0, 1.0)
}

/// Percentage by which the symbolic-protocol step count exceeds the
/// emergent one.
pub fn attenuation_rate(s_psp: f64, s_ec: f64) -> Result<f64> {
    if !(s_ec > 0.0) || !s_psp.is_finite() || !s_ec.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "attenuation rate needs a positive reference step count, got {s_ec}"
        )));
    }
    Ok((s_psp - s_ec) / s_ec * 100.0)
}

fn last_window<T>(items: &[T], window: usize) -> Result<&[T]> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("no episodes".into()));
    }
    if window == 0 || window > items.len() {
        return Err(Error::InvalidArgument(format!(
            "window {window} not in 1..={}",
            items.len()
        )));
    }
    Ok(&items[items.len() - window..])
}

/// Mean episode length over the last `window` episodes.
pub fn mean_final_steps(episodes: &[EpisodeRecord], window: usize) -> Result<f64> {
    let tail = last_window(episodes, window)?;
    Ok(tail.iter().map(|e| e.steps as f64).sum::<f64>() / tail.len() as f64)
}

pub fn symbol_counts(episodes: &[EpisodeRecord], agent: Option<Agent>) -> [u64; 4] {
    let mut counts = [0u64; 4];
    for e in episodes {
        for s in &e.symbols {
            if agent.map_or(true, |a| a == s.agent) {
                counts[s.symbol.index()] += 1;
            }
        }
    }
    counts
}

/// Emitted-symbol frequencies over the last `window` episodes, for one
/// agent or pooled over both.
pub fn symbol_distribution(
    episodes: &[EpisodeRecord],
    window: usize,
    agent: Option<Agent>,
) -> Result<Distribution4> {
    let counts = symbol_counts(last_window(episodes, window)?, agent);
    Distribution4::from_counts(counts)
}

/// JSD between the two agents' symbol distributions over the last `window`.
pub fn inter_agent_jsd(episodes: &[EpisodeRecord], window: usize) -> Result<f64> {
    let p = symbol_distribution(episodes, window, Some(Agent::A1))?;
    let q = symbol_distribution(episodes, window, Some(Agent::A2))?;
    Ok(js_divergence(&p, &q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeSample {
    pub episode: usize,
    pub symbol: usize,
    pub context: usize,
}

/// (symbol, context) pairs with episode ids for grouped splitting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProbeDataset {
    samples: Vec<ProbeSample>,
}

impl ProbeDataset {
    pub fn new(samples: Vec<ProbeSample>) -> Result<Self> {
        if let Some(s) = samples
            .iter()
            .find(|s| s.symbol >= Symbol::COUNT || s.context >= Symbol::COUNT)
        {
            return Err(Error::InvalidArgument(format!(
                "probe sample out of range: symbol {}, context {}",
                s.symbol, s.context
            )));
        }
        Ok(Self { samples })
    }

    /// Every emission in the last `window` episodes, both agents pooled.
    pub fn from_episodes(episodes: &[EpisodeRecord], window: usize) -> Result<Self> {
        let samples = last_window(episodes, window)?
            .iter()
            .flat_map(|e| {
                e.symbols.iter().map(move |s| ProbeSample {
                    episode: e.episode,
                    symbol: s.symbol.index(),
                    context: s.context.index(),
                })
            })
            .collect();
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[ProbeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn argmax_row(row: &[u64; 4]) -> usize {
    let mut best = 0;
    for i in 1..4 {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

/// Held-out accuracy of a symbol -> context lookup table.
///
/// Episodes are shuffled with `split_seed` and the first `train_fraction`
/// of them train the table. Each symbol predicts its most frequent training
/// context (ties to the lowest label); symbols unseen in training predict
/// the overall majority context.
pub fn probe_accuracy(data: &ProbeDataset, split_seed: u64, train_fraction: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty probe dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut episodes: Vec<usize> = data
        .samples
        .iter()
        .map(|s| s.episode)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_train = (train_fraction * episodes.len() as f64).round() as usize;
    if n_train == 0 || n_train >= episodes.len() {
        return Err(Error::InvalidArgument(format!(
            "episode split leaves an empty side ({} episodes, fraction {train_fraction})",
            episodes.len()
        )));
    }
    episodes.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let train: BTreeSet<usize> = episodes[..n_train].iter().copied().collect();

    let mut table = [[0u64; 4]; 4];
    let mut context_totals = [0u64; 4];
    for s in data.samples.iter().filter(|s| train.contains(&s.episode)) {
        table[s.symbol][s.context] += 1;
        context_totals[s.context] += 1;
    }
    let majority = argmax_row(&context_totals);
    let predict = |symbol: usize| {
        let row = &table[symbol];
        if row.iter().all(|&c| c == 0) {
            majority
        } else {
            argmax_row(row)
        }
    };

    let (mut hits, mut total) = (0u64, 0u64);
    for s in data.samples.iter().filter(|s| !train.contains(&s.episode)) {
        total += 1;
        if predict(s.symbol) == s.context {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(
            "held-out split has no samples".into(),
        ));
    }
    Ok(hits as f64 / total as f64)
}

/// Entropy of the pooled symbol distribution over a trailing window of
/// `window` episodes ending at each episode index, combining all runs.
/// Early indices use whatever history exists.
pub fn entropy_series(runs: &[&[EpisodeRecord]], window: usize) -> Result<Vec<f64>> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    if len == 0 || window == 0 {
        return Err(Error::InvalidArgument(
            "entropy series needs episodes and a window".into(),
        ));
    }
    let per_episode: Vec<Vec<[u64; 4]>> = runs
        .iter()
        .map(|r| {
            r[..len]
                .iter()
                .map(|e| symbol_counts(std::slice::from_ref(e), None))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(len);
    let mut acc = [0u64; 4];
    for i in 0..len {
        for run in &per_episode {
            for k in 0..4 {
                acc[k] += run[i][k];
            }
            if i >= window {
                for k in 0..4 {
                    acc[k] -= run[i - window][k];
                }
            }
        }
        out.push(shannon_entropy(&Distribution4::from_counts(acc)?));
    }
    Ok(out)
}

/// Trailing moving average over `window` values.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= window {
            acc -= values[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}
