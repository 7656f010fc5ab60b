//! Per-timestep interaction loop and TD learning for both agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{Agent, EnvState, GridWorld, MoveAction, Observation, OBS_DIM};
use crate::neural::{
    epsilon_greedy, fit_chosen_outputs, AdamState, Mlp, MlpParams, ReplayBuffer, Transition,
};
use crate::protocol::{psp_symbol, symbol_from_values, CommPolicy, Condition, Symbol};
use crate::{Error, Result};

/// Learning hyperparameters and schedule for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub grid_size: usize,
    pub max_steps: usize,
    pub episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub epsilon: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub hidden_units: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            grid_size: 5,
            max_steps: 100,
            episodes: 500,
            gamma: 0.95,
            lr: 1e-3,
            epsilon: 0.1,
            buffer_capacity: 2000,
            batch_size: 32,
            hidden_units: 32,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.grid_size < 2 {
            return bad(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            ));
        }
        for (name, v) in [
            ("max_steps", self.max_steps),
            ("episodes", self.episodes),
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("hidden_units", self.hidden_units),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || !self.gamma.is_finite() {
            return bad(format!("gamma out of range [0, 1]: {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !self.epsilon.is_finite() {
            return bad(format!("epsilon out of range [0, 1]: {}", self.epsilon));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr out of range (must be positive): {}", self.lr));
        }
        if self.batch_size > self.buffer_capacity {
            return bad(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            ));
        }
        Ok(())
    }

    pub fn env(&self) -> Result<GridWorld> {
        GridWorld::new(self.grid_size, self.max_steps)
    }
}

/// One learner: movement Q-network, symbol policy and private replay.
#[derive(Debug, Clone)]
pub struct AgentNets {
    pub qnet: Mlp,
    pub adam: AdamState,
    pub comm: CommPolicy,
    pub buffer: ReplayBuffer,
}

impl AgentNets {
    pub fn new<R: Rng + ?Sized>(
        condition: Condition,
        config: &TrainingConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let qnet = Mlp::init(OBS_DIM, config.hidden_units, MoveAction::COUNT, rng)?;
        let adam = AdamState::new(&qnet);
        let comm = CommPolicy::new(condition, config.hidden_units, rng)?;
        let buffer = ReplayBuffer::new(config.buffer_capacity)?;
        Ok(Self {
            qnet,
            adam,
            comm,
            buffer,
        })
    }

    pub fn params(&self) -> AgentParams {
        AgentParams {
            qnet: self.qnet.params().clone(),
            comm: self.comm.head().map(|h| h.params().clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub qnet: MlpParams,
    pub comm: Option<MlpParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    /// Timestep, starting at 1.
    pub t: usize,
    pub agent: Agent,
    pub symbol: Symbol,
    /// The sender's quadrant label at emission time.
    pub context: Symbol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub success: bool,
    pub total_return: f64,
    pub symbols: Vec<SymbolEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub condition: Condition,
    pub episodes: Vec<EpisodeRecord>,
    pub final_params: [AgentParams; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub move_loss: f64,
    pub comm_loss: Option<f64>,
}

/// Everything that happened in one timestep, for inspection by callers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub t: usize,
    pub before: EnvState,
    pub after: EnvState,
    pub obs: [Observation; 2],
    pub next_obs: [Observation; 2],
    pub symbols: [Symbol; 2],
    pub moves: [MoveAction; 2],
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub losses: [Option<LossStats>; 2],
}

pub fn select_move<R: Rng + ?Sized>(
    qnet: &Mlp,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<MoveAction> {
    let q = qnet.predict(obs.as_slice())?;
    move_from_values(&q, epsilon, rng)
}

fn move_from_values<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<MoveAction> {
    MoveAction::from_index(epsilon_greedy(q, epsilon, rng)).ok_or(Error::DimensionMismatch {
        expected: MoveAction::COUNT,
        actual: q.len(),
    })
}

/// `reward` for terminal transitions, otherwise
/// `reward + gamma * max_a Q(next_obs, a)` under the same online network.
pub fn td_target(
    reward: f64,
    done: bool,
    next_obs: &Observation,
    qnet: &Mlp,
    gamma: f64,
) -> Result<f64> {
    if done {
        return Ok(reward);
    }
    let q = qnet.predict(next_obs.as_slice())?;
    Ok(reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// One Adam update of the movement head and, when learned, the symbol head.
pub fn train_step(
    agent: &mut AgentNets,
    batch: &[Transition],
    gamma: f64,
    lr: f64,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let inputs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();

    let moves: Vec<usize> = batch.iter().map(|t| t.move_action.index()).collect();
    let targets = batch
        .iter()
        .map(|t| td_target(t.reward, t.done, &t.next_obs, &agent.qnet, gamma))
        .collect::<Result<Vec<_>>>()?;
    let move_loss = fit_chosen_outputs(
        &mut agent.qnet,
        &mut agent.adam,
        &inputs,
        &moves,
        &targets,
        lr,
    )?;

    let comm_loss = match &mut agent.comm {
        CommPolicy::Psp => None,
        CommPolicy::Ec { head, adam } => {
            let symbols = batch
                .iter()
                .map(|t| {
                    t.symbol.map(Symbol::index).ok_or_else(|| {
                        Error::InvalidArgument("learned symbol head needs symbol actions".into())
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let targets = batch
                .iter()
                .map(|t| td_target(t.reward, t.done, &t.next_obs, head, gamma))
                .collect::<Result<Vec<_>>>()?;
            Some(fit_chosen_outputs(
                head, adam, &inputs, &symbols, &targets, lr,
            )?)
        }
    };
    Ok(LossStats {
        move_loss,
        comm_loss,
    })
}

fn emit_symbol<R: Rng + ?Sized>(
    agent: &AgentNets,
    state: &EnvState,
    who: Agent,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<Symbol> {
    match &agent.comm {
        CommPolicy::Psp => Ok(psp_symbol(state.position(who), state.treasure)),
        CommPolicy::Ec { head, .. } => {
            let q = head.predict(obs.as_slice())?;
            Ok(symbol_from_values(&q, epsilon, rng))
        }
    }
}

/// Plays one episode, learning online. Symbols are chosen before moves and
/// reach the partner on the following timestep.
pub fn run_episode<R: Rng + ?Sized>(
    env: &GridWorld,
    agents: &mut [AgentNets; 2],
    config: &TrainingConfig,
    episode: usize,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    run_episode_traced(env, agents, config, episode, rng, |_| {})
}

pub fn run_episode_traced<R, F>(
    env: &GridWorld,
    agents: &mut [AgentNets; 2],
    config: &TrainingConfig,
    episode: usize,
    rng: &mut R,
    mut on_step: F,
) -> Result<EpisodeRecord>
where
    R: Rng + ?Sized,
    F: FnMut(&StepTrace),
{
    let condition = agents[0].comm.condition();
    if agents[1].comm.condition() != condition {
        return Err(Error::InvalidArgument(
            "both agents must use the same communication condition".into(),
        ));
    }
    let mut state = env.reset(rng);
    let mut received: [Option<Symbol>; 2] = [None, None];
    let mut symbols_log = Vec::with_capacity(2 * env.max_steps());
    let mut total_return = 0.0;

    loop {
        let t = state.step_count + 1;
        let mut obs = [Observation([0.0; OBS_DIM]); 2];
        let mut symbols = [Symbol::CA; 2];
        let mut moves = [MoveAction::Stay; 2];
        for who in Agent::BOTH {
            let i = who.index();
            obs[i] = env.observe(&state, who, received[i]);
            symbols[i] = emit_symbol(&agents[i], &state, who, &obs[i], config.epsilon, rng)?;
            moves[i] = select_move(&agents[i].qnet, &obs[i], config.epsilon, rng)?;
            symbols_log.push(SymbolEntry {
                t,
                agent: who,
                symbol: symbols[i],
                context: psp_symbol(state.position(who), state.treasure),
            });
        }

        let outcome = env.step(&state, moves[0], moves[1])?;
        total_return += outcome.reward;
        // delivery: each agent hears what its partner just said
        let next_received = [Some(symbols[1]), Some(symbols[0])];

        let mut next_obs = obs;
        let mut losses = [None, None];
        for who in Agent::BOTH {
            let i = who.index();
            next_obs[i] = env.observe(&outcome.state, who, next_received[i]);
            agents[i].buffer.push(Transition {
                obs: obs[i],
                move_action: moves[i],
                symbol: (condition == Condition::Ec).then_some(symbols[i]),
                reward: outcome.reward,
                next_obs: next_obs[i],
                // a timeout is not part of the observed state, so only
                // success ends bootstrapping
                done: outcome.success,
            });
        }
        for (i, agent) in agents.iter_mut().enumerate() {
            if agent.buffer.len() >= config.batch_size {
                let batch = agent.buffer.sample(config.batch_size, rng)?;
                losses[i] = Some(train_step(agent, &batch, config.gamma, config.lr)?);
            }
        }

        on_step(&StepTrace {
            t,
            before: state,
            after: outcome.state,
            obs,
            next_obs,
            symbols,
            moves,
            reward: outcome.reward,
            done: outcome.done,
            success: outcome.success,
            losses,
        });

        state = outcome.state;
        received = next_received;
        if outcome.done {
            return Ok(EpisodeRecord {
                episode,
                steps: state.step_count,
                success: outcome.success,
                total_return,
                symbols: symbols_log,
            });
        }
    }
}

/// Fresh environment and agents, then `config.episodes` episodes with
/// persistent networks and buffers. Fully determined by `seed`.
pub fn run_training(config: &TrainingConfig, condition: Condition, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let env = config.env()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = [
        AgentNets::new(condition, config, &mut rng)?,
        AgentNets::new(condition, config, &mut rng)?,
    ];
    let episodes = (0..config.episodes)
        .map(|e| run_episode(&env, &mut agents, config, e, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        seed,
        condition,
        episodes,
        final_params: [agents[0].params(), agents[1].params()],
    })
}
