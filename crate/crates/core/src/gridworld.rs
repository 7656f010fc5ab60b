//! Two-agent cooperative navigation on a square grid.
//!
//! Agent 1 starts in the `(0, 0)` corner and agent 2 in the opposite corner.
//! A treasure is placed uniformly at random on every reset. Both agents move
//! simultaneously; the episode succeeds when both stand on the treasure after
//! the same step. Every step costs `-1`, success adds `+10` on top.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{encode_symbol, Symbol};
use crate::{Error, Result};

pub const GRID_SIZE: usize = 5;
pub const MAX_STEPS: usize = 100;
pub const STEP_PENALTY: f64 = -1.0;
pub const SUCCESS_BONUS: f64 = 10.0;
pub const OBS_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPos {
    pub x: usize,
    pub y: usize,
}

impl GridPos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Applies `action`, staying put if the move would leave a `size`-wide grid.
    pub fn moved(self, action: MoveAction, size: usize) -> Self {
        let GridPos { x, y } = self;
        match action {
            MoveAction::Up if y + 1 < size => GridPos::new(x, y + 1),
            MoveAction::Down if y > 0 => GridPos::new(x, y - 1),
            MoveAction::Left if x > 0 => GridPos::new(x - 1, y),
            MoveAction::Right if x + 1 < size => GridPos::new(x + 1, y),
            _ => self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stay = 4,
}

impl MoveAction {
    pub const COUNT: usize = 5;
    pub const ALL: [MoveAction; 5] = [
        MoveAction::Up,
        MoveAction::Down,
        MoveAction::Left,
        MoveAction::Right,
        MoveAction::Stay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agent {
    A1,
    A2,
}

impl Agent {
    pub const BOTH: [Agent; 2] = [Agent::A1, Agent::A2];

    pub fn index(self) -> usize {
        match self {
            Agent::A1 => 0,
            Agent::A2 => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Agent::A1),
            1 => Some(Agent::A2),
            _ => None,
        }
    }

    pub fn partner(self) -> Self {
        match self {
            Agent::A1 => Agent::A2,
            Agent::A2 => Agent::A1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub pos_a1: GridPos,
    pub pos_a2: GridPos,
    pub treasure: GridPos,
    pub step_count: usize,
}

impl EnvState {
    pub fn position(&self, agent: Agent) -> GridPos {
        match agent {
            Agent::A1 => self.pos_a1,
            Agent::A2 => self.pos_a2,
        }
    }

    pub fn both_on_treasure(&self) -> bool {
        self.pos_a1 == self.treasure && self.pos_a2 == self.treasure
    }
}

/// Agent input: normalized self and treasure coordinates followed by the
/// one-hot received symbol (all zeros when nothing was received).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridWorld {
    size: usize,
    max_steps: usize,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self {
            size: GRID_SIZE,
            max_steps: MAX_STEPS,
        }
    }
}

impl GridWorld {
    pub fn new(size: usize, max_steps: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 2, got {size}"
            )));
        }
        if max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(Self { size, max_steps })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn start_position(&self, agent: Agent) -> GridPos {
        match agent {
            Agent::A1 => GridPos::new(0, 0),
            Agent::A2 => GridPos::new(self.size - 1, self.size - 1),
        }
    }

    pub fn contains(&self, pos: GridPos) -> bool {
        pos.x < self.size && pos.y < self.size
    }

    /// Draws exactly one cell index from `rng` for the treasure.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let cell = rng.gen_range(0..self.size * self.size);
        self.reset_with_treasure(GridPos::new(cell % self.size, cell / self.size))
    }

    pub fn reset_with_treasure(&self, treasure: GridPos) -> EnvState {
        EnvState {
            pos_a1: self.start_position(Agent::A1),
            pos_a2: self.start_position(Agent::A2),
            treasure,
            step_count: 0,
        }
    }

    pub fn is_terminal(&self, state: &EnvState) -> bool {
        state.both_on_treasure() || state.step_count >= self.max_steps
    }

    pub fn step(
        &self,
        state: &EnvState,
        move_a1: MoveAction,
        move_a2: MoveAction,
    ) -> Result<StepOutcome> {
        if self.is_terminal(state) {
            return Err(Error::EpisodeTerminated);
        }
        let next = EnvState {
            pos_a1: state.pos_a1.moved(move_a1, self.size),
            pos_a2: state.pos_a2.moved(move_a2, self.size),
            treasure: state.treasure,
            step_count: state.step_count + 1,
        };
        let success = next.both_on_treasure();
        let reward = if success {
            STEP_PENALTY + SUCCESS_BONUS
        } else {
            STEP_PENALTY
        };
        Ok(StepOutcome {
            state: next,
            reward,
            done: success || next.step_count >= self.max_steps,
            success,
        })
    }

    pub fn observe(&self, state: &EnvState, agent: Agent, received: Option<Symbol>) -> Observation {
        let scale = (self.size - 1) as f64;
        let me = state.position(agent);
        let onehot = encode_symbol(received);
        Observation([
            me.x as f64 / scale,
            me.y as f64 / scale,
            state.treasure.x as f64 / scale,
            state.treasure.y as f64 / scale,
            onehot[0],
            onehot[1],
            onehot[2],
            onehot[3],
        ])
    }
}
