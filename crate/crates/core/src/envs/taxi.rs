//! Fixed-layout 5×5 taxi: the taxi starts top-left, the passenger waits
//! bottom-left and must be dropped off top-right. No interior walls.

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, ActionValue, EnvSpec, Environment, Observation, StepOutcome};

pub const GRID: usize = 5;
pub const START: (usize, usize) = (0, 0);
pub const PASSENGER_CELL: (usize, usize) = (GRID - 1, 0);
pub const GOAL_CELL: (usize, usize) = (0, GRID - 1);
pub const MAX_STEPS: usize = 200;
pub const N_STATES: usize = GRID * GRID * 2;

pub const STEP_PENALTY: f64 = -1.0;
pub const ILLEGAL_PENALTY: f64 = -10.0;
pub const DELIVERY_REWARD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaxiAction {
    Up,
    Down,
    Left,
    Right,
    PickUp,
    DropOff,
}

impl TaxiAction {
    pub const ALL: [TaxiAction; 6] = [
        TaxiAction::Up,
        TaxiAction::Down,
        TaxiAction::Left,
        TaxiAction::Right,
        TaxiAction::PickUp,
        TaxiAction::DropOff,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::InvalidAction(format!("taxi action {i} out of range (< 6)")))
    }
}

/// Row 0 is the top of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaxiState {
    pub row: usize,
    pub col: usize,
    pub passenger_in_taxi: bool,
}

impl TaxiState {
    pub fn initial() -> Self {
        Self { row: START.0, col: START.1, passenger_in_taxi: false }
    }

    pub fn id(&self) -> usize {
        (self.row * GRID + self.col) * 2 + usize::from(self.passenger_in_taxi)
    }
}

/// One transition of the taxi dynamics, without the episode step cap.
pub fn taxi_step(state: TaxiState, action: TaxiAction) -> (TaxiState, f64, bool) {
    let mut next = state;
    match action {
        TaxiAction::Up => next.row = state.row.saturating_sub(1),
        TaxiAction::Down => next.row = (state.row + 1).min(GRID - 1),
        TaxiAction::Left => next.col = state.col.saturating_sub(1),
        TaxiAction::Right => next.col = (state.col + 1).min(GRID - 1),
        TaxiAction::PickUp => {
            if !state.passenger_in_taxi && (state.row, state.col) == PASSENGER_CELL {
                next.passenger_in_taxi = true;
            } else {
                return (state, ILLEGAL_PENALTY, false);
            }
        }
        TaxiAction::DropOff => {
            if state.passenger_in_taxi && (state.row, state.col) == GOAL_CELL {
                return (state, DELIVERY_REWARD, true);
            }
            return (state, ILLEGAL_PENALTY, false);
        }
    }
    (next, STEP_PENALTY, false)
}

#[derive(Debug, Clone)]
pub struct Taxi {
    spec: EnvSpec,
    state: TaxiState,
    steps: usize,
    done: bool,
}

impl Taxi {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "taxi".into(),
                observation_dim: N_STATES,
                action_kind: ActionKind::Discrete,
                action_count_or_dim: TaxiAction::ALL.len(),
                max_episode_steps: MAX_STEPS,
                deterministic: true,
                action_bound: 1.0,
            },
            state: TaxiState::initial(),
            steps: 0,
            done: false,
        }
    }

    pub fn state(&self) -> TaxiState {
        self.state
    }

    fn observe(&self) -> Observation {
        let mut obs = vec![0.0; N_STATES];
        obs[self.state.id()] = 1.0;
        obs
    }
}

impl Default for Taxi {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Taxi {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: Option<u64>) -> Observation {
        self.state = TaxiState::initial();
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("step called after episode end".into()));
        }
        let index = action.as_discrete().ok_or_else(|| Error::InvalidAction("taxi takes discrete actions".into()))?;
        let (next, reward, delivered) = taxi_step(self.state, TaxiAction::from_index(index)?);
        self.state = next;
        self.steps += 1;
        self.done = delivered || self.steps >= MAX_STEPS;
        Ok(StepOutcome { observation: self.observe(), reward, done: self.done })
    }

    fn state_id(&self) -> Option<usize> {
        Some(self.state.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn up_at_top_edge_is_a_paid_noop() {
        let (next, r, done) = taxi_step(TaxiState::initial(), TaxiAction::Up);
        assert_eq!(next, TaxiState::initial());
        assert_eq!(r, -1.0);
        assert!(!done);
    }

    #[test]
    fn pickup_on_passenger_cell() {
        let s = TaxiState { row: 4, col: 0, passenger_in_taxi: false };
        let (next, r, done) = taxi_step(s, TaxiAction::PickUp);
        assert!(next.passenger_in_taxi);
        assert_eq!(r, -1.0);
        assert!(!done);
    }

    #[test]
    fn wrong_pickup_and_dropoff_penalized() {
        let s = TaxiState::initial();
        assert_eq!(taxi_step(s, TaxiAction::PickUp), (s, -10.0, false));
        assert_eq!(taxi_step(s, TaxiAction::DropOff), (s, -10.0, false));
        let at_goal_empty = TaxiState { row: 0, col: 4, passenger_in_taxi: false };
        assert_eq!(taxi_step(at_goal_empty, TaxiAction::DropOff).1, -10.0);
        let loaded = TaxiState { row: 4, col: 0, passenger_in_taxi: true };
        assert_eq!(taxi_step(loaded, TaxiAction::PickUp).1, -10.0);
    }

    #[test]
    fn delivery_ends_episode() {
        let s = TaxiState { row: 0, col: 4, passenger_in_taxi: true };
        let (_, r, done) = taxi_step(s, TaxiAction::DropOff);
        assert_eq!(r, 20.0);
        assert!(done);
    }

    #[test]
    fn step_cap_and_invalid_index() {
        let mut env = Taxi::new();
        env.reset(None);
        assert!(matches!(env.step(&ActionValue::Discrete(6)), Err(Error::InvalidAction(_))));
        for i in 0..MAX_STEPS {
            let out = env.step(&ActionValue::Discrete(0)).unwrap();
            assert_eq!(out.done, i + 1 == MAX_STEPS);
        }
        assert!(env.step(&ActionValue::Discrete(0)).is_err());
    }
}
