//! Continuous 2-D reaching task: move a point toward a goal with bounded
//! velocity commands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, ActionValue, EnvSpec, Environment, Observation, StepOutcome};

pub const STEP_SCALE: f64 = 0.05;
pub const GOAL_RADIUS: f64 = 0.05;
pub const MAX_STEPS: usize = 50;
/// Distance from the start (the origin) to the goal at reset.
pub const GOAL_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointReachState {
    pub position: [f64; 2],
    pub goal: [f64; 2],
}

impl PointReachState {
    pub fn distance(&self) -> f64 {
        (self.position[0] - self.goal[0]).hypot(self.position[1] - self.goal[1])
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.position[0], self.position[1], self.goal[0], self.goal[1]]
    }
}

/// Each action component is clamped to `[-1, 1]`. If the point already sits
/// within the goal radius the episode ends without moving; otherwise the
/// point moves by `0.05·action` and the reward is minus the new distance.
/// The step cap is handled by [`PointReach`].
pub fn pointreach_step(state: PointReachState, action: [f64; 2]) -> (PointReachState, f64, bool) {
    let start = state.distance();
    if start < GOAL_RADIUS {
        return (state, -start, true);
    }
    let mut next = state;
    for (p, a) in next.position.iter_mut().zip(action) {
        *p += STEP_SCALE * a.clamp(-1.0, 1.0);
    }
    let d = next.distance();
    (next, -d, d < GOAL_RADIUS)
}

#[derive(Debug, Clone)]
pub struct PointReach {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    state: PointReachState,
    steps: usize,
    done: bool,
}

impl PointReach {
    pub fn new(seed: u64) -> Self {
        Self {
            spec: EnvSpec {
                name: "pointreach".into(),
                observation_dim: 4,
                action_kind: ActionKind::Continuous,
                action_count_or_dim: 2,
                max_episode_steps: MAX_STEPS,
                deterministic: false,
                action_bound: 1.0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: PointReachState::default(),
            steps: 0,
            done: true,
        }
    }

    pub fn set_state(&mut self, state: PointReachState) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }

    pub fn state(&self) -> PointReachState {
        self.state
    }
}

impl Environment for PointReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        // Every episode starts equally far from its goal, so the episodic
        // reward ranks how well the point was steered, not how lucky the
        // draw was.
        let angle = self.rng.random_range(0.0..std::f64::consts::TAU);
        let goal = [GOAL_DISTANCE * angle.cos(), GOAL_DISTANCE * angle.sin()];
        let state = PointReachState { position: [0.0, 0.0], goal };
        self.set_state(state);
        state.to_vec()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("step called after episode end".into()));
        }
        let a = match action.as_continuous() {
            Some(&[x, y]) if x.is_finite() && y.is_finite() => [x, y],
            _ => return Err(Error::InvalidAction("pointreach takes a finite 2-vector".into())),
        };
        let (next, reward, reached) = pointreach_step(self.state, a);
        self.state = next;
        self.steps += 1;
        self.done = reached || self.steps >= MAX_STEPS;
        Ok(StepOutcome { observation: next.to_vec(), reward, done: self.done })
    }
}
